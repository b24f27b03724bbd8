//! Arithmetic expressions over named surface parameters.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term  (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right associative
//! atom    := number | 'pi' | ident | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | tan | exp | log | sqrt | abs
//! ```
//!
//! Identifiers must be declared up front; unknown names are rejected while
//! parsing, so a parsed [`Expr`] can always be evaluated against a slice with
//! one value per declared variable.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> Result<f64> {
        let y = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return Err(Error::Evaluation(format!("log of non-positive value {x}")));
                }
                x.ln()
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(Error::Evaluation(format!("sqrt of negative value {x}")));
                }
                x.sqrt()
            }
            Func::Abs => x.abs(),
        };
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Evaluate with `vars[i]` bound to the i-th declared variable.
    pub fn eval(&self, vars: &[f64]) -> Result<f64> {
        let value = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => vars[*i],
            Expr::Neg(e) => -e.eval(vars)?,
            Expr::Call(f, e) => f.apply(e.eval(vars)?)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(vars)?;
                let b = r.eval(vars)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::Evaluation("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Evaluation(format!("non-finite value {value}")))
        }
    }
}

/// Parse `text` with the given variable names in scope.
pub fn parse_expression(text: &str, vars: &[String]) -> Result<Expr> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        vars,
        text,
    };
    let expr = parser.expr()?;
    match parser.peek() {
        Tok::End => Ok(expr),
        _ => Err(parser.error("unexpected trailing input")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // optional exponent: e, E followed by optional sign and digits
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| Error::Parse {
                location: format!("column {}", start + 1),
                message: format!("malformed number `{lit}`"),
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(Error::Parse {
                        location: format!("column {}", start + 1),
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            i += c.len_utf8();
            out.push((tok, start));
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [String],
    text: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, message: &str) -> Error {
        let col = self.tokens[self.pos].1;
        Error::Parse {
            location: format!("column {} of `{}`", col + 1, self.text),
            message: message.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Tok::Op('-') = self.peek() {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.bump();
                    if *self.peek() != Tok::LParen {
                        return Err(self.error(&format!("expected `(` after `{name}`")));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() == Tok::Comma {
                        return Err(self.error(&format!("`{name}` takes exactly one argument")));
                    }
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if let Some(index) = self.vars.iter().position(|v| *v == name) {
                    self.bump();
                    return Ok(Expr::Var(index));
                }
                if name == "pi" {
                    self.bump();
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                Err(self.error(&format!("unknown identifier `{name}`")))
            }
            Tok::End => Err(self.error("unexpected end of expression")),
            _ => Err(self.error("expected a number, variable, function or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.error("expected `)`"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn eval(text: &str, names: &[&str], at: &[f64]) -> Result<f64> {
        parse_expression(text, &vars(names))?.eval(at)
    }

    #[test]
    fn arithmetic_and_functions() {
        assert_eq!(eval("2*(1+cos(u))", &["u"], &[0.0]).unwrap(), 4.0);
        let one = eval("sin(u)^2 + cos(u)^2", &["u"], &[0.7]).unwrap();
        assert!((one - 1.0).abs() < 1e-15);
        assert_eq!(eval("2^3^2", &[], &[]).unwrap(), 512.0);
        assert_eq!(eval("-2^2", &[], &[]).unwrap(), -4.0);
        assert_eq!(eval("2^-1", &[], &[]).unwrap(), 0.5);
        assert_eq!(eval("8/2/2", &[], &[]).unwrap(), 2.0);
        assert_eq!(eval("1-2-3", &[], &[]).unwrap(), -4.0);
        assert_eq!(eval("1.5e2 + 2E-1", &[], &[]).unwrap(), 150.2);
        assert_eq!(eval("abs(u - v)", &["u", "v"], &[1.0, 3.0]).unwrap(), 2.0);
        assert_eq!(eval("pi", &[], &[]).unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn declared_name_shadows_pi() {
        assert_eq!(eval("pi + 1", &["pi"], &[2.0]).unwrap(), 3.0);
    }

    #[test]
    fn evaluation_errors() {
        assert!(matches!(
            eval("sqrt(u-2)", &["u"], &[1.0]),
            Err(Error::Evaluation(_))
        ));
        assert!(matches!(eval("log(u)", &["u"], &[0.0]), Err(Error::Evaluation(_))));
        assert!(matches!(eval("1/u", &["u"], &[0.0]), Err(Error::Evaluation(_))));
        assert!(matches!(eval("(-8)^0.5", &[], &[]), Err(Error::Evaluation(_))));
        assert!(matches!(eval("exp(1000)", &[], &[]), Err(Error::Evaluation(_))));
    }

    #[test]
    fn parse_errors() {
        for bad in ["u +", "w*2", "sin(u, u)", "sin u", "(u", "u)", "2 $ 3", "", "cos()"] {
            let err = parse_expression(bad, &vars(&["u"])).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{bad}: {err}");
        }
        let msg = parse_expression("u + w", &vars(&["u"])).unwrap_err().to_string();
        assert!(msg.contains("unknown identifier `w`"), "{msg}");
        assert!(msg.contains("column 5"), "{msg}");
    }
}
