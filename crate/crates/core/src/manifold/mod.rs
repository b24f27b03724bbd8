//! Parametric submanifolds of R^N.
//!
//! A [`SurfaceDefinition`] maps an n-dimensional parameter box into R^N
//! (n < N). Built-in shapes carry analytic first and second derivatives;
//! expression-defined surfaces are differentiated by central differences.

pub mod expr;
mod shapes;
pub mod spec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
pub use expr::{parse_expression, Expr};
use shapes::Shape;
pub use spec::{parse_surface_spec, print_surface_spec, DomainEntry, SurfaceKind, SurfaceSpec};

/// Default central-difference step for expression-defined surfaces.
pub const DEFAULT_DERIVATIVE_STEP: f64 = 1e-5;

/// Second differences use a wider stencil than first differences; with
/// h = 1e-5 the round-off term eps/h² would otherwise dominate.
const SECOND_STEP_FACTOR: f64 = 10.0;

/// Relative threshold on singular values of the jacobian below which a jet
/// is flagged as singular.
pub const SINGULAR_RATIO: f64 = 1e-10;

/// One parameter interval. Periodic intervals are `[lo, hi)` with period
/// `hi - lo`; clamped intervals are closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl ParamRange {
    pub fn clamped(lo: f64, hi: f64) -> Self {
        ParamRange {
            lo,
            hi,
            periodic: false,
        }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        ParamRange {
            lo,
            hi,
            periodic: true,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Reduce a periodic coordinate into `[lo, hi)`. In-range values and
    /// clamped coordinates are returned bit-for-bit.
    pub fn wrap(&self, x: f64) -> f64 {
        if !self.periodic || (x >= self.lo && x < self.hi) {
            return x;
        }
        let mut y = self.lo + (x - self.lo).rem_euclid(self.width());
        if y >= self.hi {
            y = self.lo;
        }
        y
    }

    pub fn contains(&self, x: f64) -> bool {
        self.periodic || (x >= self.lo && x <= self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference { step: f64 },
}

/// Position, jacobian and second partials of a surface at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceJet {
    pub param_dim: usize,
    pub ambient_dim: usize,
    /// x(ξ), length N.
    pub position: Vec<f64>,
    /// ∂_a x^I stored row-major as `[I][a]`.
    pub jacobian: Vec<f64>,
    /// ∂²_{ab} x^I stored as `[I][a][b]`, exactly symmetric in (a, b).
    pub second: Vec<f64>,
    /// Set when the jacobian is numerically rank deficient (a chart singularity).
    pub singular: bool,
}

impl SurfaceJet {
    fn zeros(param_dim: usize, ambient_dim: usize) -> Self {
        SurfaceJet {
            param_dim,
            ambient_dim,
            position: vec![0.0; ambient_dim],
            jacobian: vec![0.0; ambient_dim * param_dim],
            second: vec![0.0; ambient_dim * param_dim * param_dim],
            singular: false,
        }
    }

    #[inline]
    pub fn d(&self, i: usize, a: usize) -> f64 {
        self.jacobian[i * self.param_dim + a]
    }

    #[inline]
    pub fn dd(&self, i: usize, a: usize, b: usize) -> f64 {
        let n = self.param_dim;
        self.second[(i * n + a) * n + b]
    }

    #[inline]
    fn set_d(&mut self, i: usize, a: usize, value: f64) {
        self.jacobian[i * self.param_dim + a] = value;
    }

    /// Writes both (a, b) and (b, a).
    #[inline]
    fn set_dd(&mut self, i: usize, a: usize, b: usize, value: f64) {
        let n = self.param_dim;
        self.second[(i * n + a) * n + b] = value;
        self.second[(i * n + b) * n + a] = value;
    }

    /// Tangent vector ∂_a x.
    pub fn tangent(&self, a: usize) -> Vec<f64> {
        (0..self.ambient_dim).map(|i| self.d(i, a)).collect()
    }

    /// Euclidean dot product of the tangent ∂_a x with an ambient vector.
    pub fn tangent_dot(&self, a: usize, w: &[f64]) -> f64 {
        (0..self.ambient_dim).map(|i| self.d(i, a) * w[i]).sum()
    }

    /// Singular values of the N×n jacobian, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.ambient_dim, self.param_dim, &self.jacobian);
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    fn flag_singularity(&mut self) {
        let sv = self.singular_values();
        let largest = sv.first().copied().unwrap_or(0.0);
        let smallest = sv.last().copied().unwrap_or(0.0);
        self.singular = !(largest > 0.0) || smallest < SINGULAR_RATIO * largest;
    }
}

/// A smooth map from a parameter box into R^N. Immutable once built.
#[derive(Debug, Clone)]
pub struct SurfaceDefinition {
    shape: Shape,
    domain: Vec<ParamRange>,
    ambient_dim: usize,
    derivatives: DerivativeMode,
}

impl SurfaceDefinition {
    fn build(
        shape: Shape,
        domain: Vec<ParamRange>,
        ambient_dim: usize,
        derivatives: DerivativeMode,
    ) -> Result<Self> {
        let n = domain.len();
        if n == 0 {
            return Err(Error::validation("domain", "at least one parameter required"));
        }
        if n >= ambient_dim {
            return Err(Error::validation(
                "ambient_dim",
                format!("parameter dimension {n} must be smaller than ambient dimension {ambient_dim}"),
            ));
        }
        for (i, r) in domain.iter().enumerate() {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo < r.hi) {
                return Err(Error::validation(
                    format!("domain[{i}]"),
                    format!("need finite lo < hi, got [{}, {}]", r.lo, r.hi),
                ));
            }
        }
        if let DerivativeMode::FiniteDifference { step } = derivatives {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::validation("derivative_step", "must be positive"));
            }
        }
        Ok(SurfaceDefinition {
            shape,
            domain,
            ambient_dim,
            derivatives,
        })
    }

    /// Sphere (θ, φ) ↦ c + ρ (sinθ cosφ, sinθ sinφ, cosθ); θ ∈ [0, π] clamped, φ periodic.
    pub fn sphere(center: [f64; 3], radius: f64) -> Result<Self> {
        positive("radius", radius)?;
        Self::ellipsoid(center, [radius; 3])
    }

    /// Ellipsoid with semi-axes (a, b, c) in the sphere's (θ, φ) chart.
    pub fn ellipsoid(center: [f64; 3], semi_axes: [f64; 3]) -> Result<Self> {
        for (i, &a) in semi_axes.iter().enumerate() {
            positive(&format!("semi_axes[{i}]"), a)?;
        }
        finite_vec("center", &center)?;
        Self::build(
            Shape::Ellipsoid {
                center,
                axes: semi_axes,
            },
            vec![
                ParamRange::clamped(0.0, std::f64::consts::PI),
                ParamRange::periodic(0.0, std::f64::consts::TAU),
            ],
            3,
            DerivativeMode::Analytic,
        )
    }

    /// Torus about the z axis: (u, v) ↦ c + ((R + r cos u) cos v, (R + r cos u) sin v, r sin u).
    pub fn torus(center: [f64; 3], major_radius: f64, minor_radius: f64) -> Result<Self> {
        positive("major_radius", major_radius)?;
        positive("minor_radius", minor_radius)?;
        if minor_radius >= major_radius {
            return Err(Error::validation(
                "minor_radius",
                "must be smaller than major_radius for a regular torus",
            ));
        }
        finite_vec("center", &center)?;
        Self::build(
            Shape::Torus {
                center,
                major: major_radius,
                minor: minor_radius,
            },
            vec![
                ParamRange::periodic(0.0, std::f64::consts::TAU),
                ParamRange::periodic(0.0, std::f64::consts::TAU),
            ],
            3,
            DerivativeMode::Analytic,
        )
    }

    /// Circle of the given radius in the plane of the first two axes through `center`.
    pub fn circle(center: &[f64], radius: f64) -> Result<Self> {
        positive("radius", radius)?;
        finite_vec("center", center)?;
        if center.len() < 2 {
            return Err(Error::validation("center", "circle needs at least 2 ambient dimensions"));
        }
        Self::build(
            Shape::Circle {
                center: center.to_vec(),
                radius,
            },
            vec![ParamRange::periodic(0.0, std::f64::consts::TAU)],
            center.len(),
            DerivativeMode::Analytic,
        )
    }

    /// Line segment t ↦ p + t d for t in `range`.
    pub fn line(point: &[f64], direction: &[f64], range: ParamRange) -> Result<Self> {
        Self::affine(point, &[direction.to_vec()], vec![range], "direction")
    }

    /// Plane patch (s, t) ↦ p + s d₁ + t d₂.
    pub fn plane_patch(point: &[f64], directions: [&[f64]; 2], domain: [ParamRange; 2]) -> Result<Self> {
        Self::affine(
            point,
            &[directions[0].to_vec(), directions[1].to_vec()],
            domain.to_vec(),
            "directions",
        )
    }

    fn affine(point: &[f64], directions: &[Vec<f64>], domain: Vec<ParamRange>, field: &str) -> Result<Self> {
        finite_vec("point", point)?;
        for d in directions {
            if d.len() != point.len() {
                return Err(Error::validation(
                    field,
                    format!("has {} components, point has {}", d.len(), point.len()),
                ));
            }
            finite_vec(field, d)?;
        }
        let column_check = SurfaceJet {
            param_dim: directions.len(),
            ambient_dim: point.len(),
            position: point.to_vec(),
            jacobian: (0..point.len())
                .flat_map(|i| directions.iter().map(move |d| d[i]))
                .collect(),
            second: vec![],
            singular: false,
        };
        if point.len() > directions.len() {
            let sv = column_check.singular_values();
            if sv.last().copied().unwrap_or(0.0) <= SINGULAR_RATIO * sv[0].max(f64::MIN_POSITIVE) {
                return Err(Error::validation(field, "directions must be linearly independent"));
            }
        }
        Self::build(
            Shape::Affine {
                origin: point.to_vec(),
                directions: directions.to_vec(),
            },
            domain,
            point.len(),
            DerivativeMode::Analytic,
        )
    }

    /// Surface given by one expression per ambient component.
    pub fn expression(vars: &[String], components: &[String], domain: Vec<ParamRange>) -> Result<Self> {
        if vars.len() != domain.len() {
            return Err(Error::validation(
                "domain",
                format!("{} intervals for {} vars", domain.len(), vars.len()),
            ));
        }
        check_var_names(vars)?;
        let parsed = components
            .iter()
            .map(|c| parse_expression(c, vars))
            .collect::<Result<Vec<_>>>()?;
        Self::build(
            Shape::Expression { components: parsed },
            domain,
            components.len(),
            DerivativeMode::FiniteDifference {
                step: DEFAULT_DERIVATIVE_STEP,
            },
        )
    }

    /// Graph ξ ↦ (ξ, f(ξ)) of a scalar function.
    pub fn graph(vars: &[String], height: &str, domain: Vec<ParamRange>) -> Result<Self> {
        if vars.len() != domain.len() {
            return Err(Error::validation(
                "domain",
                format!("{} intervals for {} vars", domain.len(), vars.len()),
            ));
        }
        check_var_names(vars)?;
        let mut components: Vec<Expr> = (0..vars.len()).map(Expr::Var).collect();
        components.push(parse_expression(height, vars)?);
        Self::build(
            Shape::Expression { components },
            domain,
            vars.len() + 1,
            DerivativeMode::FiniteDifference {
                step: DEFAULT_DERIVATIVE_STEP,
            },
        )
    }

    /// Switch derivative evaluation. Expression surfaces only support finite differences.
    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Result<Self> {
        match mode {
            DerivativeMode::Analytic if !self.shape.has_analytic_derivatives() => {
                return Err(Error::validation(
                    "derivatives",
                    "expression-defined surfaces have no analytic derivatives",
                ))
            }
            DerivativeMode::FiniteDifference { step } if !(step > 0.0 && step.is_finite()) => {
                return Err(Error::validation("derivative_step", "must be positive"))
            }
            _ => {}
        }
        self.derivatives = mode;
        Ok(self)
    }

    pub fn param_dim(&self) -> usize {
        self.domain.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn domain(&self) -> &[ParamRange] {
        &self.domain
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.derivatives
    }

    /// Wrap periodic parameters, reject clamped ones outside their interval.
    pub fn normalize(&self, params: &[f64]) -> Result<Vec<f64>> {
        if params.len() != self.param_dim() {
            return Err(Error::validation(
                "params",
                format!("expected {} parameters, got {}", self.param_dim(), params.len()),
            ));
        }
        params
            .iter()
            .zip(&self.domain)
            .enumerate()
            .map(|(index, (&x, range))| {
                if !x.is_finite() {
                    return Err(Error::Evaluation(format!("parameter {index} is {x}")));
                }
                if !range.contains(x) {
                    return Err(Error::DomainViolation {
                        index,
                        value: x,
                        lo: range.lo,
                        hi: range.hi,
                    });
                }
                Ok(range.wrap(x))
            })
            .collect()
    }

    /// Wrap periodic parameters in place (clamped ones are left alone).
    pub fn wrap_in_place(&self, params: &mut [f64]) {
        for (x, range) in params.iter_mut().zip(&self.domain) {
            *x = range.wrap(*x);
        }
    }

    /// x(ξ).
    pub fn evaluate(&self, params: &[f64]) -> Result<Vec<f64>> {
        let p = self.normalize(params)?;
        self.shape.position(&p)
    }

    /// Position, jacobian and second partials, with the singularity flag set.
    pub fn jet(&self, params: &[f64]) -> Result<SurfaceJet> {
        let mut jet = self.jet_unflagged(params)?;
        jet.flag_singularity();
        Ok(jet)
    }

    /// Same as [`jet`](Self::jet) without the SVD-based rank check; the inner
    /// integration loop relies on metric factorization instead.
    pub(crate) fn jet_unflagged(&self, params: &[f64]) -> Result<SurfaceJet> {
        let p = self.normalize(params)?;
        match self.derivatives {
            DerivativeMode::Analytic => Ok(self.shape.analytic_jet(&p, self.param_dim(), self.ambient_dim)),
            DerivativeMode::FiniteDifference { step } => self.fd_jet(&p, step),
        }
    }

    /// Central-difference jet. Stencil points are evaluated without domain
    /// checks so points near a clamped boundary still get derivatives.
    fn fd_jet(&self, p: &[f64], h: f64) -> Result<SurfaceJet> {
        let n = self.param_dim();
        let big_n = self.ambient_dim;
        let mut jet = SurfaceJet::zeros(n, big_n);
        let f = |q: &[f64]| self.shape.position(q);
        let center = f(p)?;
        let shifted = |d: &[(usize, f64)]| {
            let mut q = p.to_vec();
            for &(a, s) in d {
                q[a] += s;
            }
            f(&q)
        };

        for a in 0..n {
            let plus = shifted(&[(a, h)])?;
            let minus = shifted(&[(a, -h)])?;
            for i in 0..big_n {
                jet.set_d(i, a, (plus[i] - minus[i]) / (2.0 * h));
            }
        }

        let h2 = SECOND_STEP_FACTOR * h;
        for a in 0..n {
            let plus = shifted(&[(a, h2)])?;
            let minus = shifted(&[(a, -h2)])?;
            for i in 0..big_n {
                jet.set_dd(i, a, a, (plus[i] - 2.0 * center[i] + minus[i]) / (h2 * h2));
            }
            for b in (a + 1)..n {
                let pp = shifted(&[(a, h2), (b, h2)])?;
                let pm = shifted(&[(a, h2), (b, -h2)])?;
                let mp = shifted(&[(a, -h2), (b, h2)])?;
                let mm = shifted(&[(a, -h2), (b, -h2)])?;
                for i in 0..big_n {
                    jet.set_dd(i, a, b, (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h2 * h2));
                }
            }
        }
        jet.position = center;
        Ok(jet)
    }

    /// Upper bound on the operator norm of the jacobian over the domain,
    /// i.e. a Lipschitz constant of ξ ↦ x(ξ) in the Euclidean parameter norm.
    /// Analytic for built-in shapes; for expressions estimated from a
    /// 33-per-axis sample of jacobian Frobenius norms with a 25 % margin.
    pub fn lipschitz_bound(&self) -> Result<f64> {
        if let Some(l) = self.shape.lipschitz_bound() {
            return Ok(l);
        }
        const PER_AXIS: usize = 33;
        let n = self.param_dim();
        let total = PER_AXIS.pow(n as u32);
        let mut worst: f64 = 0.0;
        for k in 0..total {
            let mut rem = k;
            let params: Vec<f64> = self
                .domain
                .iter()
                .map(|r| {
                    let idx = rem % PER_AXIS;
                    rem /= PER_AXIS;
                    r.lo + r.width() * idx as f64 / (PER_AXIS - 1) as f64
                })
                .collect();
            let p: Vec<f64> = params.iter().zip(&self.domain).map(|(&x, r)| r.wrap(x)).collect();
            let jet = self.fd_jet(&p, DEFAULT_DERIVATIVE_STEP)?;
            let frob = jet.jacobian.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(frob);
        }
        Ok(1.25 * worst)
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive, got {value}")))
    }
}

fn finite_vec(field: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::validation(field, "all components must be finite"))
    }
}

fn check_var_names(vars: &[String]) -> Result<()> {
    for (i, v) in vars.iter().enumerate() {
        let ok = v.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ok {
            return Err(Error::validation(format!("vars[{i}]"), format!("`{v}` is not an identifier")));
        }
        if vars[..i].contains(v) {
            return Err(Error::validation(format!("vars[{i}]"), format!("duplicate variable `{v}`")));
        }
    }
    Ok(())
}
