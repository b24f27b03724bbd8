//! JSON surface specification documents.
//!
//! ```json
//! {"kind": "sphere", "center": [0, 0, 0], "radius": 1}
//! {"kind": "expression", "vars": ["u", "v"],
//!  "components": ["u", "v", "u*u+v*v"], "domain": [[-2, 2], [-2, 2]]}
//! {"kind": "torus", "major_radius": 3, "minor_radius": 0.5}
//! {"kind": "line", "point": [0, 0, 2], "direction": [1, 0, 0], "domain": [[-10, 10]]}
//! ```
//!
//! Domain entries are `[lo, hi]` (clamped) or `[lo, hi, "periodic"]`.
//! Unknown fields are rejected, as are fields that do not apply to the kind.

use serde::{Deserialize, Serialize};

use super::{DerivativeMode, ParamRange, SurfaceDefinition, DEFAULT_DERIVATIVE_STEP};
use crate::error::{Error, Result};

/// Default interval for line and plane-patch parameters.
pub const DEFAULT_AFFINE_EXTENT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    Sphere,
    Ellipsoid,
    Torus,
    PlanePatch,
    Line,
    Circle,
    Graph,
    Expression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeChoice {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainEntry {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DomainRepr {
    Plain(f64, f64),
    Flagged(f64, f64, String),
}

impl Serialize for DomainEntry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.periodic {
            DomainRepr::Flagged(self.lo, self.hi, "periodic".into()).serialize(s)
        } else {
            DomainRepr::Plain(self.lo, self.hi).serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for DomainEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match DomainRepr::deserialize(d)? {
            DomainRepr::Plain(lo, hi) => Ok(DomainEntry {
                lo,
                hi,
                periodic: false,
            }),
            DomainRepr::Flagged(lo, hi, flag) => match flag.as_str() {
                "periodic" => Ok(DomainEntry { lo, hi, periodic: true }),
                "clamped" => Ok(DomainEntry { lo, hi, periodic: false }),
                other => Err(serde::de::Error::custom(format!(
                    "unknown domain flag `{other}` (expected \"periodic\" or \"clamped\")"
                ))),
            },
        }
    }
}

impl From<&DomainEntry> for ParamRange {
    fn from(e: &DomainEntry) -> Self {
        ParamRange {
            lo: e.lo,
            hi: e.hi,
            periodic: e.periodic,
        }
    }
}

/// One surface as written in a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub major_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minor_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vars: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<DomainEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivatives: Option<DerivativeChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative_step: Option<f64>,
}

/// Parse and validate a single surface document.
pub fn parse_surface_spec(text: &str) -> Result<(SurfaceSpec, SurfaceDefinition)> {
    let spec: SurfaceSpec = serde_json::from_str(text).map_err(json_error)?;
    let def = spec.to_definition("")?;
    Ok((spec, def))
}

/// Canonical JSON text of a spec; parses back to an equal spec.
pub fn print_surface_spec(spec: &SurfaceSpec) -> String {
    serde_json::to_string_pretty(spec).expect("surface specs always serialize")
}

pub(crate) fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    }
}

impl SurfaceSpec {
    /// Mass attached to the surface's material point (default 1).
    pub fn mass(&self) -> f64 {
        self.mass.unwrap_or(1.0)
    }

    /// Build the surface. `prefix` names the enclosing document field in errors.
    pub fn to_definition(&self, prefix: &str) -> Result<SurfaceDefinition> {
        let field = |name: &str| {
            if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            }
        };
        let prefixed = |e: Error| match e {
            Error::Validation { field: f, message } => Error::Validation {
                field: field(&f),
                message,
            },
            other => other,
        };
        self.check_fields(&field)?;

        if let Some(m) = self.mass {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::validation(field("mass"), format!("must be positive, got {m}")));
            }
        }

        let three = |name: &str, v: &Option<Vec<f64>>, default: [f64; 3]| -> Result<[f64; 3]> {
            match v {
                None => Ok(default),
                Some(v) => <[f64; 3]>::try_from(v.as_slice()).map_err(|_| {
                    Error::validation(field(name), format!("expected 3 components, got {}", v.len()))
                }),
            }
        };
        let required = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::validation(field(name), format!("required for kind {:?}", self.kind)))
        };

        let def = match self.kind {
            SurfaceKind::Sphere => {
                SurfaceDefinition::sphere(three("center", &self.center, [0.0; 3])?, required("radius", self.radius)?)
            }
            SurfaceKind::Ellipsoid => {
                let axes = self
                    .semi_axes
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("semi_axes"), "required for kind ellipsoid"))?;
                SurfaceDefinition::ellipsoid(
                    three("center", &self.center, [0.0; 3])?,
                    three("semi_axes", &Some(axes.clone()), [0.0; 3])?,
                )
            }
            SurfaceKind::Torus => SurfaceDefinition::torus(
                three("center", &self.center, [0.0; 3])?,
                required("major_radius", self.major_radius)?,
                required("minor_radius", self.minor_radius)?,
            ),
            SurfaceKind::Circle => {
                let center = self.center.clone().unwrap_or_else(|| vec![0.0; 3]);
                SurfaceDefinition::circle(&center, required("radius", self.radius)?)
            }
            SurfaceKind::Line => {
                let point = self
                    .point
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("point"), "required for kind line"))?;
                let dir = self
                    .direction
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("direction"), "required for kind line"))?;
                let domain = self.domain_or_default(1, &field)?;
                SurfaceDefinition::line(point, dir, domain[0])
            }
            SurfaceKind::PlanePatch => {
                let point = self
                    .point
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("point"), "required for kind plane-patch"))?;
                let dirs = self
                    .directions
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("directions"), "required for kind plane-patch"))?;
                if dirs.len() != 2 {
                    return Err(Error::validation(
                        field("directions"),
                        format!("expected 2 direction vectors, got {}", dirs.len()),
                    ));
                }
                let domain = self.domain_or_default(2, &field)?;
                SurfaceDefinition::plane_patch(point, [&dirs[0], &dirs[1]], [domain[0], domain[1]])
            }
            SurfaceKind::Graph | SurfaceKind::Expression => {
                let vars = self
                    .vars
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("vars"), "required"))?;
                let comps = self
                    .components
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("components"), "required"))?;
                let domain: Vec<ParamRange> = self
                    .domain
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("domain"), "required"))?
                    .iter()
                    .map(ParamRange::from)
                    .collect();
                if self.kind == SurfaceKind::Graph {
                    if comps.len() != 1 {
                        return Err(Error::validation(
                            field("components"),
                            "graph takes exactly one height expression",
                        ));
                    }
                    SurfaceDefinition::graph(vars, &comps[0], domain)
                } else {
                    SurfaceDefinition::expression(vars, comps, domain)
                }
            }
        }
        .map_err(prefixed)?;

        if let Some(n) = self.ambient_dim {
            if n != def.ambient_dim() {
                return Err(Error::validation(
                    field("ambient_dim"),
                    format!("declared {n}, but the surface has {} components", def.ambient_dim()),
                ));
            }
        }

        let fd_step = self.derivative_step.unwrap_or(DEFAULT_DERIVATIVE_STEP);
        let mode = match (self.derivatives, def.derivative_mode()) {
            (Some(DerivativeChoice::Analytic), _) => DerivativeMode::Analytic,
            (Some(DerivativeChoice::FiniteDifference), _) | (None, DerivativeMode::FiniteDifference { .. }) => {
                DerivativeMode::FiniteDifference { step: fd_step }
            }
            (None, DerivativeMode::Analytic) => DerivativeMode::Analytic,
        };
        def.with_derivative_mode(mode).map_err(prefixed)
    }

    fn domain_or_default(&self, n: usize, field: &dyn Fn(&str) -> String) -> Result<Vec<ParamRange>> {
        match &self.domain {
            None => Ok(vec![ParamRange::clamped(-DEFAULT_AFFINE_EXTENT, DEFAULT_AFFINE_EXTENT); n]),
            Some(d) if d.len() == n => Ok(d.iter().map(ParamRange::from).collect()),
            Some(d) => Err(Error::validation(
                field("domain"),
                format!("expected {n} intervals, got {}", d.len()),
            )),
        }
    }

    /// Reject fields that do not belong to the kind.
    fn check_fields(&self, field: &dyn Fn(&str) -> String) -> Result<()> {
        use SurfaceKind::*;
        let present: [(&str, bool); 10] = [
            ("center", self.center.is_some()),
            ("radius", self.radius.is_some()),
            ("semi_axes", self.semi_axes.is_some()),
            ("major_radius", self.major_radius.is_some()),
            ("minor_radius", self.minor_radius.is_some()),
            ("point", self.point.is_some()),
            ("direction", self.direction.is_some()),
            ("directions", self.directions.is_some()),
            ("vars", self.vars.is_some()),
            ("components", self.components.is_some()),
        ];
        let allowed: &[&str] = match self.kind {
            Sphere | Circle => &["center", "radius"],
            Ellipsoid => &["center", "semi_axes"],
            Torus => &["center", "major_radius", "minor_radius"],
            Line => &["point", "direction"],
            PlanePatch => &["point", "directions"],
            Graph | Expression => &["vars", "components"],
        };
        for (name, is_set) in present {
            if is_set && !allowed.contains(&name) {
                return Err(Error::validation(
                    field(name),
                    format!("not applicable to kind {:?}", self.kind),
                ));
            }
        }
        if self.domain.is_some() && !matches!(self.kind, Line | PlanePatch | Graph | Expression) {
            return Err(Error::validation(
                field("domain"),
                format!("kind {:?} has a fixed parameter domain", self.kind),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_document() {
        let (_, def) = parse_surface_spec(r#"{"kind": "sphere", "center": [0,0,0], "radius": 1}"#).unwrap();
        assert_eq!((def.param_dim(), def.ambient_dim()), (2, 3));
        assert!(def.domain()[1].periodic && !def.domain()[0].periodic);
    }

    #[test]
    fn paraboloid_expression_document() {
        let text = r#"{"kind": "expression", "vars": ["u","v"],
                       "components": ["u","v","u*u+v*v"], "domain": [[-2,2],[-2,2]]}"#;
        let (_, def) = parse_surface_spec(text).unwrap();
        assert_eq!((def.param_dim(), def.ambient_dim()), (2, 3));
        assert_eq!(def.evaluate(&[1.0, -1.0]).unwrap(), vec![1.0, -1.0, 2.0]);
    }

    #[test]
    fn negative_radius_is_a_validation_error() {
        let err = parse_surface_spec(r#"{"kind": "sphere", "radius": -1}"#).unwrap_err();
        assert!(matches!(&err, Error::Validation { field, .. } if field == "radius"), "{err}");
    }

    #[test]
    fn malformed_documents_report_location() {
        let err = parse_surface_spec("{\"kind\": \"sphere\",\n \"radus\": 1}").unwrap_err();
        match err {
            Error::Parse { location, message } => {
                assert!(location.starts_with("line 2"), "{location}");
                assert!(message.contains("radus"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(parse_surface_spec("{\"kind\": \"cube\"}"), Err(Error::Parse { .. })));
        assert!(matches!(parse_surface_spec("{\"kind\": "), Err(Error::Parse { .. })));
    }

    #[test]
    fn dimension_and_kind_consistency() {
        let e = parse_surface_spec(r#"{"kind": "expression", "ambient_dim": 4, "vars": ["u"],
                 "components": ["u", "0", "1"], "domain": [[0, 1]]}"#)
        .unwrap_err();
        assert!(matches!(&e, Error::Validation { field, .. } if field == "ambient_dim"), "{e}");
        let e = parse_surface_spec(r#"{"kind": "sphere", "radius": 1, "major_radius": 2}"#).unwrap_err();
        assert!(matches!(&e, Error::Validation { field, .. } if field == "major_radius"), "{e}");
        let e = parse_surface_spec(r#"{"kind": "torus", "major_radius": 2}"#).unwrap_err();
        assert!(matches!(&e, Error::Validation { field, .. } if field == "minor_radius"), "{e}");
        let e = parse_surface_spec(r#"{"kind": "sphere", "center": [0, 0], "radius": 1}"#).unwrap_err();
        assert!(matches!(&e, Error::Validation { field, .. } if field == "center"), "{e}");
        let e = parse_surface_spec(r#"{"kind": "graph", "vars": ["u"], "components": ["u", "u"],
                 "domain": [[0, 1]]}"#)
        .unwrap_err();
        assert!(matches!(e, Error::Validation { .. }));
    }

    #[test]
    fn periodic_flag_and_derivative_options() {
        let text = r#"{"kind": "expression", "vars": ["u"], "components": ["cos(u)", "sin(u)"],
                       "domain": [[0, 6.283185307179586, "periodic"]], "derivative_step": 1e-4}"#;
        let (spec, def) = parse_surface_spec(text).unwrap();
        assert!(def.domain()[0].periodic);
        assert_eq!(def.derivative_mode(), DerivativeMode::FiniteDifference { step: 1e-4 });
        let (back, _) = parse_surface_spec(&print_surface_spec(&spec)).unwrap();
        assert_eq!(back, spec);

        let (_, sphere_fd) =
            parse_surface_spec(r#"{"kind": "sphere", "radius": 2, "derivatives": "finite-difference"}"#).unwrap();
        assert!(matches!(sphere_fd.derivative_mode(), DerivativeMode::FiniteDifference { .. }));
        assert!(parse_surface_spec(r#"{"kind": "expression", "vars": ["u"], "components": ["u", "0"],
                 "domain": [[0, 1]], "derivatives": "analytic"}"#)
        .is_err());
        assert!(parse_surface_spec(r#"{"kind": "line", "point": [0,0], "direction": [1,0],
                 "domain": [[0, 1, "sideways"]]}"#)
        .is_err());
    }
}
