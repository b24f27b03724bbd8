use super::expr::Expr;
use super::SurfaceJet;
use crate::error::Result;

#[derive(Debug, Clone)]
pub(crate) enum Shape {
    /// Also used for spheres (equal axes).
    Ellipsoid { center: [f64; 3], axes: [f64; 3] },
    Torus { center: [f64; 3], major: f64, minor: f64 },
    Circle { center: Vec<f64>, radius: f64 },
    /// Lines and plane patches.
    Affine { origin: Vec<f64>, directions: Vec<Vec<f64>> },
    Expression { components: Vec<Expr> },
}

impl Shape {
    pub(crate) fn has_analytic_derivatives(&self) -> bool {
        !matches!(self, Shape::Expression { .. })
    }

    pub(crate) fn position(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(match self {
            Shape::Ellipsoid { center, axes } => {
                let (st, ct) = p[0].sin_cos();
                let (sp, cp) = p[1].sin_cos();
                vec![
                    center[0] + axes[0] * st * cp,
                    center[1] + axes[1] * st * sp,
                    center[2] + axes[2] * ct,
                ]
            }
            Shape::Torus { center, major, minor } => {
                let (su, cu) = p[0].sin_cos();
                let (sv, cv) = p[1].sin_cos();
                let w = major + minor * cu;
                vec![center[0] + w * cv, center[1] + w * sv, center[2] + minor * su]
            }
            Shape::Circle { center, radius } => {
                let (s, c) = p[0].sin_cos();
                let mut x = center.clone();
                x[0] += radius * c;
                x[1] += radius * s;
                x
            }
            Shape::Affine { origin, directions } => {
                let mut x = origin.clone();
                for (d, &t) in directions.iter().zip(p) {
                    for (xi, di) in x.iter_mut().zip(d) {
                        *xi += t * di;
                    }
                }
                x
            }
            Shape::Expression { components } => {
                components.iter().map(|e| e.eval(p)).collect::<Result<Vec<_>>>()?
            }
        })
    }

    /// Analytic jet; must not be called for expression shapes.
    pub(crate) fn analytic_jet(&self, p: &[f64], n: usize, big_n: usize) -> SurfaceJet {
        let mut jet = SurfaceJet::zeros(n, big_n);
        match self {
            Shape::Ellipsoid { center, axes } => {
                let (st, ct) = p[0].sin_cos();
                let (sp, cp) = p[1].sin_cos();
                let unit = [st * cp, st * sp, ct];
                let d_theta = [ct * cp, ct * sp, -st];
                let d_phi = [-st * sp, st * cp, 0.0];
                let dd_tt = [-st * cp, -st * sp, -ct];
                let dd_tp = [-ct * sp, ct * cp, 0.0];
                let dd_pp = [-st * cp, -st * sp, 0.0];
                for i in 0..3 {
                    let a = axes[i];
                    jet.position[i] = center[i] + a * unit[i];
                    jet.set_d(i, 0, a * d_theta[i]);
                    jet.set_d(i, 1, a * d_phi[i]);
                    jet.set_dd(i, 0, 0, a * dd_tt[i]);
                    jet.set_dd(i, 0, 1, a * dd_tp[i]);
                    jet.set_dd(i, 1, 1, a * dd_pp[i]);
                }
            }
            Shape::Torus { center, major, minor } => {
                let (su, cu) = p[0].sin_cos();
                let (sv, cv) = p[1].sin_cos();
                let (r, w) = (*minor, major + minor * cu);
                jet.position = vec![center[0] + w * cv, center[1] + w * sv, center[2] + r * su];
                let d_u = [-r * su * cv, -r * su * sv, r * cu];
                let d_v = [-w * sv, w * cv, 0.0];
                let dd_uu = [-r * cu * cv, -r * cu * sv, -r * su];
                let dd_uv = [r * su * sv, -r * su * cv, 0.0];
                let dd_vv = [-w * cv, -w * sv, 0.0];
                for i in 0..3 {
                    jet.set_d(i, 0, d_u[i]);
                    jet.set_d(i, 1, d_v[i]);
                    jet.set_dd(i, 0, 0, dd_uu[i]);
                    jet.set_dd(i, 0, 1, dd_uv[i]);
                    jet.set_dd(i, 1, 1, dd_vv[i]);
                }
            }
            Shape::Circle { center, radius } => {
                let (s, c) = p[0].sin_cos();
                jet.position.clone_from(center);
                jet.position[0] += radius * c;
                jet.position[1] += radius * s;
                jet.set_d(0, 0, -radius * s);
                jet.set_d(1, 0, radius * c);
                jet.set_dd(0, 0, 0, -radius * c);
                jet.set_dd(1, 0, 0, -radius * s);
            }
            Shape::Affine { origin, directions } => {
                jet.position.clone_from(origin);
                for (a, (d, &t)) in directions.iter().zip(p).enumerate() {
                    for i in 0..big_n {
                        jet.position[i] += t * d[i];
                        jet.set_d(i, a, d[i]);
                    }
                }
            }
            Shape::Expression { .. } => unreachable!("expression shapes use finite differences"),
        }
        jet
    }

    pub(crate) fn lipschitz_bound(&self) -> Option<f64> {
        match self {
            Shape::Ellipsoid { axes, .. } => {
                let largest = axes.iter().copied().fold(0.0, f64::max);
                if axes.iter().all(|&a| a == largest) {
                    // orthogonal columns of lengths ρ and ρ sinθ
                    Some(largest)
                } else {
                    Some(std::f64::consts::SQRT_2 * largest)
                }
            }
            Shape::Torus { major, minor, .. } => Some(major + minor),
            Shape::Circle { radius, .. } => Some(*radius),
            Shape::Affine { directions, .. } => {
                let frob: f64 = directions.iter().flatten().map(|v| v * v).sum();
                Some(frob.sqrt())
            }
            Shape::Expression { .. } => None,
        }
    }
}
