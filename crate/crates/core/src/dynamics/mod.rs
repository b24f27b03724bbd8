//! Damped natural mechanical system on the product of two surfaces.
//!
//! The configuration q = (ξ, η) stacks the parameters of both surfaces and
//! v = q̇ the parameter velocities. Kinetic energy comes from the block
//! product metric, the potential depends only on the separation r = |y − x|,
//! and a Rayleigh form removes energy at the rate 2R. The first-order field
//!
//! ```text
//! q̇ = v
//! v̇ = γ(q, v) − ∇U(q) − F_R(q, v),    γ^i = −Γ^i_jk v^j v^k,   F_R^i = g^ik ∂R/∂v^k
//! ```
//!
//! is integrated by [`step_rk4`].

mod integrator;

pub use integrator::{advance, advance_from, step_rk4, step_rk4_from, VectorField};

use crate::error::{Error, Result};
use crate::geometry::{MetricBundle, ProductMetric};
use crate::manifold::{SurfaceDefinition, SurfaceJet};

/// Below this separation only the harmonic potential has a finite force.
pub const MIN_SEPARATION: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// U = ½ k r²
    Harmonic,
    /// U = k r^p, p ≥ 1
    Power { exponent: f64 },
    /// U ≡ 0; the motion is geodesic (or damped geodesic).
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    pub stiffness: f64,
}

impl Default for Potential {
    fn default() -> Self {
        Potential {
            kind: PotentialKind::Harmonic,
            stiffness: 1.0,
        }
    }
}

impl Potential {
    pub fn harmonic(stiffness: f64) -> Result<Self> {
        check_stiffness(stiffness)?;
        Ok(Potential {
            kind: PotentialKind::Harmonic,
            stiffness,
        })
    }

    pub fn power(stiffness: f64, exponent: f64) -> Result<Self> {
        check_stiffness(stiffness)?;
        if !(exponent >= 1.0 && exponent.is_finite()) {
            return Err(Error::validation("potential.exponent", format!("must be ≥ 1, got {exponent}")));
        }
        Ok(Potential {
            kind: PotentialKind::Power { exponent },
            stiffness,
        })
    }

    pub fn free() -> Self {
        Potential {
            kind: PotentialKind::Free,
            stiffness: 0.0,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Harmonic => 0.5 * self.stiffness * r * r,
            PotentialKind::Power { exponent } => self.stiffness * r.powf(exponent),
            PotentialKind::Free => 0.0,
        }
    }

    /// dU/dr.
    pub fn derivative(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Harmonic => self.stiffness * r,
            PotentialKind::Power { exponent } => self.stiffness * exponent * r.powf(exponent - 1.0),
            PotentialKind::Free => 0.0,
        }
    }

    /// U′(r)/r, the factor multiplying the separation vector in the force.
    /// Exactly k for the harmonic kind, with no division by r.
    pub fn radial_factor(&self, r: f64) -> Result<f64> {
        match self.kind {
            PotentialKind::Harmonic => Ok(self.stiffness),
            PotentialKind::Free => Ok(0.0),
            PotentialKind::Power { exponent } => {
                if r < MIN_SEPARATION {
                    return Err(Error::DegenerateSeparation { r });
                }
                Ok(self.stiffness * exponent * r.powf(exponent - 2.0))
            }
        }
    }
}

fn check_stiffness(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::validation("potential.stiffness", format!("must be positive, got {k}")))
    }
}

/// Rayleigh dissipation with R_ij = c g_ij, so that F_R^i = c v^i.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationModel {
    pub damping: f64,
}

impl DissipationModel {
    /// `damping` may be zero (conservative motion) but not negative.
    pub fn new(damping: f64) -> Result<Self> {
        if damping >= 0.0 && damping.is_finite() {
            Ok(DissipationModel { damping })
        } else {
            Err(Error::validation("damping", format!("must be non-negative, got {damping}")))
        }
    }

    /// R_ij for one block.
    pub fn rayleigh_matrix(&self, block: &MetricBundle) -> Vec<f64> {
        block.metric.iter().map(|g| self.damping * g).collect()
    }

    /// R = ½ R_ij v^i v^j over both blocks.
    pub fn rayleigh(&self, bundle: &ProductMetric, v: &[f64]) -> f64 {
        let n = bundle.block1.dim;
        quadratic(&self.rayleigh_matrix(&bundle.block1), &v[..n])
            + quadratic(&self.rayleigh_matrix(&bundle.block2), &v[n..])
    }
}

fn quadratic(matrix: &[f64], v: &[f64]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += matrix[i * n + j] * v[i] * v[j];
        }
    }
    0.5 * s
}

/// γ^i = −Γ^i_jk v^j v^k, blockwise.
pub fn geodesic_term(bundle: &ProductMetric, v: &[f64]) -> Vec<f64> {
    let n = bundle.block1.dim;
    let mut out = block_geodesic(&bundle.block1, &v[..n]);
    out.extend(block_geodesic(&bundle.block2, &v[n..]));
    out
}

fn block_geodesic(block: &MetricBundle, v: &[f64]) -> Vec<f64> {
    let n = block.dim;
    (0..n)
        .map(|a| {
            let mut s = 0.0;
            for b in 0..n {
                for c in 0..n {
                    s += block.gamma(a, b, c) * v[b] * v[c];
                }
            }
            -s
        })
        .collect()
}

/// F_R^i = g^ik ∂R/∂v^k with ∂R/∂v^k = R_kj v^j.
pub fn rayleigh_force(bundle: &ProductMetric, dissipation: &DissipationModel, v: &[f64]) -> Vec<f64> {
    let n = bundle.block1.dim;
    let mut out = block_rayleigh_force(&bundle.block1, dissipation, &v[..n]);
    out.extend(block_rayleigh_force(&bundle.block2, dissipation, &v[n..]));
    out
}

fn block_rayleigh_force(block: &MetricBundle, dissipation: &DissipationModel, v: &[f64]) -> Vec<f64> {
    let n = block.dim;
    let r = dissipation.rayleigh_matrix(block);
    let dr_dv: Vec<f64> = (0..n).map(|k| (0..n).map(|j| r[k * n + j] * v[j]).sum()).collect();
    block.raise(&dr_dv)
}

/// A point of the product phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub time: f64,
}

impl ProductState {
    pub fn at_rest(q: Vec<f64>) -> Self {
        let v = vec![0.0; q.len()];
        ProductState { q, v, time: 0.0 }
    }

    pub fn new(q: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(q.len(), v.len(), "q and v must have equal length");
        ProductState { q, v, time: 0.0 }
    }
}

/// Everything the field needs at one configuration.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub jets: [SurfaceJet; 2],
    pub metric: ProductMetric,
    /// y − x.
    pub separation: Vec<f64>,
    pub distance: f64,
}

/// Two surfaces, their point masses, the interaction potential and the damping.
#[derive(Debug, Clone, Copy)]
pub struct MechanicalSystem<'a> {
    pub first: &'a SurfaceDefinition,
    pub second: &'a SurfaceDefinition,
    pub masses: [f64; 2],
    pub potential: Potential,
    pub dissipation: DissipationModel,
}

impl<'a> MechanicalSystem<'a> {
    pub fn new(
        first: &'a SurfaceDefinition,
        second: &'a SurfaceDefinition,
        masses: [f64; 2],
        potential: Potential,
        dissipation: DissipationModel,
    ) -> Result<Self> {
        if first.ambient_dim() != second.ambient_dim() {
            return Err(Error::validation(
                "ambient_dim",
                format!(
                    "surfaces live in R^{} and R^{}",
                    first.ambient_dim(),
                    second.ambient_dim()
                ),
            ));
        }
        for (i, m) in masses.iter().enumerate() {
            if !(*m > 0.0 && m.is_finite()) {
                return Err(Error::validation(format!("masses[{i}]"), format!("must be positive, got {m}")));
            }
        }
        Ok(MechanicalSystem {
            first,
            second,
            masses,
            potential,
            dissipation,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.param_dim() + self.second.param_dim()
    }

    pub fn split<'q>(&self, q: &'q [f64]) -> (&'q [f64], &'q [f64]) {
        q.split_at(self.first.param_dim())
    }

    fn check_len(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::validation(
                "q",
                format!("expected {} stacked parameters, got {}", self.dim(), q.len()),
            ));
        }
        Ok(())
    }

    /// r⃗ = y(η) − x(ξ) and r = |r⃗|.
    pub fn separation(&self, q: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_len(q)?;
        let (xi, eta) = self.split(q);
        let x = self.first.evaluate(xi)?;
        let y = self.second.evaluate(eta)?;
        let r: Vec<f64> = y.iter().zip(&x).map(|(b, a)| b - a).collect();
        let dist = norm(&r);
        Ok((r, dist))
    }

    /// Jets, product metric and separation at q.
    pub fn configure(&self, q: &[f64]) -> Result<Configuration> {
        self.check_len(q)?;
        let (xi, eta) = self.split(q);
        let jet1 = self.first.jet_unflagged(xi)?;
        let jet2 = self.second.jet_unflagged(eta)?;
        let metric = ProductMetric::from_jets(&jet1, self.masses[0], &jet2, self.masses[1]).map_err(|e| match e {
            Error::SingularMetric { side, row, pivot, .. } => Error::SingularMetric {
                side,
                row,
                pivot,
                state: Some(q.to_vec()),
            },
            other => other,
        })?;
        let separation: Vec<f64> = jet2.position.iter().zip(&jet1.position).map(|(b, a)| b - a).collect();
        let distance = norm(&separation);
        Ok(Configuration {
            jets: [jet1, jet2],
            metric,
            separation,
            distance,
        })
    }

    /// Covariant gradient (∂U/∂ξ_a, ∂U/∂η_s) at a configuration.
    pub fn covector_at(&self, c: &Configuration) -> Result<Vec<f64>> {
        let [j1, j2] = &c.jets;
        self.pullback(j1, j2, &c.separation, c.distance)
    }

    /// Covariant gradient of U(|y(η) − x(ξ)|); independent of velocity.
    pub fn potential_covector(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_len(q)?;
        let (xi, eta) = self.split(q);
        let j1 = self.first.jet_unflagged(xi)?;
        let j2 = self.second.jet_unflagged(eta)?;
        let sep: Vec<f64> = j2.position.iter().zip(&j1.position).map(|(b, a)| b - a).collect();
        self.pullback(&j1, &j2, &sep, norm(&sep))
    }

    /// −(U′/r) r⃗·∂_a x on the first block, +(U′/r) r⃗·∂_s y on the second.
    fn pullback(&self, j1: &SurfaceJet, j2: &SurfaceJet, sep: &[f64], dist: f64) -> Result<Vec<f64>> {
        let factor = self.potential.radial_factor(dist)?;
        let mut grad: Vec<f64> = (0..j1.param_dim).map(|a| -factor * j1.tangent_dot(a, sep)).collect();
        grad.extend((0..j2.param_dim).map(|s| factor * j2.tangent_dot(s, sep)));
        Ok(grad)
    }

    /// v̇ = γ − g⁻¹(dU + ∂R/∂v), one block at a time. Same terms as
    /// [`geodesic_term`] and [`rayleigh_force`], fused to skip temporaries.
    pub fn field_at(&self, c: &Configuration, v: &[f64]) -> Result<Vec<f64>> {
        let covector = self.covector_at(c)?;
        let n = c.metric.block1.dim;
        let mut out = Vec::with_capacity(v.len());
        let mut lowered = Vec::with_capacity(v.len());
        for (block, range) in [(&c.metric.block1, 0..n), (&c.metric.block2, n..v.len())] {
            let (vb, db) = (&v[range.clone()], &covector[range]);
            let m = block.dim;
            let r = self.dissipation.rayleigh_matrix(block);
            lowered.clear();
            lowered.extend((0..m).map(|k| db[k] + (0..m).map(|j| r[k * m + j] * vb[j]).sum::<f64>()));
            for a in 0..m {
                let mut acc = 0.0;
                for b in 0..m {
                    for e in 0..m {
                        acc -= block.gamma(a, b, e) * vb[b] * vb[e];
                    }
                    acc -= block.g_inv(a, b) * lowered[b];
                }
                out.push(acc);
            }
        }
        Ok(out)
    }

    /// (q̇, v̇) = (v, γ − ∇U − F_R).
    pub fn vector_field(&self, state: &ProductState) -> Result<(Vec<f64>, Vec<f64>)> {
        let c = self.configure(&state.q)?;
        Ok((state.v.clone(), self.field_at(&c, &state.v)?))
    }

    pub fn potential_energy(&self, q: &[f64]) -> Result<f64> {
        Ok(self.potential.value(self.separation(q)?.1))
    }

    pub fn kinetic_energy(&self, state: &ProductState) -> Result<f64> {
        let c = self.configure(&state.q)?;
        Ok(0.5 * c.metric.inner(&state.v, &state.v))
    }

    /// E = ½⟨v, v⟩ + U(r).
    pub fn energy(&self, state: &ProductState) -> Result<f64> {
        let c = self.configure(&state.q)?;
        Ok(self.energy_at(&c, &state.v))
    }

    pub fn energy_at(&self, c: &Configuration, v: &[f64]) -> f64 {
        0.5 * c.metric.inner(v, v) + self.potential.value(c.distance)
    }

    /// L = E − U₀, where U₀ is the potential at the candidate equilibrium.
    pub fn lyapunov(&self, state: &ProductState, u0: f64) -> Result<f64> {
        Ok(self.energy(state)? - u0)
    }

    /// R(q, v).
    pub fn rayleigh(&self, state: &ProductState) -> Result<f64> {
        let c = self.configure(&state.q)?;
        Ok(self.dissipation.rayleigh(&c.metric, &state.v))
    }

    /// ⟨v, v⟩^½ in the product metric.
    pub fn velocity_norm_at(&self, c: &Configuration, v: &[f64]) -> f64 {
        c.metric.inner(v, v).max(0.0).sqrt()
    }

    /// Metric norm of ∇U (equivalently the dual norm of dU).
    pub fn gradient_norm_at(&self, c: &Configuration) -> Result<f64> {
        let d = self.covector_at(c)?;
        Ok(c.metric.inner_dual(&d, &d).max(0.0).sqrt())
    }
}

impl VectorField for MechanicalSystem<'_> {
    fn derivative(&self, q: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let c = self.configure(q)?;
        Ok((v.to_vec(), self.field_at(&c, v)?))
    }

    fn wrap(&self, q: &mut [f64]) {
        let n = self.first.param_dim();
        let (xi, eta) = q.split_at_mut(n);
        self.first.wrap_in_place(xi);
        self.second.wrap_in_place(eta);
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ParamRange;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn spheres() -> (SurfaceDefinition, SurfaceDefinition) {
        (
            SurfaceDefinition::sphere([0.0; 3], 1.0).unwrap(),
            SurfaceDefinition::sphere([4.0, 0.0, 0.0], 1.0).unwrap(),
        )
    }

    fn system<'a>(a: &'a SurfaceDefinition, b: &'a SurfaceDefinition, c: f64) -> MechanicalSystem<'a> {
        MechanicalSystem::new(a, b, [1.0, 1.0], Potential::default(), DissipationModel::new(c).unwrap()).unwrap()
    }

    // facing points (1,0,0) and (3,0,0)
    const FACING: [f64; 4] = [FRAC_PI_2, 0.0, FRAC_PI_2, PI];

    #[test]
    fn separation_of_facing_spheres() {
        let (a, b) = spheres();
        let sys = system(&a, &b, 1.0);
        let (r, d) = sys.separation(&FACING).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-15 && r[1].abs() < 1e-15 && r[2].abs() < 1e-15);
        assert!((d - 2.0).abs() < 1e-15);

        let swapped = system(&b, &a, 1.0);
        let (r2, d2) = swapped.separation(&[FRAC_PI_2, PI, FRAC_PI_2, 0.0]).unwrap();
        assert!(r.iter().zip(&r2).all(|(u, w)| *u == -w));
        assert_eq!(d, d2);
    }

    #[test]
    fn touching_configuration_is_finite_for_harmonic() {
        let a = SurfaceDefinition::sphere([0.0; 3], 1.0).unwrap();
        let b = SurfaceDefinition::sphere([2.0, 0.0, 0.0], 1.0).unwrap();
        let sys = system(&a, &b, 1.0);
        let q = [FRAC_PI_2, 0.0, FRAC_PI_2, PI];
        assert!(sys.separation(&q).unwrap().1 < 1e-15);
        assert!(sys.potential_covector(&q).unwrap().iter().all(|g| g.is_finite()));
        let mut power = sys;
        power.potential = Potential::power(1.0, 1.5).unwrap();
        assert!(matches!(power.potential_covector(&q), Err(Error::DegenerateSeparation { .. })));
    }

    #[test]
    fn covector_at_facing_points_vanishes_and_scales() {
        let (a, b) = spheres();
        let sys = system(&a, &b, 1.0);
        let g = sys.potential_covector(&FACING).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-15), "{g:?}");

        let q = [1.0, 0.5, 2.0, 3.0];
        let g1 = sys.potential_covector(&q).unwrap();
        let mut stiff = sys;
        stiff.potential = Potential::harmonic(2.0).unwrap();
        let g2 = stiff.potential_covector(&q).unwrap();
        assert!(g1.iter().zip(&g2).all(|(x, y)| 2.0 * x == *y));
    }

    #[test]
    fn geodesic_term_properties() {
        let (a, b) = spheres();
        let sys = system(&a, &b, 1.0);
        let c = sys.configure(&[1.0, 0.5, 2.0, 3.0]).unwrap();
        assert!(geodesic_term(&c.metric, &[0.0; 4]).iter().all(|&x| x == 0.0));
        let v = [0.3, -0.7, 0.2, 0.9];
        let v2: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        let (g1, g2) = (geodesic_term(&c.metric, &v), geodesic_term(&c.metric, &v2));
        assert!(g1.iter().zip(&g2).all(|(x, y)| (4.0 * x - y).abs() < 1e-14));

        let l1 = SurfaceDefinition::line(&[0.0; 3], &[1.0, 0.0, 0.0], ParamRange::clamped(-5.0, 5.0)).unwrap();
        let l2 = SurfaceDefinition::line(&[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0], ParamRange::clamped(-5.0, 5.0))
            .unwrap();
        let flat = system(&l1, &l2, 1.0);
        let c = flat.configure(&[1.0, 2.0]).unwrap();
        assert_eq!(geodesic_term(&c.metric, &[3.0, -1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn rayleigh_force_is_isotropic() {
        let (a, b) = spheres();
        let sys = system(&a, &b, 0.5);
        let c = sys.configure(&[1.0, 0.5, 2.0, 3.0]).unwrap();
        let f = rayleigh_force(&c.metric, &sys.dissipation, &[1.0, 0.0, 0.0, 0.0]);
        assert!((f[0] - 0.5).abs() < 1e-15 && f[1..].iter().all(|x| x.abs() < 1e-15));
        assert!(rayleigh_force(&c.metric, &sys.dissipation, &[0.0; 4]).iter().all(|&x| x == 0.0));
        // ⟨v, F_R⟩ = 2R
        let v = [0.4, -1.2, 0.3, 0.8];
        let f = rayleigh_force(&c.metric, &sys.dissipation, &v);
        let lhs = c.metric.inner(&v, &f);
        let rhs = 2.0 * sys.dissipation.rayleigh(&c.metric, &v);
        assert!((lhs - rhs).abs() < 1e-14 * rhs.abs().max(1.0));
    }

    #[test]
    fn equilibrium_has_zero_field() {
        let l1 = SurfaceDefinition::line(&[0.0; 3], &[1.0, 0.0, 0.0], ParamRange::clamped(-5.0, 5.0)).unwrap();
        let l2 = SurfaceDefinition::line(&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], ParamRange::clamped(-5.0, 5.0))
            .unwrap();
        let sys = system(&l1, &l2, 1.0);
        let (dq, dv) = sys.vector_field(&ProductState::at_rest(vec![2.0, 2.0])).unwrap();
        assert!(dq.iter().chain(&dv).all(|&x| x == 0.0));
    }

    #[test]
    fn energy_and_lyapunov() {
        let (a, b) = spheres();
        let sys = system(&a, &b, 1.0);
        let rest = ProductState::at_rest(FACING.to_vec());
        assert!((sys.energy(&rest).unwrap() - 2.0).abs() < 1e-14);
        assert!(sys.lyapunov(&rest, sys.potential_energy(&FACING).unwrap()).unwrap().abs() < 1e-15);
        let moving = ProductState::new(FACING.to_vec(), vec![0.1, 0.0, 0.0, -0.2]);
        assert!(sys.lyapunov(&moving, 2.0).unwrap() > 0.0);

        let heavy = MechanicalSystem::new(&a, &b, [2.0, 2.0], Potential::default(), sys.dissipation).unwrap();
        let state = ProductState::new(vec![1.0, 0.5, 2.0, 3.0], vec![0.3, 0.1, -0.2, 0.5]);
        let (k1, k2) = (sys.kinetic_energy(&state).unwrap(), heavy.kinetic_energy(&state).unwrap());
        assert!((2.0 * k1 - k2).abs() < 1e-15);
        assert_eq!(
            sys.potential_energy(&state.q).unwrap(),
            heavy.potential_energy(&state.q).unwrap()
        );
    }

    #[test]
    fn mismatched_ambient_dimensions_are_rejected() {
        let a = SurfaceDefinition::sphere([0.0; 3], 1.0).unwrap();
        let b = SurfaceDefinition::circle(&[0.0, 0.0], 1.0).unwrap();
        assert!(MechanicalSystem::new(&a, &b, [1.0, 1.0], Potential::default(), DissipationModel { damping: 1.0 })
            .is_err());
    }
}
