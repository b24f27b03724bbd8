use super::ProductState;
use crate::error::{Error, Result};

/// Autonomous second-order system written in first-order form.
pub trait VectorField {
    /// (q̇, v̇) at (q, v).
    fn derivative(&self, q: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;

    /// Reduce periodic coordinates after a completed step.
    fn wrap(&self, _q: &mut [f64]) {}
}

fn axpy(base: &[f64], scale: f64, dir: &[f64]) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + scale * d).collect()
}

/// One classical fourth-order Runge–Kutta step of size `dt`.
pub fn step_rk4<F: VectorField + ?Sized>(state: &ProductState, field: &F, dt: f64) -> Result<ProductState> {
    step_rk4_from(state, field, dt, None)
}

/// As [`step_rk4`], optionally reusing an already computed derivative at
/// `state` for the first stage.
pub fn step_rk4_from<F: VectorField + ?Sized>(
    state: &ProductState,
    field: &F,
    dt: f64,
    first_stage: Option<(Vec<f64>, Vec<f64>)>,
) -> Result<ProductState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("step size must be positive, got {dt}")));
    }
    let (q, v) = (&state.q, &state.v);
    let half = 0.5 * dt;

    let (k1q, k1v) = match first_stage {
        Some(k1) => k1,
        None => field.derivative(q, v)?,
    };
    let (k2q, k2v) = field.derivative(&axpy(q, half, &k1q), &axpy(v, half, &k1v))?;
    let (k3q, k3v) = field.derivative(&axpy(q, half, &k2q), &axpy(v, half, &k2v))?;
    let (k4q, k4v) = field.derivative(&axpy(q, dt, &k3q), &axpy(v, dt, &k3v))?;

    let combine = |x: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    };
    let mut q_next = combine(q, &k1q, &k2q, &k3q, &k4q);
    let v_next = combine(v, &k1v, &k2v, &k3v, &k4v);
    if q_next.iter().chain(&v_next).any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { q: q_next, v: v_next });
    }
    field.wrap(&mut q_next);
    Ok(ProductState {
        q: q_next,
        v: v_next,
        time: state.time + dt,
    })
}

/// Largest coordinate change per sub-step accepted by [`advance`].
pub const MAX_COORDINATE_STEP: f64 = 0.02;
/// Upper limit on the number of sub-steps in one [`advance`] call.
pub const MAX_SUBSTEPS: u32 = 1 << 12;

/// Advance by `dt` using `2^k` equal RK4 sub-steps, with `k` the smallest
/// value for which `max |v_i| · dt / 2^k <= MAX_COORDINATE_STEP`.
///
/// Away from coordinate singularities this is a single `step_rk4`. Close to
/// a degenerate point of a chart (a sphere pole, say) the coordinate
/// velocities blow up even though the physical motion is slow, and a single
/// step would be wildly inaccurate. The sub-step count depends only on the
/// state, so runs stay deterministic.
pub fn advance<F: VectorField + ?Sized>(state: &ProductState, field: &F, dt: f64) -> Result<ProductState> {
    advance_from(state, field, dt, None)
}

/// As [`advance`], optionally reusing the derivative at `state`.
pub fn advance_from<F: VectorField + ?Sized>(
    state: &ProductState,
    field: &F,
    dt: f64,
    first_stage: Option<(Vec<f64>, Vec<f64>)>,
) -> Result<ProductState> {
    let speed = state.v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut n = 1u32;
    while n < MAX_SUBSTEPS && speed * dt / f64::from(n) > MAX_COORDINATE_STEP {
        n *= 2;
    }
    if n == 1 {
        return step_rk4_from(state, field, dt, first_stage);
    }
    let h = dt / f64::from(n);
    let mut s = step_rk4_from(state, field, h, first_stage)?;
    for _ in 1..n {
        s = step_rk4(&s, field, h)?;
    }
    s.time = state.time + dt;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ẍ = −ω² x − c ẋ in one dimension.
    struct Oscillator {
        omega2: f64,
        c: f64,
    }

    impl VectorField for Oscillator {
        fn derivative(&self, q: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
            Ok((v.to_vec(), vec![-self.omega2 * q[0] - self.c * v[0]]))
        }
    }

    struct Zero;

    impl VectorField for Zero {
        fn derivative(&self, q: &[f64], _v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
            Ok((vec![0.0; q.len()], vec![0.0; q.len()]))
        }
    }

    struct Blowup;

    impl VectorField for Blowup {
        fn derivative(&self, q: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
            Ok((v.to_vec(), q.iter().map(|x| x * 1e300).collect()))
        }
    }

    #[test]
    fn zero_field_only_advances_time() {
        let s = ProductState::new(vec![0.3, -1.0], vec![0.0, 0.0]);
        let next = step_rk4(&s, &Zero, 0.25).unwrap();
        assert_eq!(next.q, s.q);
        assert_eq!(next.v, s.v);
        assert_eq!(next.time, 0.25);
    }

    #[test]
    fn rejects_bad_step_and_non_finite_results() {
        let s = ProductState::new(vec![1.0], vec![0.0]);
        assert!(step_rk4(&s, &Zero, 0.0).is_err());
        assert!(matches!(step_rk4(&s, &Blowup, 1e10), Err(Error::NonFiniteState { .. })));
    }

    /// Analytic underdamped solution with x(0) = 1, ẋ(0) = 0.
    fn exact(omega2: f64, c: f64, t: f64) -> f64 {
        let wd = (omega2 - 0.25 * c * c).sqrt();
        (-0.5 * c * t).exp() * ((wd * t).cos() + 0.5 * c / wd * (wd * t).sin())
    }

    fn global_error(dt: f64) -> f64 {
        let osc = Oscillator { omega2: 4.0, c: 0.5 };
        let steps = (5.0 / dt).round() as usize;
        let mut s = ProductState::new(vec![1.0], vec![0.0]);
        for _ in 0..steps {
            s = step_rk4(&s, &osc, dt).unwrap();
        }
        (s.q[0] - exact(4.0, 0.5, steps as f64 * dt)).abs()
    }

    #[test]
    fn fourth_order_convergence() {
        let ratio = global_error(0.05) / global_error(0.025);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn local_error_is_fifth_order() {
        let osc = Oscillator { omega2: 4.0, c: 0.5 };
        let s = ProductState::new(vec![1.0], vec![0.0]);
        let gap = |dt: f64| {
            let one = step_rk4(&s, &osc, dt).unwrap();
            let two = step_rk4(&step_rk4(&s, &osc, dt / 2.0).unwrap(), &osc, dt / 2.0).unwrap();
            (one.q[0] - two.q[0]).abs()
        };
        let ratio = gap(0.1) / gap(0.05);
        // 2^5 = 32
        assert!((24.0..40.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn advance_subdivides_only_fast_states() {
        let f = Oscillator { omega2: 4.0, c: 0.5 };
        let slow = ProductState::new(vec![1.0], vec![0.5]);
        assert_eq!(advance(&slow, &f, 1e-3).unwrap(), step_rk4(&slow, &f, 1e-3).unwrap());

        // 100 · 1e-3 / 8 < 0.02 <= 100 · 1e-3 / 4
        let fast = ProductState::new(vec![1.0], vec![100.0]);
        let mut manual = fast.clone();
        for _ in 0..8 {
            manual = step_rk4(&manual, &f, 1e-3 / 8.0).unwrap();
        }
        let got = advance(&fast, &f, 1e-3).unwrap();
        assert_eq!((got.q, got.v), (manual.q, manual.v));
        assert_eq!(got.time, 1e-3);
    }
}
