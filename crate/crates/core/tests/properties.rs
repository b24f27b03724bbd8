use std::f64::consts::PI;

use proptest::prelude::*;

use surfdist::dynamics::{step_rk4, DissipationModel, MechanicalSystem, Potential, ProductState};
use surfdist::geometry::{invert_metric, MetricBundle};
use surfdist::manifold::{parse_surface_spec, print_surface_spec, DerivativeMode};
use surfdist::oracle::{grid_min_distance, GridSpec};
use surfdist::{ParamRange, SurfaceDefinition};

fn shapes() -> Vec<SurfaceDefinition> {
    vec![
        SurfaceDefinition::sphere([0.3, 0.0, -1.0], 1.5).unwrap(),
        SurfaceDefinition::ellipsoid([0.0; 3], [2.0, 1.0, 0.5]).unwrap(),
        SurfaceDefinition::torus([0.0; 3], 3.0, 0.5).unwrap(),
        SurfaceDefinition::circle(&[1.0, -1.0], 2.0).unwrap(),
        SurfaceDefinition::line(&[0.0, 0.0, 2.0], &[1.0, -1.0, 0.5], ParamRange::clamped(-10.0, 10.0)).unwrap(),
        SurfaceDefinition::plane_patch(
            &[0.0, 0.0, 1.0],
            [&[1.0, 0.0, 0.5], &[0.2, 1.0, 0.0]],
            [ParamRange::clamped(-3.0, 3.0); 2],
        )
        .unwrap(),
    ]
}

/// A shape index plus a point of its domain away from clamped ends, built
/// from unit-interval draws.
fn shape_and_point() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (0..6usize, prop::collection::vec(0.0..1.0f64, 2)).prop_map(|(k, u)| {
        let s = &shapes()[k];
        let p = s
            .domain()
            .iter()
            .zip(u)
            .map(|(r, u)| {
                let m = if r.periodic { 0.0 } else { 0.1 * r.width() };
                r.lo + m + u * (r.width() - 2.0 * m)
            })
            .collect();
        (k, p)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn second_partials_are_symmetric((k, p) in shape_and_point()) {
        let s = &shapes()[k];
        for mode in [DerivativeMode::Analytic, DerivativeMode::FiniteDifference { step: 1e-5 }] {
            let jet = s.clone().with_derivative_mode(mode).unwrap().jet(&p).unwrap();
            for i in 0..jet.ambient_dim {
                for a in 0..jet.param_dim {
                    for b in 0..jet.param_dim {
                        prop_assert_eq!(jet.dd(i, a, b), jet.dd(i, b, a));
                    }
                }
            }
        }
    }

    #[test]
    fn finite_differences_track_analytic_jets((k, p) in shape_and_point()) {
        let s = &shapes()[k];
        let exact = s.jet(&p).unwrap();
        let fd = s.clone().with_derivative_mode(DerivativeMode::FiniteDifference { step: 1e-5 }).unwrap().jet(&p).unwrap();
        let rel = |a: &[f64], b: &[f64]| {
            let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
            diff / scale
        };
        prop_assert!(rel(&exact.position, &fd.position) < 1e-14);
        prop_assert!(rel(&exact.jacobian, &fd.jacobian) < 1e-6);
        prop_assert!(rel(&exact.second, &fd.second) < 1e-4);
    }

    #[test]
    fn periodic_wrap_is_canonical(x in -1e3..1e3f64) {
        let r = ParamRange::periodic(0.0, 2.0 * PI);
        let w = r.wrap(x);
        prop_assert!((0.0..2.0 * PI).contains(&w));
        prop_assert_eq!(r.wrap(w), w);
        let turns = ((x - w) / (2.0 * PI)).round();
        prop_assert!((x - w - turns * 2.0 * PI).abs() < 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn metric_is_spd_and_inverts((k, p) in shape_and_point(), mass in 0.1..10.0f64) {
        let jet = shapes()[k].jet(&p).unwrap();
        let b = MetricBundle::from_jet(&jet, mass).unwrap();
        let n = b.dim;
        for i in 0..n {
            prop_assert!(b.g(i, i) > 0.0);
            for j in 0..n {
                prop_assert_eq!(b.g(i, j), b.g(j, i));
                let prod: f64 = (0..n).map(|m| b.g(i, m) * b.g_inv(m, j)).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod - id).abs() < 1e-10, "g·g⁻¹[{i}][{j}] = {prod}");
            }
        }
        if n == 2 {
            prop_assert!(b.g(0, 0) * b.g(1, 1) - b.g(0, 1) * b.g(1, 0) > 0.0);
        }
    }

    #[test]
    fn christoffel_symbols_symmetric_in_lower_indices((k, p) in shape_and_point()) {
        let jet = shapes()[k].jet(&p).unwrap();
        let b = MetricBundle::from_jet(&jet, 1.3).unwrap();
        let n = b.dim;
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(b.gamma(a, i, j), b.gamma(a, j, i));
                    prop_assert_eq!(b.gamma_first(i, a, j), b.gamma_first(j, a, i));
                }
            }
        }
    }

    #[test]
    fn small_spd_matrices_invert(a in 0.1..5.0f64, c in 0.1..5.0f64, t in -0.9..0.9f64) {
        let b = t * (a * c).sqrt();
        let m = [a, b, b, c];
        let inv = invert_metric(&m, 2).unwrap();
        let det = a * c - b * b;
        let expected = [c / det, -b / det, -b / det, a / det];
        for (x, y) in inv.iter().zip(expected) {
            prop_assert!((x - y).abs() < 1e-10 * y.abs().max(1.0));
        }
    }

    #[test]
    fn surface_spec_round_trips(
        cx in -5.0..5.0f64, cy in -5.0..5.0f64, r in 0.1..10.0f64, mass in 0.1..5.0f64,
    ) {
        let text = format!(
            r#"{{"kind": "sphere", "center": [{cx}, {cy}, 0.0], "radius": {r}, "mass": {mass}}}"#
        );
        let (spec, def) = parse_surface_spec(&text).unwrap();
        let (again, def2) = parse_surface_spec(&print_surface_spec(&spec)).unwrap();
        prop_assert_eq!(&spec, &again);
        let probe = [1.0, 2.0];
        prop_assert_eq!(def.evaluate(&probe).unwrap(), def2.evaluate(&probe).unwrap());
    }

    #[test]
    fn equilibria_are_exact_fixed_points(t in -5.0..5.0f64, gap in 0.5..3.0f64) {
        let l1 = SurfaceDefinition::line(&[0.0; 3], &[1.0, 0.0, 0.0], ParamRange::clamped(-10.0, 10.0)).unwrap();
        let l2 = SurfaceDefinition::line(&[0.0, 0.0, gap], &[1.0, 0.0, 0.0], ParamRange::clamped(-10.0, 10.0)).unwrap();
        let sys = MechanicalSystem::new(&l1, &l2, [1.0, 1.0], Potential::default(), DissipationModel::new(1.0).unwrap()).unwrap();
        let s0 = ProductState::at_rest(vec![t, t]);
        let s1 = step_rk4(&s0, &sys, 1e-3).unwrap();
        prop_assert_eq!(s0.q, s1.q);
        prop_assert_eq!(s0.v, s1.v);
    }

    #[test]
    fn energy_never_increases_along_short_runs(
        u in prop::collection::vec(0.05..0.95f64, 4), damping in 0.2..3.0f64,
    ) {
        let a = SurfaceDefinition::torus([0.0; 3], 3.0, 0.5).unwrap();
        let b = SurfaceDefinition::sphere([6.0, 1.0, 0.0], 1.0).unwrap();
        let sys = MechanicalSystem::new(&a, &b, [1.0, 2.0], Potential::default(), DissipationModel::new(damping).unwrap()).unwrap();
        let q = vec![2.0 * PI * u[0], 2.0 * PI * u[1], PI * u[2], 2.0 * PI * u[3]];
        let mut s = ProductState::at_rest(q);
        let mut e = sys.energy(&s).unwrap();
        for _ in 0..500 {
            s = step_rk4(&s, &sys, 1e-3).unwrap();
            let next = sys.energy(&s).unwrap();
            prop_assert!(next <= e + 1e-9);
            e = next;
        }
    }

    #[test]
    fn grid_refinement_never_increases(
        na in 2..12usize, nb in 2..12usize, cx in 3.0..6.0f64, cy in -2.0..2.0f64,
    ) {
        let a = SurfaceDefinition::ellipsoid([0.0; 3], [2.0, 1.0, 1.0]).unwrap();
        let b = SurfaceDefinition::sphere([cx, cy, 0.5], 1.0).unwrap();
        let grid = GridSpec::new(vec![na, nb], vec![nb, na]);
        let coarse = grid_min_distance(&a, &b, &grid).unwrap();
        let fine = grid_min_distance(&a, &b, &grid.refined(a.domain(), b.domain())).unwrap();
        prop_assert!(fine.distance <= coarse.distance);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expressions_agree_with_std(x in -3.0..3.0f64, y in 0.1..4.0f64) {
        let vars = ["x".to_string(), "y".to_string()];
        let cases: [(&str, f64); 5] = [
            ("sin(x)^2 + cos(x)^2", 1.0),
            ("x * y - y / 2", x * y - y / 2.0),
            ("exp(log(y))", y),
            ("-x^2 + sqrt(abs(x))", -(x * x) + x.abs().sqrt()),
            ("2^-y * tan(x/4) + pi", 2f64.powf(-y) * (x / 4.0).tan() + PI),
        ];
        for (text, expected) in cases {
            let e = surfdist::manifold::parse_expression(text, &vars).unwrap();
            let got = e.eval(&[x, y]).unwrap();
            prop_assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0), "{text}: {got} vs {expected}");
        }
    }
}
