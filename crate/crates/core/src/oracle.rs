//! Brute-force reference computations: an exhaustive grid search for the
//! minimum distance and a central-difference check of the potential gradient.

use rayon::prelude::*;

use crate::dynamics::MechanicalSystem;
use crate::error::{Error, Result};
use crate::manifold::{ParamRange, SurfaceDefinition};

pub const DEFAULT_CAP: u64 = 100_000_000;

/// Below this gradient magnitude the FD check reports absolute error.
pub const RELATIVE_SWITCH: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub counts_a: Vec<usize>,
    pub counts_b: Vec<usize>,
    /// Maximum number of pair evaluations.
    pub cap: u64,
}

impl GridSpec {
    pub fn new(counts_a: Vec<usize>, counts_b: Vec<usize>) -> Self {
        GridSpec {
            counts_a,
            counts_b,
            cap: DEFAULT_CAP,
        }
    }

    pub fn uniform(per_axis: usize, dims: [usize; 2]) -> Self {
        GridSpec::new(vec![per_axis; dims[0]], vec![per_axis; dims[1]])
    }

    pub fn pairs(&self) -> u128 {
        let count = |c: &[usize]| c.iter().map(|&n| n as u128).product::<u128>();
        count(&self.counts_a) * count(&self.counts_b)
    }

    /// A grid containing every sample of this one: periodic axes double,
    /// clamped axes go from n to 2n − 1 (halving the spacing).
    pub fn refined(&self, domain_a: &[ParamRange], domain_b: &[ParamRange]) -> GridSpec {
        let refine = |counts: &[usize], domain: &[ParamRange]| {
            counts
                .iter()
                .zip(domain)
                .map(|(&n, r)| if r.periodic || n == 1 { 2 * n } else { 2 * n - 1 })
                .collect()
        };
        GridSpec {
            counts_a: refine(&self.counts_a, domain_a),
            counts_b: refine(&self.counts_b, domain_b),
            cap: self.cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub distance: f64,
    pub params_a: Vec<f64>,
    pub params_b: Vec<f64>,
    /// Upper bound on how far `distance` can exceed the true minimum.
    pub resolution_bound: f64,
    pub pairs: u128,
}

/// Sample positions along one axis. Periodic axes use n points spaced a full
/// period apart (the endpoint coincides with the start); clamped axes use an
/// inclusive linspace. A single sample sits at the midpoint of a clamped axis
/// and at the start of a periodic one.
pub fn axis_samples(range: &ParamRange, n: usize) -> Vec<f64> {
    let w = range.width();
    if range.periodic {
        (0..n).map(|i| range.lo + w * i as f64 / n as f64).collect()
    } else if n == 1 {
        vec![range.lo + 0.5 * w]
    } else {
        (0..n)
            .map(|i| if i + 1 == n { range.hi } else { range.lo + w * i as f64 / (n - 1) as f64 })
            .collect()
    }
}

fn spacing(range: &ParamRange, n: usize) -> f64 {
    match (range.periodic, n) {
        (true, _) => range.width() / n as f64,
        (false, 1) => range.width(),
        (false, _) => range.width() / (n - 1) as f64,
    }
}

fn cell_diagonal(domain: &[ParamRange], counts: &[usize]) -> f64 {
    domain
        .iter()
        .zip(counts)
        .map(|(r, &n)| spacing(r, n).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Grid parameters and the corresponding surface points.
type Samples = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn sample_surface(surface: &SurfaceDefinition, counts: &[usize]) -> Result<Samples> {
    let axes: Vec<Vec<f64>> = surface
        .domain()
        .iter()
        .zip(counts)
        .map(|(r, &n)| axis_samples(r, n))
        .collect();
    let total: usize = counts.iter().product();
    let mut params = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut p = vec![0.0; axes.len()];
        for (k, axis) in axes.iter().enumerate().rev() {
            p[k] = axis[rest % axis.len()];
            rest /= axis.len();
        }
        params.push(p);
    }
    let points = params.par_iter().map(|p| surface.evaluate(p)).collect::<Result<Vec<_>>>()?;
    Ok((params, points))
}

fn check_counts(surface: &SurfaceDefinition, counts: &[usize], field: &str) -> Result<()> {
    if counts.len() != surface.param_dim() {
        return Err(Error::validation(
            field,
            format!("expected {} sample counts, got {}", surface.param_dim(), counts.len()),
        ));
    }
    if counts.contains(&0) {
        return Err(Error::validation(field, "sample counts must be positive"));
    }
    Ok(())
}

/// Exhaustive minimum of |y(η_j) − x(ξ_i)| over the product grid.
pub fn grid_min_distance(first: &SurfaceDefinition, second: &SurfaceDefinition, grid: &GridSpec) -> Result<GridResult> {
    check_counts(first, &grid.counts_a, "grid.counts_a")?;
    check_counts(second, &grid.counts_b, "grid.counts_b")?;
    if first.ambient_dim() != second.ambient_dim() {
        return Err(Error::validation(
            "surface_b.ambient_dim",
            format!("{} differs from surface_a ({})", second.ambient_dim(), first.ambient_dim()),
        ));
    }
    let pairs = grid.pairs();
    if pairs > grid.cap as u128 {
        return Err(Error::CapExceeded { pairs, cap: grid.cap });
    }

    let (params_a, points_a) = sample_surface(first, &grid.counts_a)?;
    let (params_b, points_b) = sample_surface(second, &grid.counts_b)?;

    // (squared distance, i, j); ties resolve to the smallest (i, j)
    let (d2, i, j) = points_a
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut best = (f64::INFINITY, i, 0);
            for (j, y) in points_b.iter().enumerate() {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum();
                if d2 < best.0 {
                    best = (d2, i, j);
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, usize::MAX, usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) { b } else { a },
        );

    let bound = first.lipschitz_bound()? * cell_diagonal(first.domain(), &grid.counts_a)
        + second.lipschitz_bound()? * cell_diagonal(second.domain(), &grid.counts_b);
    Ok(GridResult {
        distance: d2.sqrt(),
        params_a: params_a[i].clone(),
        params_b: params_b[j].clone(),
        resolution_bound: bound,
        pairs,
    })
}

/// Worst discrepancy between the potential covector and central differences
/// of q ↦ U(|y(η) − x(ξ)|) with step `h`. Relative to the largest analytic
/// component, or absolute when that component is below [`RELATIVE_SWITCH`].
pub fn fd_gradient_check(system: &MechanicalSystem, q: &[f64], h: f64) -> Result<f64> {
    let analytic = system.potential_covector(q)?;
    let mut numeric = Vec::with_capacity(q.len());
    let mut probe = q.to_vec();
    for k in 0..q.len() {
        probe[k] = q[k] + h;
        let up = system.potential_energy(&probe)?;
        probe[k] = q[k] - h;
        let down = system.potential_energy(&probe)?;
        probe[k] = q[k];
        numeric.push((up - down) / (2.0 * h));
    }
    let worst = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = analytic.iter().map(|a| a.abs()).fold(0.0, f64::max);
    Ok(if scale >= RELATIVE_SWITCH { worst / scale } else { worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DissipationModel, Potential};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn spheres() -> (SurfaceDefinition, SurfaceDefinition) {
        (
            SurfaceDefinition::sphere([0.0; 3], 1.0).unwrap(),
            SurfaceDefinition::sphere([4.0, 0.0, 0.0], 1.0).unwrap(),
        )
    }

    #[test]
    fn concentric_circles() {
        let a = SurfaceDefinition::circle(&[0.0, 0.0], 1.0).unwrap();
        let b = SurfaceDefinition::circle(&[0.0, 0.0], 3.0).unwrap();
        let r = grid_min_distance(&a, &b, &GridSpec::new(vec![1000], vec![1000])).unwrap();
        assert!((r.distance - 2.0).abs() < 1e-4, "{}", r.distance);
        let expected = 2.0 * PI * (1.0 + 3.0) / 1000.0;
        assert!((r.resolution_bound - expected).abs() < 1e-12);
    }

    #[test]
    fn sphere_pair_200() {
        let (a, b) = spheres();
        // 200^4 pairs is above the default cap, so raise it explicitly
        let grid = GridSpec {
            cap: 2_000_000_000,
            ..GridSpec::uniform(200, [2, 2])
        };
        let r = grid_min_distance(&a, &b, &grid).unwrap();
        assert!((r.distance - 2.0).abs() < 2e-3, "{}", r.distance);
        assert!(r.distance >= 2.0 - 1e-12);
        assert!(r.distance - 2.0 <= r.resolution_bound);
        assert_eq!(r.pairs, 200u128.pow(4));
    }

    #[test]
    fn one_point_grids_are_a_single_evaluation() {
        let (a, b) = spheres();
        let r = grid_min_distance(&a, &b, &GridSpec::uniform(1, [2, 2])).unwrap();
        // clamped θ takes its midpoint, periodic φ its start
        assert_eq!(r.params_a, vec![FRAC_PI_2, 0.0]);
        let x = a.evaluate(&r.params_a).unwrap();
        let y = b.evaluate(&r.params_b).unwrap();
        let d = x.iter().zip(&y).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt();
        assert_eq!(r.distance, d);
        assert_eq!(r.distance, 4.0);
    }

    #[test]
    fn cap_is_enforced() {
        let (a, b) = spheres();
        match grid_min_distance(&a, &b, &GridSpec::uniform(100_000, [2, 2])) {
            Err(Error::CapExceeded { pairs, cap }) => {
                assert_eq!(pairs, 10u128.pow(20));
                assert_eq!(cap, DEFAULT_CAP);
            }
            other => panic!("{other:?}"),
        }
        assert!(grid_min_distance(&a, &b, &GridSpec::new(vec![3], vec![3, 3])).is_err());
        assert!(grid_min_distance(&a, &b, &GridSpec::new(vec![3, 0], vec![3, 3])).is_err());
    }

    #[test]
    fn refinement_nests_and_never_increases() {
        let a = SurfaceDefinition::ellipsoid([0.0; 3], [2.0, 1.0, 1.0]).unwrap();
        let b = SurfaceDefinition::sphere([6.0, 0.5, 0.3], 1.0).unwrap();
        let mut grid = GridSpec::uniform(5, [2, 2]);
        let mut last = f64::INFINITY;
        for _ in 0..4 {
            let r = grid_min_distance(&a, &b, &grid).unwrap();
            assert!(r.distance <= last);
            last = r.distance;
            grid = grid.refined(a.domain(), b.domain());
        }
        let clamped = ParamRange::clamped(0.0, 1.0);
        let coarse = axis_samples(&clamped, 5);
        let fine = axis_samples(&clamped, 9);
        assert!(coarse.iter().all(|c| fine.contains(c)));
        let periodic = ParamRange::periodic(0.0, 2.0 * PI);
        let coarse = axis_samples(&periodic, 6);
        let fine = axis_samples(&periodic, 12);
        assert!(coarse.iter().all(|c| fine.iter().any(|f| (f - c).abs() < 1e-15)));
    }

    #[test]
    fn gradient_check_cases() {
        let (a, b) = spheres();
        let sys = MechanicalSystem::new(&a, &b, [1.0, 1.0], Potential::default(), DissipationModel::new(1.0).unwrap())
            .unwrap();
        let e = fd_gradient_check(&sys, &[1.1, 0.3, 2.0, 2.5], 1e-6).unwrap();
        assert!(e < 1e-6, "{e}");

        // at the equilibrium every component vanishes: absolute comparison
        let e = fd_gradient_check(&sys, &[FRAC_PI_2, 0.0, FRAC_PI_2, PI], 1e-6).unwrap();
        assert!(e < 1e-10, "{e}");

        let l1 = SurfaceDefinition::line(&[0.0; 3], &[1.0, 0.0, 0.0], ParamRange::clamped(-10.0, 10.0)).unwrap();
        let p = SurfaceDefinition::plane_patch(
            &[0.0, 0.0, 2.0],
            [&[1.0, 1.0, 0.0], &[0.0, 1.0, 0.5]],
            [ParamRange::clamped(-10.0, 10.0); 2],
        )
        .unwrap();
        let sys = MechanicalSystem::new(&l1, &p, [1.0, 1.0], Potential::default(), DissipationModel::new(1.0).unwrap())
            .unwrap();
        let e = fd_gradient_check(&sys, &[0.7, -1.3, 2.1], 1e-3).unwrap();
        assert!(e < 1e-10, "{e}");
    }
}
