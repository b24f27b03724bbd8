//! Induced Riemannian data of a surface and the block product metric.
//!
//! Storage conventions (all row-major, `n` = parameter dimension):
//!
//! * `metric`, `inverse`: `[a][b]`
//! * `partials`: `[c][a][b]` = ∂_c g_ab
//! * `christoffel_first`: `[b][a][c]` = Γ_{b,ac} = ½(∂_b g_ac + ∂_c g_ab − ∂_a g_bc).
//!   The first storage index is the one written before the comma; the
//!   expression is symmetric in (b, c) and equals m (∂_a x · ∂²_bc x).
//! * `christoffel_second`: `[a][b][c]` = Γ^a_bc = g^{ad} Γ_{b,dc}

use crate::error::{Error, Result, Side};
use crate::manifold::{SurfaceDefinition, SurfaceJet, SINGULAR_RATIO};

#[inline]
fn at2(n: usize, a: usize, b: usize) -> usize {
    a * n + b
}

#[inline]
fn at3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

/// g_ab = m Σ_I ∂_a x^I ∂_b x^I.
pub fn induced_metric(jet: &SurfaceJet, mass: f64) -> Vec<f64> {
    let n = jet.param_dim;
    let mut g = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let dot: f64 = (0..jet.ambient_dim).map(|i| jet.d(i, a) * jet.d(i, b)).sum();
            g[at2(n, a, b)] = mass * dot;
            g[at2(n, b, a)] = mass * dot;
        }
    }
    g
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky
/// factor. A pivot that is non-positive, non-finite, or below
/// `SINGULAR_RATIO²` times the largest diagonal entry is reported as
/// [`Error::SingularMetric`]; the relative floor matches the jacobian rank
/// test, since the metric is a scaled Gram matrix of the jacobian.
pub fn invert_metric(metric: &[f64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(metric.len(), n * n, "metric must be n×n");
    let scale = (0..n).map(|i| metric[at2(n, i, i)].abs()).fold(0.0, f64::max);
    let floor = SINGULAR_RATIO * SINGULAR_RATIO * scale;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut pivot = metric[at2(n, j, j)];
        for k in 0..j {
            pivot -= l[at2(n, j, k)] * l[at2(n, j, k)];
        }
        if !(pivot > floor) || !pivot.is_finite() {
            return Err(Error::SingularMetric {
                side: None,
                row: j,
                pivot,
                state: None,
            });
        }
        let d = pivot.sqrt();
        l[at2(n, j, j)] = d;
        for i in (j + 1)..n {
            let mut s = metric[at2(n, i, j)];
            for k in 0..j {
                s -= l[at2(n, i, k)] * l[at2(n, j, k)];
            }
            l[at2(n, i, j)] = s / d;
        }
    }

    // Solve L Lᵀ x = e_col for each column.
    let mut inv = vec![0.0; n * n];
    let mut y = vec![0.0; n];
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[at2(n, i, k)] * y[k];
            }
            y[i] = s / l[at2(n, i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[at2(n, k, i)] * inv[at2(n, k, col)];
            }
            inv[at2(n, i, col)] = s / l[at2(n, i, i)];
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let s = 0.5 * (inv[at2(n, a, b)] + inv[at2(n, b, a)]);
            inv[at2(n, a, b)] = s;
            inv[at2(n, b, a)] = s;
        }
    }
    Ok(inv)
}

/// ∂_c g_ab = m (∂²_ca x · ∂_b x + ∂_a x · ∂²_cb x), straight from the jet.
pub fn metric_partials_from_jet(jet: &SurfaceJet, mass: f64) -> Vec<f64> {
    let n = jet.param_dim;
    let big_n = jet.ambient_dim;
    let mut out = vec![0.0; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in a..n {
                let first: f64 = (0..big_n).map(|i| jet.dd(i, c, a) * jet.d(i, b)).sum();
                let second: f64 = (0..big_n).map(|i| jet.dd(i, c, b) * jet.d(i, a)).sum();
                let v = mass * (first + second);
                out[at3(n, c, a, b)] = v;
                out[at3(n, c, b, a)] = v;
            }
        }
    }
    out
}

pub fn metric_partials(surface: &SurfaceDefinition, params: &[f64], mass: f64) -> Result<Vec<f64>> {
    Ok(metric_partials_from_jet(&surface.jet(params)?, mass))
}

/// Γ_{b,ac} = ½(∂_b g_ac + ∂_c g_ab − ∂_a g_bc), stored at `[b][a][c]`.
pub fn christoffel_first(partials: &[f64], n: usize) -> Vec<f64> {
    let dg = |c: usize, a: usize, b: usize| partials[at3(n, c, a, b)];
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in b..n {
                let v = 0.5 * ((dg(b, a, c) + dg(c, a, b)) - dg(a, b, c));
                out[at3(n, b, a, c)] = v;
                out[at3(n, c, a, b)] = v;
            }
        }
    }
    out
}

/// Γ^a_bc = g^{ad} Γ_{b,dc}.
pub fn christoffel_second(first: &[f64], inverse: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in b..n {
                let v: f64 = (0..n).map(|d| inverse[at2(n, a, d)] * first[at3(n, b, d, c)]).sum();
                out[at3(n, a, b, c)] = v;
                out[at3(n, a, c, b)] = v;
            }
        }
    }
    out
}

/// Metric data of one surface at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBundle {
    pub dim: usize,
    pub metric: Vec<f64>,
    pub inverse: Vec<f64>,
    pub partials: Vec<f64>,
    pub christoffel_first: Vec<f64>,
    pub christoffel_second: Vec<f64>,
}

impl MetricBundle {
    pub fn from_jet(jet: &SurfaceJet, mass: f64) -> Result<Self> {
        let n = jet.param_dim;
        let metric = induced_metric(jet, mass);
        let inverse = invert_metric(&metric, n)?;
        let partials = metric_partials_from_jet(jet, mass);
        let christoffel_first = christoffel_first(&partials, n);
        let christoffel_second = christoffel_second(&christoffel_first, &inverse, n);
        Ok(MetricBundle {
            dim: n,
            metric,
            inverse,
            partials,
            christoffel_first,
            christoffel_second,
        })
    }

    #[inline]
    pub fn g(&self, a: usize, b: usize) -> f64 {
        self.metric[at2(self.dim, a, b)]
    }

    #[inline]
    pub fn g_inv(&self, a: usize, b: usize) -> f64 {
        self.inverse[at2(self.dim, a, b)]
    }

    /// ∂_c g_ab.
    #[inline]
    pub fn dg(&self, c: usize, a: usize, b: usize) -> f64 {
        self.partials[at3(self.dim, c, a, b)]
    }

    /// Γ_{b,ac}.
    #[inline]
    pub fn gamma_first(&self, b: usize, a: usize, c: usize) -> f64 {
        self.christoffel_first[at3(self.dim, b, a, c)]
    }

    /// Γ^a_bc.
    #[inline]
    pub fn gamma(&self, a: usize, b: usize, c: usize) -> f64 {
        self.christoffel_second[at3(self.dim, a, b, c)]
    }

    /// g_ab u^a w^b.
    pub fn inner(&self, u: &[f64], w: &[f64]) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += self.g(a, b) * u[a] * w[b];
            }
        }
        s
    }

    /// g^ab α_a β_b for covectors.
    pub fn inner_dual(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += self.g_inv(a, b) * alpha[a] * beta[b];
            }
        }
        s
    }

    /// g^ab α_b.
    pub fn raise(&self, alpha: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n).map(|a| (0..n).map(|b| self.g_inv(a, b) * alpha[b]).sum()).collect()
    }

    /// g_ab u^b.
    pub fn lower(&self, u: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n).map(|a| (0..n).map(|b| self.g(a, b) * u[b]).sum()).collect()
    }
}

/// Block-diagonal metric of the product of two surfaces. Cross blocks are
/// identically zero and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMetric {
    pub block1: MetricBundle,
    pub block2: MetricBundle,
}

impl ProductMetric {
    pub fn from_jets(jet1: &SurfaceJet, mass1: f64, jet2: &SurfaceJet, mass2: f64) -> Result<Self> {
        Ok(ProductMetric {
            block1: MetricBundle::from_jet(jet1, mass1).map_err(|e| e.on_side(Side::A))?,
            block2: MetricBundle::from_jet(jet2, mass2).map_err(|e| e.on_side(Side::B))?,
        })
    }

    pub fn dim(&self) -> usize {
        self.block1.dim + self.block2.dim
    }

    /// ⟨u, w⟩ for stacked contravariant vectors.
    pub fn inner(&self, u: &[f64], w: &[f64]) -> f64 {
        let n = self.block1.dim;
        self.block1.inner(&u[..n], &w[..n]) + self.block2.inner(&u[n..], &w[n..])
    }

    /// ⟨α, β⟩ for stacked covectors.
    pub fn inner_dual(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        let n = self.block1.dim;
        self.block1.inner_dual(&alpha[..n], &beta[..n]) + self.block2.inner_dual(&alpha[n..], &beta[n..])
    }

    pub fn raise(&self, alpha: &[f64]) -> Vec<f64> {
        let n = self.block1.dim;
        let mut out = self.block1.raise(&alpha[..n]);
        out.extend(self.block2.raise(&alpha[n..]));
        out
    }

    pub fn lower(&self, u: &[f64]) -> Vec<f64> {
        let n = self.block1.dim;
        let mut out = self.block1.lower(&u[..n]);
        out.extend(self.block2.lower(&u[n..]));
        out
    }
}

pub fn product_bundle(
    surface1: &SurfaceDefinition,
    params1: &[f64],
    mass1: f64,
    surface2: &SurfaceDefinition,
    params2: &[f64],
    mass2: f64,
) -> Result<ProductMetric> {
    let jet1 = surface1.jet(params1)?;
    let jet2 = surface2.jet(params2)?;
    ProductMetric::from_jets(&jet1, mass1, &jet2, mass2)
}
