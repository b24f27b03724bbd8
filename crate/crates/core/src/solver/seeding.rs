//! Low-discrepancy start points over parameter boxes.
//!
//! A Halton sequence (one prime base per dimension) shifted by a seeded
//! random offset modulo 1 (Cranley–Patterson rotation), so that different
//! seeds give different but equally well-spread point sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::manifold::ParamRange;

/// Fraction of a clamped interval kept clear at each end.
pub const CLAMPED_MARGIN: f64 = 0.05;

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= candidate).all(|&p| !candidate.is_multiple_of(p)) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut result = 0.0;
    while index > 0 {
        result += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    result
}

#[derive(Debug, Clone)]
pub struct StartSequence {
    bases: Vec<u64>,
    shift: Vec<f64>,
    index: u64,
}

impl StartSequence {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StartSequence {
            bases: primes(dim),
            shift: (0..dim).map(|_| rng.gen::<f64>()).collect(),
            index: 0,
        }
    }

    /// Next point of the shifted sequence in [0, 1)^dim.
    pub fn next_unit(&mut self) -> Vec<f64> {
        self.index += 1;
        self.bases
            .iter()
            .zip(&self.shift)
            .map(|(&b, &s)| {
                let u = radical_inverse(self.index, b) + s;
                if u >= 1.0 {
                    u - 1.0
                } else {
                    u
                }
            })
            .collect()
    }
}

/// Map a unit-cube point onto parameter boxes: periodic parameters over one
/// full period, clamped ones over the interval minus [`CLAMPED_MARGIN`].
pub fn map_to_domain(unit: &[f64], domain: &[ParamRange]) -> Vec<f64> {
    unit.iter()
        .zip(domain)
        .map(|(&u, r)| {
            if r.periodic {
                r.wrap(r.lo + u * r.width())
            } else {
                let m = CLAMPED_MARGIN * r.width();
                r.lo + m + u * (r.width() - 2.0 * m)
            }
        })
        .collect()
}

pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen::<f64>()).collect()
}
