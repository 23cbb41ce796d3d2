//! Quenched-disorder realizations of the nearest-neighbour couplings.
//!
//! Couplings of a disordered chain are drawn independently and uniformly from
//! the open interval (1/2, 3/2). Every realization is generated by its own
//! ChaCha8 stream seeded from a single 64-bit seed, so realization `i` of an
//! ensemble can be rebuilt in isolation with [`realization_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower edge of the coupling distribution (excluded).
pub const COUPLING_MIN: f64 = 0.5;
/// Upper edge of the coupling distribution (excluded).
pub const COUPLING_MAX: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    Disordered,
    Clean,
}

/// One quenched instance `{J_1, ..., J_{N-1}}` of an open chain with `N` sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRealization {
    pub seed: u64,
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub kind: CouplingKind,
    pub couplings: Vec<f64>,
}

impl CouplingRealization {
    /// Wraps an explicit coupling vector. Used by fixtures that need couplings
    /// outside the sampled distribution (e.g. a cut bond).
    pub fn from_couplings(couplings: Vec<f64>, kind: CouplingKind, seed: u64) -> Self {
        Self {
            seed,
            n_sites: couplings.len() + 1,
            kind,
            couplings,
        }
    }

    /// Mirror image `n -> N + 1 - n`.
    pub fn reversed(&self) -> Self {
        let mut couplings = self.couplings.clone();
        couplings.reverse();
        Self {
            couplings,
            ..self.clone()
        }
    }

    pub fn total_coupling(&self) -> f64 {
        self.couplings.iter().sum()
    }
}

/// Draws the couplings of an `n_sites` chain.
///
/// Deterministic in `(n_sites, seed, kind)`. Draws landing exactly on the lower
/// edge are rejected; the generator never produces the upper edge.
pub fn sample_couplings(n_sites: usize, seed: u64, kind: CouplingKind) -> Result<CouplingRealization> {
    if n_sites < 2 {
        return Err(Error::InvalidSize {
            n_sites,
            reason: "a chain needs at least two sites",
        });
    }
    let couplings = match kind {
        CouplingKind::Clean => vec![1.0; n_sites - 1],
        CouplingKind::Disordered => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n_sites - 1).map(|_| draw_open(&mut rng)).collect()
        }
    };
    Ok(CouplingRealization {
        seed,
        n_sites,
        kind,
        couplings,
    })
}

fn draw_open<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let j = COUPLING_MIN + rng.gen::<f64>();
        if j > COUPLING_MIN && j < COUPLING_MAX {
            return j;
        }
    }
}

/// Seed of realization `index` in an ensemble rooted at `base_seed`.
///
/// SplitMix64 finalizer applied to `base_seed + golden * (index + 1)`. For a
/// fixed base seed the map `index -> seed` is injective (the finalizer is a
/// bijection on `u64` and the pre-image differs for every index below 2^64).
pub fn realization_seed(base_seed: u64, index: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = base_seed.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `exp(∫ ln J dJ)` over the uniform distribution on (1/2, 3/2).
pub fn critical_field_closed_form() -> f64 {
    let antiderivative = |x: f64| x * x.ln() - x;
    (antiderivative(COUPLING_MAX) - antiderivative(COUPLING_MIN)).exp()
}

/// Critical field `g_c = exp(mean ln J)` of the ensemble.
///
/// `None` gives the closed form; `Some(n)` a Monte-Carlo estimate from `n`
/// draws with a fixed seed.
pub fn critical_field(kind: CouplingKind, n_samples: Option<usize>) -> f64 {
    match (kind, n_samples) {
        (CouplingKind::Clean, _) => 1.0,
        (CouplingKind::Disordered, None) => critical_field_closed_form(),
        (CouplingKind::Disordered, Some(n)) => {
            let n = n.max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(0x6763_5f6d_6300_0001);
            let mean_log = (0..n).map(|_| draw_open(&mut rng).ln()).sum::<f64>() / n as f64;
            mean_log.exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_chain_has_one_coupling_in_support() {
        let r = sample_couplings(2, 7, CouplingKind::Disordered).unwrap();
        assert_eq!(r.couplings.len(), 1);
        assert!(r.couplings[0] > 0.5 && r.couplings[0] < 1.5);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_couplings(512, 7, CouplingKind::Disordered).unwrap();
        let b = sample_couplings(512, 7, CouplingKind::Disordered).unwrap();
        assert_eq!(a, b);
        let c = sample_couplings(512, 8, CouplingKind::Disordered).unwrap();
        assert_ne!(a.couplings, c.couplings);
    }

    #[test]
    fn clean_chain_is_all_ones() {
        let r = sample_couplings(8, 12345, CouplingKind::Clean).unwrap();
        assert_eq!(r.couplings, vec![1.0; 7]);
    }

    #[test]
    fn rejects_single_site() {
        assert!(matches!(
            sample_couplings(1, 0, CouplingKind::Clean),
            Err(Error::InvalidSize { n_sites: 1, .. })
        ));
    }

    #[test]
    fn uniform_histogram() {
        let r = sample_couplings(100_001, 3, CouplingKind::Disordered).unwrap();
        let mut bins = [0usize; 10];
        for &j in &r.couplings {
            bins[((j - 0.5) * 10.0) as usize] += 1;
        }
        for b in bins {
            let frac = b as f64 / r.couplings.len() as f64;
            assert!((frac - 0.1).abs() < 0.01, "bin fraction {frac}");
        }
    }

    #[test]
    fn critical_field_values() {
        assert_eq!(critical_field(CouplingKind::Clean, None), 1.0);
        let closed = critical_field(CouplingKind::Disordered, None);
        assert!((closed - 0.9558).abs() < 5e-5, "{closed}");
        let mc = critical_field(CouplingKind::Disordered, Some(1_000_000));
        assert!((mc - closed).abs() < 1e-3, "{mc} vs {closed}");
    }

    #[test]
    fn realization_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| realization_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_eq!(realization_seed(42, 5), realization_seed(42, 5));
    }
}
