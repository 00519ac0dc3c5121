//! Temporal perturbations over panel sequences: seeded shuffles with a
//! target displacement intensity and order-preserving deletions.
//!
//! Shuffle intensity is the fraction of positions a permutation displaces,
//! sigma = |{i : pi(i) != i}| / T. A permutation cannot displace exactly one
//! element, so requested intensities are quantized to realizable displaced
//! counts before sampling. Deletion removes a subset of positions while
//! keeping the relative order of survivors, rho = |D| / T.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ComicArtifact, PerturbationRecord};
use crate::panels::{self, ComposeError};

#[derive(Debug, Error, PartialEq)]
pub enum PerturbError {
    #[error("permutation is not a bijection on 1..={t}: {detail}")]
    NotBijection { t: usize, detail: String },
    #[error("plan is for {plan_t} panels but artifact has {artifact_t}")]
    SizeMismatch { plan_t: usize, artifact_t: usize },
    #[error("no panels eligible for deletion (T={t}, intermediate_only={intermediate_only})")]
    EmptyPool { t: usize, intermediate_only: bool },
    #[error("recompose failed: {0}")]
    Compose(#[from] ComposeError),
}

/// A sampled permutation of panel positions together with the intensity it
/// realizes. `permutation[i-1]` is the 1-based target position of the panel
/// originally at position `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShufflePlan {
    pub t: usize,
    pub permutation: Vec<usize>,
    pub requested_sigma: f64,
}

impl ShufflePlan {
    pub fn identity(t: usize) -> Self {
        ShufflePlan {
            t,
            permutation: (1..=t).collect(),
            requested_sigma: 0.0,
        }
    }

    /// Number of displaced positions, |{i : pi(i) != i}|.
    pub fn displaced(&self) -> usize {
        self.permutation
            .iter()
            .enumerate()
            .filter(|(i, &p)| p != i + 1)
            .count()
    }

    /// Realized intensity displaced / T. Exactness checks should compare
    /// [`ShufflePlan::displaced`] counts instead of floats.
    pub fn sigma(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.displaced() as f64 / self.t as f64
        }
    }

    pub fn is_identity(&self) -> bool {
        self.displaced() == 0
    }

    /// A derangement displaces every position.
    pub fn is_derangement(&self) -> bool {
        self.displaced() == self.t
    }

    pub fn inverse(&self) -> ShufflePlan {
        let mut inv = vec![0usize; self.t];
        for (i, &p) in self.permutation.iter().enumerate() {
            inv[p - 1] = i + 1;
        }
        ShufflePlan {
            t: self.t,
            permutation: inv,
            requested_sigma: self.requested_sigma,
        }
    }

    pub fn record(&self) -> PerturbationRecord {
        PerturbationRecord::Shuffle {
            requested_sigma: self.requested_sigma,
            realized_sigma: self.sigma(),
            displaced: self.displaced(),
            t: self.t,
        }
    }
}

/// A deletion plan: which 1-based positions are removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionPlan {
    pub t: usize,
    /// Deleted positions, ascending.
    pub deleted: Vec<usize>,
    pub intermediate_only: bool,
    pub requested_rho: f64,
}

impl DeletionPlan {
    /// Realized ratio |D| / T.
    pub fn rho(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            self.deleted.len() as f64 / self.t as f64
        }
    }

    pub fn record(&self) -> PerturbationRecord {
        PerturbationRecord::Deletion {
            requested_rho: self.requested_rho,
            realized_rho: self.rho(),
            deleted: self.deleted.len(),
            t: self.t,
        }
    }
}

/// Quantize a requested intensity to a realizable displaced count.
///
/// The nearest integer to sigma*T is taken with ties rounding down. A count
/// of one is unrealizable (no permutation displaces exactly one element):
/// it promotes to two when any displacement was requested. Sequences shorter
/// than two panels cannot be displaced at all.
pub fn quantize_sigma(sigma_requested: f64, t: usize) -> usize {
    if t < 2 {
        return 0;
    }
    let x = sigma_requested.clamp(0.0, 1.0) * t as f64;
    let frac = x - x.floor();
    let mut k = if (frac - 0.5).abs() <= 1e-9 {
        x.floor() as usize
    } else {
        x.round() as usize
    };
    if k == 1 {
        k = if sigma_requested > 0.0 { 2 } else { 0 };
    }
    k.min(t)
}

/// Sample a permutation that displaces exactly `quantize_sigma(sigma, T)`
/// positions: the positions are chosen uniformly, then a uniform derangement
/// is applied over them (rejection sampling; every chosen position moves).
/// Deterministic under `seed`.
pub fn sample_permutation(t: usize, sigma_requested: f64, seed: u64) -> ShufflePlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = quantize_sigma(sigma_requested, t);
    let mut permutation: Vec<usize> = (1..=t).collect();
    if k >= 2 {
        let mut chosen = rand::seq::index::sample(&mut rng, t, k).into_vec();
        chosen.sort_unstable();
        // derangement of the chosen positions by rejection; k is small
        let targets: Vec<usize> = loop {
            let mut candidate = chosen.clone();
            candidate.shuffle(&mut rng);
            if candidate.iter().zip(&chosen).all(|(c, o)| c != o) {
                break candidate;
            }
        };
        for (slot, target) in chosen.iter().zip(targets) {
            permutation[*slot] = target + 1;
        }
    }
    ShufflePlan {
        t,
        permutation,
        requested_sigma: sigma_requested,
    }
}

/// Fraction of positions a permutation displaces. Errors unless `pi` is a
/// bijection on 1..=len.
pub fn measure_sigma(pi: &[usize]) -> Result<f64, PerturbError> {
    Ok(measure_displaced(pi)? as f64 / pi.len().max(1) as f64)
}

/// Displaced-position count of a permutation, the exact numerator of sigma.
pub fn measure_displaced(pi: &[usize]) -> Result<usize, PerturbError> {
    let t = pi.len();
    let mut seen = vec![false; t];
    for &p in pi {
        if p < 1 || p > t {
            return Err(PerturbError::NotBijection {
                t,
                detail: format!("value {p} out of range"),
            });
        }
        if seen[p - 1] {
            return Err(PerturbError::NotBijection {
                t,
                detail: format!("value {p} repeated"),
            });
        }
        seen[p - 1] = true;
    }
    Ok(pi.iter().enumerate().filter(|(i, &p)| p != i + 1).count())
}

/// Reorder an artifact's panels so the panel at original position i lands at
/// position pi(i), then recompose the composite. The plan is recorded in the
/// returned artifact's provenance.
pub fn apply_shuffle(
    artifact: &ComicArtifact,
    plan: &ShufflePlan,
) -> Result<ComicArtifact, PerturbError> {
    if plan.t != artifact.panel_count {
        return Err(PerturbError::SizeMismatch {
            plan_t: plan.t,
            artifact_t: artifact.panel_count,
        });
    }
    measure_displaced(&plan.permutation)?;
    let mut images = vec![None; plan.t];
    for (i, panel) in artifact.panels.iter().enumerate() {
        images[plan.permutation[i] - 1] = Some(panel.image.clone());
    }
    let images: Vec<_> = images.into_iter().map(|img| img.expect("bijection")).collect();
    let mut provenance = artifact.provenance.clone();
    provenance.shuffle = Some(plan.clone());
    Ok(panels::compose_artifact(images, artifact.layout, provenance)?)
}

/// Sample which positions to delete: round-half-up(rho*T) positions drawn
/// uniformly from the eligible pool ({2..T-1} when `intermediate_only`,
/// otherwise all of {1..T}), capped at the pool size. Deterministic under
/// `seed`. Errors when deletion is requested but the pool is empty.
pub fn sample_deletion(
    t: usize,
    rho_requested: f64,
    seed: u64,
    intermediate_only: bool,
) -> Result<DeletionPlan, PerturbError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let desired = crate::datasets::round_half_up(rho_requested.clamp(0.0, 1.0) * t as f64);
    let pool: Vec<usize> = if intermediate_only {
        (2..t).collect()
    } else {
        (1..=t).collect()
    };
    if desired > 0 && pool.is_empty() {
        return Err(PerturbError::EmptyPool {
            t,
            intermediate_only,
        });
    }
    let k = desired.min(pool.len());
    let mut deleted: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    deleted.sort_unstable();
    Ok(DeletionPlan {
        t,
        deleted,
        intermediate_only,
        requested_rho: rho_requested,
    })
}

/// Drop the planned positions, keeping survivors in their original relative
/// order, re-indexed contiguously, and recompose on a grid shrunk to fit.
pub fn apply_deletion(
    artifact: &ComicArtifact,
    plan: &DeletionPlan,
) -> Result<ComicArtifact, PerturbError> {
    if plan.t != artifact.panel_count {
        return Err(PerturbError::SizeMismatch {
            plan_t: plan.t,
            artifact_t: artifact.panel_count,
        });
    }
    let images: Vec<_> = artifact
        .panels
        .iter()
        .filter(|p| !plan.deleted.contains(&p.index))
        .map(|p| p.image.clone())
        .collect();
    let survivors = images.len() as u32;
    let cols = artifact.layout.cols.min(survivors).max(1);
    let rows = survivors.div_ceil(cols).max(1);
    let layout = crate::domain::GridLayout::new(rows, cols, artifact.layout.gutter_px);
    let mut provenance = artifact.provenance.clone();
    provenance.deletion = Some(plan.clone());
    Ok(panels::compose_artifact(images, layout, provenance)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantize_matches_stated_cases() {
        assert_eq!(quantize_sigma(0.5, 4), 2);
        assert_eq!(quantize_sigma(0.25, 4), 2); // k=1 unrealizable, promoted
        assert_eq!(quantize_sigma(0.0, 5), 0);
        assert_eq!(quantize_sigma(1.0, 4), 4);
        assert_eq!(quantize_sigma(0.5, 5), 2); // 2.5 ties round down
        assert_eq!(quantize_sigma(0.3, 1), 0);
    }

    #[test]
    fn identity_and_full_shuffle() {
        let id = sample_permutation(4, 0.0, 9);
        assert!(id.is_identity());
        assert_eq!(id.sigma(), 0.0);

        let full = sample_permutation(4, 1.0, 9);
        assert!(full.is_derangement());
        assert_eq!(full.sigma(), 1.0);
    }

    #[test]
    fn two_displacements_form_a_transposition() {
        let plan = sample_permutation(5, 0.4, 3);
        assert_eq!(plan.displaced(), 2);
        assert_eq!(plan.sigma(), 0.4);
    }

    #[test]
    fn measure_sigma_cases() {
        assert_eq!(measure_sigma(&[1, 2, 3, 4, 5, 6, 7]).unwrap(), 0.0);
        assert_eq!(measure_sigma(&[2, 1, 3, 4]).unwrap(), 0.5);
        assert_eq!(measure_sigma(&[4, 3, 2, 1]).unwrap(), 1.0);
        assert!(measure_sigma(&[1, 1, 3]).is_err());
        assert!(measure_sigma(&[0, 1]).is_err());
    }

    #[test]
    fn deletion_pool_and_bounds() {
        let plan = sample_deletion(4, 0.5, 11, true).unwrap();
        assert_eq!(plan.deleted, vec![2, 3]);
        assert_eq!(plan.rho(), 0.5);

        let none = sample_deletion(4, 0.0, 11, true).unwrap();
        assert!(none.deleted.is_empty());

        assert!(matches!(
            sample_deletion(2, 0.5, 11, true),
            Err(PerturbError::EmptyPool { .. })
        ));
    }

    #[test]
    fn plans_are_seed_deterministic() {
        for t in 1..=10 {
            let a = sample_permutation(t, 0.6, 42);
            let b = sample_permutation(t, 0.6, 42);
            assert_eq!(a, b);
            let da = sample_deletion(t, 0.4, 42, false).unwrap();
            let db = sample_deletion(t, 0.4, 42, false).unwrap();
            assert_eq!(da, db);
        }
    }

    proptest! {
        #[test]
        fn sampled_sigma_is_exactly_quantized(t in 1usize..=12, sigma in 0.0f64..=1.0, seed in 0u64..500) {
            let plan = sample_permutation(t, sigma, seed);
            prop_assert_eq!(plan.displaced(), quantize_sigma(sigma, t));
            prop_assert_eq!(measure_displaced(&plan.permutation).unwrap(), plan.displaced());
        }

        #[test]
        fn deletion_preserves_relative_order(t in 1usize..=12, rho in 0.0f64..=1.0, seed in 0u64..500) {
            let plan = sample_deletion(t, rho, seed, false).unwrap();
            let survivors: Vec<usize> = (1..=t).filter(|i| !plan.deleted.contains(i)).collect();
            prop_assert!(survivors.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(plan.deleted.len(),
                crate::datasets::round_half_up(rho.clamp(0.0, 1.0) * t as f64).min(t));
        }
    }
}
