//! Randomized hyperparameter search.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arch::{ArchSpec, SearchSpace};
use super::network::build_model;
use super::train::{train, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};
use crate::window::WindowedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchEntry {
    pub arch: ArchSpec,
    pub seed: u64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Candidates in sampling order.
    pub leaderboard: Vec<SearchEntry>,
    pub best_index: usize,
}

impl SearchResult {
    pub fn best(&self) -> &SearchEntry {
        &self.leaderboard[self.best_index]
    }
}

/// Draws `k` architectures, integer dimensions uniform in their ranges.
pub fn sample_architectures(
    space: &SearchSpace,
    k: usize,
    seed: u64,
    input_frames: usize,
    dropout: f64,
) -> Vec<ArchSpec> {
    let mut rng = seeded_rng(seed);
    (0..k)
        .map(|_| {
            let n_conv = rng.random_range(space.conv_layers.0..=space.conv_layers.1);
            let conv_filters = (0..n_conv)
                .map(|_| rng.random_range(space.filters.0..=space.filters.1))
                .collect();
            let n_dense = rng.random_range(space.dense_layers.0..=space.dense_layers.1);
            let dense_units = (0..n_dense)
                .map(|_| rng.random_range(space.units.0..=space.units.1))
                .collect();
            ArchSpec {
                input_frames,
                conv_filters,
                dense_units,
                dropout,
            }
        })
        .collect()
}

/// Trains each sampled candidate under `budget` and ranks them by best
/// validation MAE. Candidates train in parallel; each has its own seed
/// derived from `seed`, so the leaderboard does not depend on scheduling.
pub fn random_search(
    space: &SearchSpace,
    k: usize,
    seed: u64,
    budget: &TrainConfig,
    train_set: &WindowedDataset,
    validation_set: &WindowedDataset,
) -> Result<SearchResult> {
    if k < 1 {
        return Err(Error::InvalidArgument("search needs k >= 1".into()));
    }
    space.validate()?;
    let archs = sample_architectures(space, k, seed, train_set.frame_size, budget.dropout);
    let leaderboard = archs
        .into_par_iter()
        .enumerate()
        .map(|(i, arch)| {
            let cand_seed = derive_seed(seed, 1 + i as u64);
            let params = build_model(&arch, cand_seed)?;
            let config = TrainConfig {
                seed: cand_seed,
                ..budget.clone()
            };
            let outcome = train(params, train_set, validation_set, &config)?;
            Ok(SearchEntry {
                arch,
                seed: cand_seed,
                val_mae: outcome.best_loss,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best_index = leaderboard
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.val_mae.total_cmp(&b.1.val_mae))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(SearchResult {
        leaderboard,
        best_index,
    })
}
