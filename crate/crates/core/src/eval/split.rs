use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::window::WindowedDataset;

// Absorbs representation error in fraction * n before flooring.
const FLOOR_EPS: f64 = 1e-9;

/// Window-level train/test/evaluation split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            fractions: [0.70, 0.15, 0.15],
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.fractions.iter().sum();
        if self.fractions.iter().any(|&f| f.is_nan() || f <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions {:?} must be positive and sum to 1",
                self.fractions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub evaluation: Vec<usize>,
}

/// Seeded shuffle of `0..n`, cut into contiguous runs. The test and
/// evaluation sizes are floored; the remainder goes to training.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Empty);
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("cannot split {n} windows three ways")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(spec.seed));
    let n_test = (spec.fractions[1] * n as f64 + FLOOR_EPS).floor() as usize;
    let n_eval = (spec.fractions[2] * n as f64 + FLOOR_EPS).floor() as usize;
    let n_train = n - n_test - n_eval;
    let evaluation = order.split_off(n_train + n_test);
    let test = order.split_off(n_train);
    Ok(SplitIndices {
        train: order,
        test,
        evaluation,
    })
}

/// Returns `(train, test, evaluation)`.
pub fn split_70_15_15(
    dataset: &WindowedDataset,
    spec: &SplitSpec,
) -> Result<(WindowedDataset, WindowedDataset, WindowedDataset)> {
    let idx = split_indices(dataset.len(), spec)?;
    Ok((
        dataset.subset(&idx.train),
        dataset.subset(&idx.test),
        dataset.subset(&idx.evaluation),
    ))
}
