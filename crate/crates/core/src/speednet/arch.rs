use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::window::DEFAULT_FRAME_SIZE;

/// Shape of the dual-branch network. Both branches share the conv layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    /// Rows per input window.
    pub input_frames: usize,
    /// Filter count of each conv layer in a branch.
    pub conv_filters: Vec<usize>,
    /// Width of each hidden dense layer.
    pub dense_units: Vec<usize>,
    /// Dropout after each hidden dense layer.
    pub dropout: f64,
}

impl Default for ArchSpec {
    fn default() -> Self {
        Self {
            input_frames: DEFAULT_FRAME_SIZE,
            conv_filters: vec![27, 45],
            dense_units: vec![180, 30],
            dropout: 0.2,
        }
    }
}

/// Ranges explored by the hyperparameter search; they also bound any
/// architecture accepted by `build_model`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub conv_layers: (usize, usize),
    pub filters: (usize, usize),
    pub dense_layers: (usize, usize),
    pub units: (usize, usize),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            conv_layers: (2, 10),
            filters: (10, 100),
            dense_layers: (2, 5),
            units: (15, 500),
        }
    }
}

fn check(field: &'static str, value: usize, (min, max): (usize, usize)) -> Result<()> {
    if value < min || value > max {
        return Err(Error::OutOfRange {
            field,
            value: value as f64,
            min: min as f64,
            max: max as f64,
        });
    }
    Ok(())
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let outer = Self::default();
        for (name, (lo, hi), (olo, ohi)) in [
            ("conv layers", self.conv_layers, outer.conv_layers),
            ("filters", self.filters, outer.filters),
            ("dense layers", self.dense_layers, outer.dense_layers),
            ("units", self.units, outer.units),
        ] {
            if lo > hi || lo < olo || hi > ohi {
                return Err(Error::InvalidArgument(format!(
                    "{name} range {lo}..={hi} is not inside {olo}..={ohi}"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, arch: &ArchSpec) -> Result<()> {
        check("conv layer count", arch.conv_filters.len(), self.conv_layers)?;
        for &f in &arch.conv_filters {
            check("conv filters", f, self.filters)?;
        }
        check("dense layer count", arch.dense_units.len(), self.dense_layers)?;
        for &u in &arch.dense_units {
            check("dense units", u, self.units)?;
        }
        Ok(())
    }
}

impl ArchSpec {
    /// Checks the architecture against the search ranges.
    pub fn validate(&self) -> Result<()> {
        SearchSpace::default().contains(self)?;
        self.validate_structure()
    }

    /// Checks only what the network needs to be well formed.
    pub fn validate_structure(&self) -> Result<()> {
        if self.input_frames == 0 || self.conv_filters.is_empty() || self.conv_filters.contains(&0) {
            return Err(Error::InvalidArgument(
                "architecture needs a non-empty input and at least one conv layer".into(),
            ));
        }
        if self.dense_units.contains(&0) {
            return Err(Error::InvalidArgument("dense layers need at least one unit".into()));
        }
        crate::nn::dropout::check_rate(self.dropout)
    }

    /// Length of the concatenated pooled vector.
    pub fn concat_len(&self) -> usize {
        2 * self.conv_filters.last().copied().unwrap_or(0)
    }

    /// Trainable scalar count, from layer shapes alone.
    pub fn param_count(&self) -> usize {
        let mut branch = 0;
        let mut channels = 1;
        for &k in &self.conv_filters {
            branch += k * channels * 9 + k;
            channels = k;
        }
        let mut head = 0;
        let mut width = self.concat_len();
        for &u in self.dense_units.iter().chain(std::iter::once(&1)) {
            head += width * u + u;
            width = u;
        }
        2 * branch + head
    }
}
