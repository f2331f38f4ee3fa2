use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement,
/// or once `max_epochs` epochs have run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopMonitor {
    pub best_loss: f64,
    pub best_epoch: usize,
    pub epochs_since_improvement: usize,
    pub epoch: usize,
    pub patience: usize,
    pub max_epochs: usize,
}

impl EarlyStopMonitor {
    pub fn new(patience: usize, max_epochs: usize) -> Self {
        Self {
            best_loss: f64::INFINITY,
            best_epoch: 0,
            epochs_since_improvement: 0,
            epoch: 0,
            patience,
            max_epochs,
        }
    }

    /// Records the loss of the next epoch (epochs are numbered from 1).
    pub fn update(&mut self, loss: f64) -> StopDecision {
        self.epoch += 1;
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = self.epoch;
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
        }
        if self.epochs_since_improvement >= self.patience || self.epoch >= self.max_epochs {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn improved_last(&self) -> bool {
        self.best_epoch == self.epoch && self.epoch > 0
    }
}

impl Default for EarlyStopMonitor {
    fn default() -> Self {
        Self::new(10, 1000)
    }
}
