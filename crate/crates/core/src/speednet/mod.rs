//! The dual-branch speed regression network, its training loop and the
//! randomized architecture search.

mod arch;
mod io;
mod network;
mod search;
mod train;

pub use arch::{ArchSpec, SearchSpace};
pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION};
pub use network::{build_model, random_window, Branch, SpeedNetParams};
pub use search::{random_search, sample_architectures, SearchEntry, SearchResult};
pub use train::{
    dataset_mae, predict_dataset, train, train_observed, EpochRecord, Monitor, TrainConfig,
    TrainOutcome,
};
