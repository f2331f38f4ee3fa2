//! Minimal layer toolkit with analytic gradients: 3x3 convolution, global
//! max pooling, dense layers, ReLU, inverted dropout, MAE loss, RMSprop and
//! early stopping. Everything trains in `f64`.

pub mod activation;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod early_stop;
pub mod loss;
pub mod optim;
pub mod pool;
pub mod tensor;

pub use activation::{relu, relu_grad};
pub use conv::{Conv2d, ConvGrads};
pub use dense::{Dense, DenseGrads};
pub use dropout::dropout;
pub use early_stop::{EarlyStopMonitor, StopDecision};
pub use loss::mae_loss;
pub use optim::{RmsProp, RmsPropState};
pub use pool::{global_max_pool, global_max_pool_backward};
pub use tensor::Tensor;
