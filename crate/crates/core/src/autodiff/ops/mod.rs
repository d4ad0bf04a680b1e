mod conv;
mod elementwise;
mod linalg;
mod norm;
mod shape;

pub use conv::{conv1d, max_pool1d, Padding};
pub use linalg::dense;
pub use norm::{cross_entropy, layer_norm, softmax};
pub use shape::concat;

use super::{Tensor, TensorError};

/// Mean over the time axis (axis 1 of `[b, t, d]`), giving `[b, d]`.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor, TensorError> {
    if x.rank() != 3 {
        return Err(TensorError::Shape(format!("global_avg_pool expects [b, t, d], got {:?}", x.shape())));
    }
    x.mean_axis(1)
}
