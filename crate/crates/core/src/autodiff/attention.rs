use super::ops::softmax;
use super::{Parameter, Tensor, TensorError};
use crate::rng::SeededRng;

/// Projections for one attention direction. Per-head projections are the
/// column blocks of the `[d, d]` matrices.
#[derive(Clone, Debug)]
pub struct MhaParams {
    pub w_q: Parameter,
    pub w_k: Parameter,
    pub w_v: Parameter,
    pub w_o: Parameter,
}

impl MhaParams {
    /// Xavier-uniform initialisation.
    pub fn init(prefix: &str, d: usize, rng: &mut SeededRng) -> Self {
        let bound = (6.0 / (2 * d) as f64).sqrt();
        let mut mat = |name: &str| {
            let data = (0..d * d).map(|_| rng.uniform_range(-bound, bound)).collect();
            Parameter::new(format!("{prefix}.{name}"), data, &[d, d])
        };
        MhaParams { w_q: mat("w_q"), w_k: mat("w_k"), w_v: mat("w_v"), w_o: mat("w_o") }
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        vec![self.w_q.clone(), self.w_k.clone(), self.w_v.clone(), self.w_o.clone()]
    }
}

/// `[b, t, d] -> [b * heads, t, d / heads]`.
fn split_heads(x: &Tensor, heads: usize) -> Result<Tensor, TensorError> {
    let &[b, t, d] = x.shape() else { unreachable!() };
    x.reshape(&[b, t, heads, d / heads])?.transpose(1, 2)?.reshape(&[b * heads, t, d / heads])
}

fn merge_heads(x: &Tensor, b: usize, heads: usize) -> Result<Tensor, TensorError> {
    let &[_, t, dh] = x.shape() else { unreachable!() };
    x.reshape(&[b, heads, t, dh])?.transpose(1, 2)?.reshape(&[b, t, heads * dh])
}

/// Scaled dot-product attention with queries from `query_src` and keys and
/// values from `kv_src`, scale `1/sqrt(d / heads)`, no positional terms.
pub fn multi_head_attention(
    query_src: &Tensor,
    kv_src: &Tensor,
    params: &MhaParams,
    heads: usize,
) -> Result<Tensor, TensorError> {
    let (&[b, _tq, d], &[bk, _tk, dk]) = (query_src.shape(), kv_src.shape()) else {
        return Err(TensorError::Shape(format!(
            "attention expects [b, t, d] inputs, got {:?} and {:?}",
            query_src.shape(),
            kv_src.shape()
        )));
    };
    if b != bk || d != dk {
        return Err(TensorError::Shape(format!(
            "attention batch/width mismatch: {:?} vs {:?}",
            query_src.shape(),
            kv_src.shape()
        )));
    }
    if heads == 0 || d % heads != 0 {
        return Err(TensorError::Config(format!("width {d} not divisible by {heads} heads")));
    }
    let dh = d / heads;
    // Scaling q rather than the scores keeps the [t_q, t_k] buffers to two.
    let q = split_heads(&query_src.matmul(&params.w_q.tensor)?.mul_scalar(1.0 / (dh as f64).sqrt()), heads)?;
    let k = split_heads(&kv_src.matmul(&params.w_k.tensor)?, heads)?;
    let v = split_heads(&kv_src.matmul(&params.w_v.tensor)?, heads)?;
    let scores = q.bmm(&k.transpose(1, 2)?)?;
    let attended = softmax(&scores)?.bmm(&v)?;
    merge_heads(&attended, b, heads)?.matmul(&params.w_o.tensor)
}
