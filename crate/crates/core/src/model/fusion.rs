use super::blocks::{filled, Dense, LEAKY_SLOPE, NORM_EPS};
use crate::autodiff::ops::{global_avg_pool, layer_norm};
use crate::autodiff::{multi_head_attention, MhaParams, Parameter, Tensor, TensorError};
use crate::rng::SeededRng;

/// One direction of the bidirectional update: attention from the other
/// stream, then a residual feed-forward network, each closed by layer norm.
#[derive(Clone, Debug)]
pub struct CrossDirection {
    pub mha: MhaParams,
    pub ln1_g: Parameter,
    pub ln1_b: Parameter,
    pub ffn_in: Dense,
    pub ffn_out: Dense,
    pub ln2_g: Parameter,
    pub ln2_b: Parameter,
}

impl CrossDirection {
    fn init(prefix: &str, d: usize, rng: &mut SeededRng) -> Self {
        CrossDirection {
            mha: MhaParams::init(&format!("{prefix}.mha"), d, rng),
            ln1_g: filled(format!("{prefix}.ln1.g"), d, 1.0),
            ln1_b: filled(format!("{prefix}.ln1.b"), d, 0.0),
            ffn_in: Dense::init(&format!("{prefix}.ffn1"), d, 4 * d, rng),
            ffn_out: Dense::init(&format!("{prefix}.ffn2"), 4 * d, d, rng),
            ln2_g: filled(format!("{prefix}.ln2.g"), d, 1.0),
            ln2_b: filled(format!("{prefix}.ln2.b"), d, 0.0),
        }
    }

    fn parameters(&self) -> Vec<Parameter> {
        let mut p = self.mha.parameters();
        p.extend([self.ln1_g.clone(), self.ln1_b.clone()]);
        p.extend(self.ffn_in.parameters());
        p.extend(self.ffn_out.parameters());
        p.extend([self.ln2_g.clone(), self.ln2_b.clone()]);
        p
    }

    /// Attention sub-layer only: `LN(query + MHA(query, source))`.
    pub fn attend(&self, query: &Tensor, source: &Tensor, heads: usize) -> Result<Tensor, TensorError> {
        let a = multi_head_attention(query, source, &self.mha, heads)?;
        layer_norm(&query.add(&a)?, &self.ln1_g.tensor, &self.ln1_b.tensor, NORM_EPS)
    }

    fn forward(&self, query: &Tensor, source: &Tensor, heads: usize) -> Result<Tensor, TensorError> {
        let h = self.attend(query, source, heads)?;
        let f = self.ffn_out.forward(&self.ffn_in.forward(&h)?.leaky_relu(LEAKY_SLOPE))?;
        layer_norm(&h.add(&f)?, &self.ln2_g.tensor, &self.ln2_b.tensor, NORM_EPS)
    }
}

/// Bidirectional cross-attention between two `[b, T, d]` streams. Both
/// directions read the block's inputs, not each other's outputs.
#[derive(Clone, Debug)]
pub struct CrossAttentionBlock {
    pub ppg: CrossDirection,
    pub aux: CrossDirection,
    pub heads: usize,
}

impl CrossAttentionBlock {
    pub fn init(prefix: &str, d: usize, heads: usize, rng: &mut SeededRng) -> Self {
        CrossAttentionBlock {
            ppg: CrossDirection::init(&format!("{prefix}.ppg"), d, rng),
            aux: CrossDirection::init(&format!("{prefix}.aux"), d, rng),
            heads,
        }
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        let mut p = self.ppg.parameters();
        p.extend(self.aux.parameters());
        p
    }

    pub fn forward(&self, f_ppg: &Tensor, f_aux: &Tensor) -> Result<(Tensor, Tensor), TensorError> {
        if f_ppg.shape() != f_aux.shape() {
            return Err(TensorError::Shape(format!(
                "fusion streams differ: {:?} vs {:?}",
                f_ppg.shape(),
                f_aux.shape()
            )));
        }
        Ok((self.ppg.forward(f_ppg, f_aux, self.heads)?, self.aux.forward(f_aux, f_ppg, self.heads)?))
    }
}

/// Sigmoid-gated scalar weight per stream and batch element, normalised by
/// the pair's sum plus `eps`. The gate MLP is shared by both streams.
#[derive(Clone, Debug)]
pub struct AdaptiveWeighting {
    pub hidden: Dense,
    pub out: Dense,
    pub eps: f64,
}

impl AdaptiveWeighting {
    pub fn init(prefix: &str, d: usize, hidden: usize, eps: f64, rng: &mut SeededRng) -> Self {
        AdaptiveWeighting {
            hidden: Dense::init(&format!("{prefix}.mlp1"), d, hidden, rng),
            out: Dense::init(&format!("{prefix}.mlp2"), hidden, 1, rng),
            eps,
        }
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        let mut p = self.hidden.parameters();
        p.extend(self.out.parameters());
        p
    }

    /// `sigmoid(MLP(GAP(f)))`, shape `[b, 1]`.
    pub fn gate(&self, f: &Tensor) -> Result<Tensor, TensorError> {
        let h = self.hidden.forward(&global_avg_pool(f)?)?.leaky_relu(LEAKY_SLOPE);
        Ok(self.out.forward(&h)?.sigmoid())
    }

    /// Normalised weights `(w_ppg, w_aux)`, each `[b, 1]`.
    pub fn weights(&self, f_ppg: &Tensor, f_aux: &Tensor) -> Result<(Tensor, Tensor), TensorError> {
        let (a, b) = (self.gate(f_ppg)?, self.gate(f_aux)?);
        let denom = a.add(&b)?.add_scalar(self.eps);
        Ok((a.div(&denom)?, b.div(&denom)?))
    }

    pub fn forward(&self, f_ppg: &Tensor, f_aux: &Tensor) -> Result<Tensor, TensorError> {
        if f_ppg.shape() != f_aux.shape() || f_ppg.rank() != 3 {
            return Err(TensorError::Shape(format!(
                "weighting needs equal [b, T, d] streams, got {:?} and {:?}",
                f_ppg.shape(),
                f_aux.shape()
            )));
        }
        let b = f_ppg.shape()[0];
        let (wp, wa) = self.weights(f_ppg, f_aux)?;
        f_ppg.mul(&wp.reshape(&[b, 1, 1])?)?.add(&f_aux.mul(&wa.reshape(&[b, 1, 1])?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand(rng: &mut SeededRng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new((0..n).map(|_| rng.normal()).collect(), shape).unwrap()
    }

    #[test]
    fn outputs_keep_shape() {
        let mut rng = SeededRng::new(1);
        let blk = CrossAttentionBlock::init("f", 8, 2, &mut rng);
        let (p, y) = (rand(&mut rng, &[2, 5, 8]), rand(&mut rng, &[2, 5, 8]));
        let (p2, y2) = blk.forward(&p, &y).unwrap();
        assert_eq!(p2.shape(), &[2, 5, 8]);
        assert_eq!(y2.shape(), &[2, 5, 8]);
        assert!(blk.forward(&p, &rand(&mut rng, &[2, 4, 8])).is_err());
    }

    #[test]
    fn zero_mlp_gives_even_mix() {
        let mut rng = SeededRng::new(2);
        let w = AdaptiveWeighting::init("w", 4, 3, 1e-8, &mut rng);
        for p in w.parameters() {
            p.tensor.update_data(|d| d.fill(0.0));
        }
        let (a, b) = (rand(&mut rng, &[1, 3, 4]), rand(&mut rng, &[1, 3, 4]));
        let out = w.forward(&a, &b).unwrap();
        let (wp, wa) = w.weights(&a, &b).unwrap();
        assert!((wp.item() - 0.5 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(wp.item(), wa.item());
        for ((o, x), y) in out.data().iter().zip(a.data().iter()).zip(b.data().iter()) {
            assert!((o - (x + y) / 2.0).abs() < 1e-7);
        }
    }
}
