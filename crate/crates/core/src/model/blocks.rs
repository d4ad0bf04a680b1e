use crate::autodiff::ops::{conv1d, dense, layer_norm, max_pool1d, Padding};
use crate::autodiff::{Parameter, Tensor, TensorError};
use crate::rng::SeededRng;

pub(crate) const LEAKY_SLOPE: f64 = 0.01;
pub(crate) const NORM_EPS: f64 = 1e-5;

/// Xavier-uniform weights.
pub(crate) fn xavier(rng: &mut SeededRng, name: String, shape: &[usize], fan_in: usize, fan_out: usize) -> Parameter {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    Parameter::new(name, (0..n).map(|_| rng.uniform_range(-bound, bound)).collect(), shape)
}

pub(crate) fn filled(name: String, len: usize, value: f64) -> Parameter {
    Parameter::new(name, vec![value; len], &[len])
}

/// Encoder activations `[batch, channels, time]` plus how many time steps
/// are left per scored epoch.
#[derive(Clone, Debug)]
pub struct FeatureMap {
    pub tensor: Tensor,
    pub samples_per_epoch: usize,
}

impl FeatureMap {
    pub fn new(tensor: Tensor, samples_per_epoch: usize) -> Result<Self, TensorError> {
        let &[_, _, t] = tensor.shape() else {
            return Err(TensorError::Shape(format!("feature map must be [b, c, t], got {:?}", tensor.shape())));
        };
        if samples_per_epoch == 0 || t % samples_per_epoch != 0 {
            return Err(TensorError::Shape(format!("time {t} is not a multiple of {samples_per_epoch}")));
        }
        Ok(FeatureMap { tensor, samples_per_epoch })
    }

    pub fn channels(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn time(&self) -> usize {
        self.tensor.shape()[2]
    }

    pub fn epochs(&self) -> usize {
        self.time() / self.samples_per_epoch
    }
}

/// Layer norm over the channel axis of `[b, c, t]`.
fn channel_norm(x: &Tensor, gain: &Tensor, bias: &Tensor) -> Result<Tensor, TensorError> {
    layer_norm(&x.transpose(1, 2)?, gain, bias, NORM_EPS)?.transpose(1, 2)
}

/// conv(k=3) -> channel norm -> leaky ReLU -> conv(k=3) -> + skip -> max-pool 2.
#[derive(Clone, Debug)]
pub struct ResConvBlock {
    pub conv1_w: Parameter,
    pub conv1_b: Parameter,
    pub norm_g: Parameter,
    pub norm_b: Parameter,
    pub conv2_w: Parameter,
    pub conv2_b: Parameter,
    /// 1x1 projection when the channel count changes.
    pub skip_w: Option<Parameter>,
}

impl ResConvBlock {
    pub fn init(prefix: &str, c_in: usize, c_out: usize, rng: &mut SeededRng) -> Self {
        ResConvBlock {
            conv1_w: xavier(rng, format!("{prefix}.conv1.w"), &[c_out, c_in, 3], 3 * c_in, 3 * c_out),
            conv1_b: filled(format!("{prefix}.conv1.b"), c_out, 0.0),
            norm_g: filled(format!("{prefix}.norm.g"), c_out, 1.0),
            norm_b: filled(format!("{prefix}.norm.b"), c_out, 0.0),
            conv2_w: xavier(rng, format!("{prefix}.conv2.w"), &[c_out, c_out, 3], 3 * c_out, 3 * c_out),
            conv2_b: filled(format!("{prefix}.conv2.b"), c_out, 0.0),
            skip_w: (c_in != c_out).then(|| xavier(rng, format!("{prefix}.skip.w"), &[c_out, c_in, 1], c_in, c_out)),
        }
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        let mut p = vec![
            self.conv1_w.clone(),
            self.conv1_b.clone(),
            self.norm_g.clone(),
            self.norm_b.clone(),
            self.conv2_w.clone(),
            self.conv2_b.clone(),
        ];
        p.extend(self.skip_w.clone());
        p
    }

    pub fn out_channels(&self) -> usize {
        self.conv1_w.tensor.shape()[0]
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<FeatureMap, TensorError> {
        if input.time() % 2 != 0 || input.samples_per_epoch % 2 != 0 {
            return Err(TensorError::Shape(format!(
                "res_conv_block needs even time and steps per epoch, got {} and {}",
                input.time(),
                input.samples_per_epoch
            )));
        }
        let x = &input.tensor;
        let h = conv1d(x, &self.conv1_w.tensor, Some(&self.conv1_b.tensor), Padding::Same, 1)?;
        let h = channel_norm(&h, &self.norm_g.tensor, &self.norm_b.tensor)?.leaky_relu(LEAKY_SLOPE);
        let h = conv1d(&h, &self.conv2_w.tensor, Some(&self.conv2_b.tensor), Padding::Same, 1)?;
        let skip = match &self.skip_w {
            Some(w) => conv1d(x, &w.tensor, None, Padding::Valid, 1)?,
            None => x.clone(),
        };
        FeatureMap::new(max_pool1d(&h.add(&skip)?)?, input.samples_per_epoch / 2)
    }
}

/// `[b, c, t]` -> `[b, epochs, steps * c]`, flattened step-major: feature
/// `s * c + ch` of epoch `e` is `x[b, ch, e * steps + s]`.
pub fn temporal_window(features: &FeatureMap) -> Result<Tensor, TensorError> {
    let &[b, c, t] = features.tensor.shape() else { unreachable!() };
    let epochs = features.epochs();
    features.tensor.transpose(1, 2)?.reshape(&[b, epochs, (t / epochs) * c])
}

/// Inverse of [`temporal_window`] for a known channel count.
pub fn temporal_unwindow(windows: &Tensor, channels: usize) -> Result<FeatureMap, TensorError> {
    let &[b, epochs, f] = windows.shape() else {
        return Err(TensorError::Shape(format!("windows must be [b, e, f], got {:?}", windows.shape())));
    };
    if channels == 0 || f % channels != 0 {
        return Err(TensorError::Shape(format!("{f} features do not split into {channels} channels")));
    }
    let steps = f / channels;
    FeatureMap::new(windows.reshape(&[b, epochs * steps, channels])?.transpose(1, 2)?, steps)
}

/// Dilated non-causal convolutions, each followed by leaky ReLU, with a
/// residual connection around the stack.
#[derive(Clone, Debug)]
pub struct TcnBlock {
    pub convs: Vec<(Parameter, Parameter)>,
    pub dilations: Vec<usize>,
}

pub fn receptive_field(kernel: usize, dilations: &[usize]) -> usize {
    1 + (kernel - 1) * dilations.iter().sum::<usize>()
}

impl TcnBlock {
    pub fn init(prefix: &str, d: usize, kernel: usize, dilations: &[usize], rng: &mut SeededRng) -> Self {
        let convs = (0..dilations.len())
            .map(|i| {
                (
                    xavier(rng, format!("{prefix}.conv{i}.w"), &[d, d, kernel], d * kernel, d * kernel),
                    filled(format!("{prefix}.conv{i}.b"), d, 0.0),
                )
            })
            .collect();
        TcnBlock { convs, dilations: dilations.to_vec() }
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        self.convs.iter().flat_map(|(w, b)| [w.clone(), b.clone()]).collect()
    }

    pub fn receptive_field(&self) -> usize {
        let k = self.convs.first().map_or(1, |(w, _)| w.tensor.shape()[2]);
        receptive_field(k, &self.dilations)
    }

    /// Channel-first form: `[b, d, epochs]`.
    pub fn forward_cf(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        let mut h = x.clone();
        for ((w, b), &dil) in self.convs.iter().zip(&self.dilations) {
            h = conv1d(&h, &w.tensor, Some(&b.tensor), Padding::Same, dil)?.leaky_relu(LEAKY_SLOPE);
        }
        h.add(x)
    }

    /// `[b, epochs, d]` -> `[b, epochs, d]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        self.forward_cf(&x.transpose(1, 2)?)?.transpose(1, 2)
    }
}

/// Per-position affine map over the last axis.
#[derive(Clone, Debug)]
pub struct Dense {
    pub w: Parameter,
    pub b: Parameter,
}

impl Dense {
    pub fn init(prefix: &str, d_in: usize, d_out: usize, rng: &mut SeededRng) -> Self {
        Dense {
            w: xavier(rng, format!("{prefix}.w"), &[d_in, d_out], d_in, d_out),
            b: filled(format!("{prefix}.b"), d_out, 0.0),
        }
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        vec![self.w.clone(), self.b.clone()]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        dense(x, &self.w.tensor, &self.b.tensor)
    }
}
