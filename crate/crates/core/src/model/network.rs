use super::blocks::{temporal_window, Dense, FeatureMap, ResConvBlock, TcnBlock, LEAKY_SLOPE};
use super::fusion::{AdaptiveWeighting, CrossAttentionBlock};
use super::{ModelConfig, Variant};
use crate::autodiff::{no_grad, Parameter, Tensor, TensorError};
use crate::data::Stage;
use crate::rng::SeededRng;

/// Built network: encoders, optional fusion, per-epoch head.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub encoders: Vec<Vec<ResConvBlock>>,
    pub fusion: Vec<CrossAttentionBlock>,
    pub weighting: Option<AdaptiveWeighting>,
    pub epoch_dense: Dense,
    pub tcn: Vec<TcnBlock>,
    pub classifier: Dense,
}

/// Initialises every parameter from `seed` in a fixed order.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Model, TensorError> {
    config.validate()?;
    let mut rng = SeededRng::new(seed);
    let names = ["ppg", "aux"];
    let encoders = names[..config.variant.streams()]
        .iter()
        .map(|stream| {
            let mut c_in = 1;
            config
                .channel_schedule
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let blk = ResConvBlock::init(&format!("{stream}.block{i}"), c_in, c, &mut rng);
                    c_in = c;
                    blk
                })
                .collect()
        })
        .collect();
    let (fusion, weighting) = match config.variant {
        Variant::Single => (Vec::new(), None),
        Variant::Dual => (
            (0..config.fusion_blocks)
                .map(|i| CrossAttentionBlock::init(&format!("fusion{i}"), config.fusion_dim, config.heads, &mut rng))
                .collect(),
            Some(AdaptiveWeighting::init(
                "weighting",
                config.fusion_dim,
                config.weighting_hidden,
                config.epsilon_weighting,
                &mut rng,
            )),
        ),
    };
    let encoder_out = *config.channel_schedule.last().unwrap();
    let window = config.steps_per_epoch() * encoder_out;
    let epoch_dense = Dense::init("epoch_dense", window, config.dense_units, &mut rng);
    let tcn = (0..config.tcn_blocks)
        .map(|i| TcnBlock::init(&format!("tcn{i}"), config.dense_units, config.tcn_kernel, &config.tcn_dilations, &mut rng))
        .collect();
    let classifier = Dense::init("classifier", config.dense_units, config.classes, &mut rng);
    Ok(Model { config: config.clone(), encoders, fusion, weighting, epoch_dense, tcn, classifier })
}

impl Model {
    pub fn streams(&self) -> usize {
        self.encoders.len()
    }

    /// All trainable tensors in construction order.
    pub fn parameters(&self) -> Vec<Parameter> {
        let mut p: Vec<Parameter> = self.encoders.iter().flatten().flat_map(ResConvBlock::parameters).collect();
        p.extend(self.fusion.iter().flat_map(CrossAttentionBlock::parameters));
        p.extend(self.weighting.iter().flat_map(AdaptiveWeighting::parameters));
        p.extend(self.epoch_dense.parameters());
        p.extend(self.tcn.iter().flat_map(TcnBlock::parameters));
        p.extend(self.classifier.parameters());
        p
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.tensor.numel()).sum()
    }

    fn encode(&self, stream: usize, x: &Tensor) -> Result<FeatureMap, TensorError> {
        let mut fm = FeatureMap::new(x.clone(), self.config.epoch_samples)?;
        for blk in &self.encoders[stream] {
            fm = blk.forward(&fm)?;
        }
        Ok(fm)
    }

    /// One `[b, 1, n]` tensor per stream (PPG first) -> logits `[b, n / epoch_samples, classes]`.
    pub fn forward(&self, inputs: &[Tensor]) -> Result<Tensor, TensorError> {
        if inputs.len() != self.streams() {
            return Err(TensorError::Shape(format!(
                "{} variant takes {} input streams, got {}",
                self.config.variant,
                self.streams(),
                inputs.len()
            )));
        }
        let shape = inputs[0].shape();
        let ok = matches!(shape, &[b, 1, n] if b > 0 && n > 0 && n % self.config.epoch_samples == 0);
        if !ok || inputs.iter().any(|t| t.shape() != shape) {
            return Err(TensorError::Shape(format!(
                "inputs must share shape [b, 1, k * {}], got {:?}",
                self.config.epoch_samples,
                inputs.iter().map(|t| t.shape().to_vec()).collect::<Vec<_>>()
            )));
        }

        let features = match &self.weighting {
            None => self.encode(0, &inputs[0])?,
            Some(weighting) => {
                let ppg = self.encode(0, &inputs[0])?;
                let steps = ppg.samples_per_epoch;
                let mut fp = ppg.tensor.transpose(1, 2)?;
                drop(ppg);
                let mut fa = self.encode(1, &inputs[1])?.tensor.transpose(1, 2)?;
                for blk in &self.fusion {
                    (fp, fa) = blk.forward(&fp, &fa)?;
                }
                FeatureMap::new(weighting.forward(&fp, &fa)?.transpose(1, 2)?, steps)?
            }
        };
        let h = self.epoch_dense.forward(&temporal_window(&features)?)?.leaky_relu(LEAKY_SLOPE);
        drop(features);
        let mut h = h.transpose(1, 2)?;
        for blk in &self.tcn {
            h = blk.forward_cf(&h)?;
        }
        self.classifier.forward(&h.transpose(1, 2)?)
    }

    /// Per-epoch stages for one recording, without recording gradients.
    pub fn predict(&self, channels: &[&[f64]]) -> Result<Vec<Stage>, TensorError> {
        let n = channels.first().map_or(0, |c| c.len());
        if channels.iter().any(|c| c.len() != n) {
            return Err(TensorError::Shape("prediction channels differ in length".into()));
        }
        no_grad(|| {
            let inputs = channels
                .iter()
                .map(|c| Tensor::new(c.to_vec(), &[1, 1, n]))
                .collect::<Result<Vec<_>, _>>()?;
            let logits = self.forward(&inputs)?;
            let data = logits.data();
            Ok(argmax_stages(&data, self.config.classes))
        })
    }
}

/// Row-wise argmax over `classes`-wide rows; ties go to the lowest index.
pub fn argmax_stages(logits: &[f64], classes: usize) -> Vec<Stage> {
    logits
        .chunks(classes)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            Stage::from_index(best).expect("four classes")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_low() {
        assert_eq!(argmax_stages(&[0.0; 8], 4), vec![Stage::Wake, Stage::Wake]);
        assert_eq!(argmax_stages(&[1.0, 3.0, 3.0, 2.0], 4), vec![Stage::Light]);
    }

    #[test]
    fn argmax_shift_invariant() {
        let mut rng = SeededRng::new(1);
        let logits: Vec<f64> = (0..400).map(|_| rng.normal()).collect();
        let shifted: Vec<f64> =
            logits.chunks(4).enumerate().flat_map(|(i, r)| r.iter().map(move |v| v + i as f64 * 3.7 - 50.0)).collect();
        assert_eq!(argmax_stages(&logits, 4), argmax_stages(&shifted, 4));
    }

    #[test]
    fn same_seed_same_parameters() {
        let bits = |seed| {
            build_model(&ModelConfig::mini_dual(), seed)
                .unwrap()
                .parameters()
                .iter()
                .flat_map(|p| p.tensor.to_vec())
                .map(f64::to_bits)
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(4), bits(4));
        assert_ne!(bits(4), bits(5));
    }

    #[test]
    fn parameter_names_unique() {
        let m = build_model(&ModelConfig::desk(Variant::Dual), 0).unwrap();
        let mut names: Vec<String> = m.parameters().into_iter().map(|p| p.name).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }

    #[test]
    fn desk_forward_shapes() {
        for variant in [Variant::Single, Variant::Dual] {
            let m = build_model(&ModelConfig::desk(variant), 1).unwrap();
            let x = Tensor::zeros(&[2, 1, 3 * 1024]);
            let inputs = vec![x; variant.streams()];
            assert_eq!(m.forward(&inputs).unwrap().shape(), &[2, 3, 4]);
        }
    }

    #[test]
    fn predict_checks_inputs() {
        let m = build_model(&ModelConfig::tiny_dual(), 1).unwrap();
        let a = vec![0.1; 16];
        assert_eq!(m.predict(&[&a, &a]).unwrap().len(), 2);
        assert!(m.predict(&[&a]).is_err());
        assert!(m.predict(&[&a, &a[..8]]).is_err());
        assert!(m.predict(&[&a[..12], &a[..12]]).is_err());
    }
}
