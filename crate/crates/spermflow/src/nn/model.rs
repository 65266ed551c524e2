//! Model construction: ResNet-18/34 backbones (plus a tiny test variant)
//! with a 9-channel input stem and either a plain linear head (M1) or a
//! dropout MLP head (M2).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::layers::{
    BasicBlock, BatchNorm2dLayer, Conv2dLayer, DropoutLayer, GlobalAvgPoolLayer, LinearLayer,
    MaxPoolLayer, ReluLayer,
};
use super::scalar::Scalar;
use super::tensor::Tensor;

pub use super::layers::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Resnet34,
    Resnet18,
    /// Two short stages at widths [8, 16]; used by tests and fixtures.
    Tiny,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "resnet34" => Ok(Variant::Resnet34),
            "resnet18" => Ok(Variant::Resnet18),
            "tiny" => Ok(Variant::Tiny),
            other => Err(Error::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    M1,
    M2,
}

impl std::fmt::Display for HeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeadKind::M1 => "M1",
            HeadKind::M2 => "M2",
        })
    }
}

impl std::str::FromStr for HeadKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "M1" => Ok(HeadKind::M1),
            "M2" => Ok(HeadKind::M2),
            other => Err(Error::InvalidModelConfig(format!("unknown head {other}"))),
        }
    }
}

/// (width, block count) per stage.
pub fn stage_spec(variant: Variant) -> &'static [(usize, usize)] {
    match variant {
        Variant::Resnet34 => &[(64, 3), (128, 4), (256, 6), (512, 3)],
        Variant::Resnet18 => &[(64, 2), (128, 2), (256, 2), (512, 2)],
        Variant::Tiny => &[(8, 1), (16, 1)],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub in_channels: usize,
    pub head: HeadKind,
    /// Hidden widths of the M2 MLP (ignored for M1).
    pub mlp_widths: Vec<usize>,
    /// Dropout probability after each hidden MLP layer; same length as
    /// `mlp_widths`.
    pub dropout_probs: Vec<f64>,
    pub num_outputs: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Resnet34,
            in_channels: 9,
            head: HeadKind::M1,
            mlp_widths: vec![256, 64],
            dropout_probs: vec![0.5, 0.5],
            num_outputs: 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 {
            return Err(Error::InvalidModelConfig("in_channels must be >= 1".into()));
        }
        if self.num_outputs != 3 {
            return Err(Error::InvalidModelConfig(format!(
                "num_outputs must be 3, got {}",
                self.num_outputs
            )));
        }
        if self.mlp_widths.len() != self.dropout_probs.len() {
            return Err(Error::InvalidModelConfig(format!(
                "mlp_widths ({}) and dropout_probs ({}) lengths differ",
                self.mlp_widths.len(),
                self.dropout_probs.len()
            )));
        }
        if self.mlp_widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidModelConfig("zero MLP width".into()));
        }
        for &p in &self.dropout_probs {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidModelConfig(format!(
                    "dropout prob {p} not in [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct M2Hidden<T: Scalar> {
    fc: LinearLayer<T>,
    relu: ReluLayer,
    dropout: DropoutLayer<T>,
}

#[derive(Debug, Clone)]
enum Head<T: Scalar> {
    M1 {
        fc: LinearLayer<T>,
    },
    M2 {
        hidden: Vec<M2Hidden<T>>,
        fc_out: LinearLayer<T>,
    },
}

/// A built network: parameter layers plus a dropout RNG, confined to one
/// training thread at a time. Eval-mode inference on a clone is pure.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    pub config: ModelConfig,
    mode: Mode,
    seed: u64,
    conv1: Conv2dLayer<T>,
    bn1: BatchNorm2dLayer<T>,
    relu1: ReluLayer,
    maxpool: MaxPoolLayer,
    stages: Vec<Vec<BasicBlock<T>>>,
    avgpool: GlobalAvgPoolLayer,
    head: Head<T>,
    dropout_rng: ChaCha8Rng,
}

/// All model randomness (init, dropout) flows from `seed`.
pub fn build_model<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<Model<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = stage_spec(config.variant);
    let stem_width = spec[0].0;

    let conv1 = Conv2dLayer::new(config.in_channels, stem_width, 7, 2, 3, &mut rng);
    let bn1 = BatchNorm2dLayer::new(stem_width);
    let maxpool = MaxPoolLayer::new(3, 2, 1);

    let mut stages = Vec::with_capacity(spec.len());
    let mut in_c = stem_width;
    for (si, &(width, blocks)) in spec.iter().enumerate() {
        let mut stage = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let stride = if si > 0 && b == 0 { 2 } else { 1 };
            stage.push(BasicBlock::new(in_c, width, stride, &mut rng));
            in_c = width;
        }
        stages.push(stage);
    }

    let feat = in_c;
    let head = match config.head {
        HeadKind::M1 => Head::M1 {
            fc: LinearLayer::new(feat, config.num_outputs, &mut rng),
        },
        HeadKind::M2 => {
            let mut hidden = Vec::new();
            let mut prev = feat;
            for (&w, &p) in config.mlp_widths.iter().zip(&config.dropout_probs) {
                hidden.push(M2Hidden {
                    fc: LinearLayer::new(prev, w, &mut rng),
                    relu: ReluLayer::default(),
                    dropout: DropoutLayer::new(p),
                });
                prev = w;
            }
            Head::M2 {
                hidden,
                fc_out: LinearLayer::new(prev, config.num_outputs, &mut rng),
            }
        }
    };

    Ok(Model {
        config: config.clone(),
        mode: Mode::Eval,
        seed,
        conv1,
        bn1,
        relu1: ReluLayer::default(),
        maxpool,
        stages,
        avgpool: GlobalAvgPoolLayer::default(),
        head,
        dropout_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15),
    })
}

impl<T: Scalar> Model<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Re-seeds the dropout mask stream (used to freeze masks in the
    /// gradient-check harness).
    pub fn reset_dropout_rng(&mut self, seed: u64) {
        self.dropout_rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, c, _, _) = x.dims4()?;
        if c != self.config.in_channels {
            return Err(Error::shape(
                "model_forward",
                format!("input channels {c} != configured {}", self.config.in_channels),
            ));
        }
        let keep = self.mode == Mode::Train;
        let mode = self.mode;

        let t = self.conv1.forward(x, keep)?;
        let t = self.bn1.forward(&t, mode)?;
        let t = self.relu1.forward(&t, keep);
        let mut t = self.maxpool.forward(&t, keep)?;
        for stage in &mut self.stages {
            for block in stage {
                t = block.forward(&t, mode)?;
            }
        }
        let t = self.avgpool.forward(&t, keep)?;
        let n = t.shape()[0];
        let feat = t.shape()[1];
        let t = t.reshape(&[n, feat])?;

        let out = match &mut self.head {
            Head::M1 { fc } => fc.forward(&t, keep)?,
            Head::M2 { hidden, fc_out } => {
                let mut h = t;
                for layer in hidden {
                    h = layer.fc.forward(&h, keep)?;
                    h = layer.relu.forward(&h, keep);
                    h = layer.dropout.forward(&h, mode, &mut self.dropout_rng)?;
                }
                fc_out.forward(&h, keep)?
            }
        };
        if !out.is_finite() {
            return Err(Error::NumericalFailure(
                "non-finite values in forward output".into(),
            ));
        }
        Ok(out)
    }

    /// Reverse-mode pass: accumulates gradients for every parameter and
    /// consumes the forward caches.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<()> {
        let g = match &mut self.head {
            Head::M1 { fc } => fc.backward(grad_out)?,
            Head::M2 { hidden, fc_out } => {
                let mut g = fc_out.backward(grad_out)?;
                for layer in hidden.iter_mut().rev() {
                    g = layer.dropout.backward(&g)?;
                    g = layer.relu.backward(&g)?;
                    g = layer.fc.backward(&g)?;
                }
                g
            }
        };
        let n = g.shape()[0];
        let feat = g.shape()[1];
        let g = g.reshape(&[n, feat, 1, 1])?;
        let mut g = self.avgpool.backward(&g)?;
        for stage in self.stages.iter_mut().rev() {
            for block in stage.iter_mut().rev() {
                g = block.backward(&g)?;
            }
        }
        let g = self.maxpool.backward(&g)?;
        let g = self.relu1.backward(&g)?;
        let g = self.bn1.backward(&g)?;
        self.conv1.backward(&g)?;
        Ok(())
    }

    /// Visits every trainable parameter in a stable order with
    /// torchvision-style names.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f("conv1.weight", &mut self.conv1.weight);
        f("bn1.weight", &mut self.bn1.gamma);
        f("bn1.bias", &mut self.bn1.beta);
        for (si, stage) in self.stages.iter_mut().enumerate() {
            for (bi, block) in stage.iter_mut().enumerate() {
                block.visit_params(&format!("layer{}.{}", si + 1, bi), f);
            }
        }
        match &mut self.head {
            Head::M1 { fc } => {
                f("fc.weight", &mut fc.weight);
                f("fc.bias", &mut fc.bias);
            }
            Head::M2 { hidden, fc_out } => {
                for (i, layer) in hidden.iter_mut().enumerate() {
                    f(&format!("fc{}.weight", i + 1), &mut layer.fc.weight);
                    f(&format!("fc{}.bias", i + 1), &mut layer.fc.bias);
                }
                let i = hidden.len() + 1;
                f(&format!("fc{i}.weight"), &mut fc_out.weight);
                f(&format!("fc{i}.bias"), &mut fc_out.bias);
            }
        }
    }

    /// Visits the non-trainable state (batch-norm running statistics).
    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(&str, &mut Vec<T>)) {
        f("bn1.running_mean", &mut self.bn1.running_mean);
        f("bn1.running_var", &mut self.bn1.running_var);
        for (si, stage) in self.stages.iter_mut().enumerate() {
            for (bi, block) in stage.iter_mut().enumerate() {
                block.visit_buffers(&format!("layer{}.{}", si + 1, bi), f);
            }
        }
    }

    pub fn num_params(&mut self) -> usize {
        let mut total = 0;
        self.visit_params(&mut |_, t| total += t.numel());
        total
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(&mut |_, t| t.zero_grad());
    }

    /// Copies all parameters and buffers out (best-checkpoint retention).
    pub fn snapshot(&mut self) -> ModelSnapshot<T> {
        let mut params = Vec::new();
        self.visit_params(&mut |name, t| params.push((name.to_string(), t.data().to_vec())));
        let mut buffers = Vec::new();
        self.visit_buffers(&mut |name, b| buffers.push((name.to_string(), b.clone())));
        ModelSnapshot { params, buffers }
    }

    pub fn restore(&mut self, snap: &ModelSnapshot<T>) -> Result<()> {
        let mut i = 0;
        let mut err = None;
        self.visit_params(&mut |name, t| {
            if err.is_some() {
                return;
            }
            if i >= snap.params.len() || snap.params[i].0 != name {
                err = Some(format!("snapshot param order mismatch at {name}"));
                return;
            }
            t.data_mut().copy_from_slice(&snap.params[i].1);
            i += 1;
        });
        let mut j = 0;
        self.visit_buffers(&mut |name, b| {
            if err.is_some() {
                return;
            }
            if j >= snap.buffers.len() || snap.buffers[j].0 != name {
                err = Some(format!("snapshot buffer order mismatch at {name}"));
                return;
            }
            b.copy_from_slice(&snap.buffers[j].1);
            j += 1;
        });
        match err {
            Some(e) => Err(Error::InvalidModelConfig(e)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelSnapshot<T: Scalar> {
    pub params: Vec<(String, Vec<T>)>,
    pub buffers: Vec<(String, Vec<T>)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(head: HeadKind) -> ModelConfig {
        ModelConfig {
            variant: Variant::Tiny,
            in_channels: 9,
            head,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn tiny_forward_shapes() {
        let mut model = build_model::<f32>(&tiny_config(HeadKind::M1), 7).unwrap();
        let x = Tensor::zeros(&[2, 9, 16, 16]);
        let y = model.forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
        assert!(y.is_finite());
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let mut model = build_model::<f32>(&tiny_config(HeadKind::M2), 9).unwrap();
        model.set_mode(Mode::Eval);
        let x = Tensor::from_vec(
            &[1, 9, 16, 16],
            (0..9 * 256).map(|i| (i % 17) as f32 / 17.0).collect(),
        )
        .unwrap();
        let a = model.forward(&x).unwrap();
        let b = model.forward(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn wrong_channel_count_rejected() {
        let mut model = build_model::<f32>(&tiny_config(HeadKind::M1), 7).unwrap();
        let x = Tensor::zeros(&[1, 3, 16, 16]);
        assert!(model.forward(&x).is_err());
    }

    #[test]
    fn zero_final_layer_predicts_bias() {
        let mut model = build_model::<f32>(&tiny_config(HeadKind::M1), 3).unwrap();
        model.visit_params(&mut |name, t| {
            if name == "fc.weight" {
                t.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
            if name == "fc.bias" {
                t.data_mut().copy_from_slice(&[1.5, -2.0, 0.25]);
            }
        });
        let x = Tensor::zeros(&[2, 9, 16, 16]);
        let y = model.forward(&x).unwrap();
        for row in y.data().chunks_exact(3) {
            assert_eq!(row, &[1.5, -2.0, 0.25]);
        }
    }

    #[test]
    fn zero_gamma_residual_blocks_reduce_to_shortcut() {
        // With bn2.gamma = 0 and beta = 0 the main branch vanishes; the block
        // output is relu(shortcut(x)).
        let mut model = build_model::<f32>(&tiny_config(HeadKind::M1), 21).unwrap();
        let x = Tensor::from_vec(
            &[1, 9, 16, 16],
            (0..9 * 256).map(|i| ((i * 31) % 101) as f32 / 101.0).collect(),
        )
        .unwrap();
        model.set_mode(Mode::Eval);

        // Capture input to stage 1 by running the stem manually on a clone.
        let mut stem = model.clone();
        let t = stem.conv1.forward(&x, false).unwrap();
        let t = stem.bn1.forward(&t, Mode::Eval).unwrap();
        let t = stem.relu1.forward(&t, false);
        let stem_out = stem.maxpool.forward(&t, false).unwrap();

        // Zero every bn2 in stage 1 (no downsample there, identity shortcut).
        let block = &mut model.stages[0][0];
        block.bn2.gamma.data_mut().iter_mut().for_each(|v| *v = 0.0);
        block.bn2.beta.data_mut().iter_mut().for_each(|v| *v = 0.0);
        let out = model.stages[0][0].forward(&stem_out, Mode::Eval).unwrap();

        let (expect, _) = crate::nn::ops::relu(&stem_out);
        assert_eq!(out.data(), expect.data());
    }

    #[test]
    fn snapshot_restore_round_trip() {
        let mut model = build_model::<f32>(&tiny_config(HeadKind::M2), 5).unwrap();
        let snap = model.snapshot();
        model.visit_params(&mut |_, t| t.data_mut().iter_mut().for_each(|v| *v += 1.0));
        model.restore(&snap).unwrap();
        let snap2 = model.snapshot();
        for ((n1, d1), (n2, d2)) in snap.params.iter().zip(&snap2.params) {
            assert_eq!(n1, n2);
            assert_eq!(d1, d2);
        }
    }

    #[test]
    fn unknown_variant_is_error() {
        assert!("resnet50".parse::<Variant>().is_err());
        assert!("tiny".parse::<Variant>().is_ok());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ModelConfig::default();
        cfg.num_outputs = 4;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default();
        cfg.dropout_probs = vec![0.5];
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::default();
        cfg.dropout_probs = vec![0.5, 1.0];
        assert!(cfg.validate().is_err());
    }
}
