//! Stateful layer wrappers around the functional kernels: parameters,
//! running statistics, and the forward caches consumed by backward.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};

use super::ops;
use super::scalar::Scalar;
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn no_cache(op: &str) -> Error {
    Error::NumericalFailure(format!("{op}: backward called without a cached forward"))
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Conv2dLayer<T: Scalar> {
    pub weight: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
    cache: Option<Tensor<T>>,
    scratch: ops::ConvScratch<T>,
}

impl<T: Scalar> Conv2dLayer<T> {
    /// He-normal initialization: std = sqrt(2 / fan_in).
    pub fn new<R: Rng>(
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_c * k * k;
        let std = (2.0 / fan_in as f64).sqrt();
        let data: Vec<T> = (0..out_c * in_c * k * k)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                T::of_f64(z * std)
            })
            .collect();
        Self {
            weight: Tensor::from_vec(&[out_c, in_c, k, k], data)
                .expect("conv weight shape")
                .into_parameter(),
            stride,
            padding,
            cache: None,
            scratch: ops::ConvScratch::default(),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, keep: bool) -> Result<Tensor<T>> {
        let y = ops::conv2d_scratch(x, &self.weight, self.stride, self.padding, &mut self.scratch)?;
        self.cache = keep.then(|| x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or_else(|| no_cache("conv2d"))?;
        let (dx, dw) = ops::conv2d_backward_scratch(
            &x,
            &self.weight,
            grad_out,
            self.stride,
            self.padding,
            &mut self.scratch,
        )?;
        self.weight.accumulate_grad(dw.data())?;
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BatchNorm2dLayer<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<ops::BnCache<T>>,
}

impl<T: Scalar> BatchNorm2dLayer<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::from_vec(&[channels], vec![T::one(); channels])
                .expect("gamma")
                .into_parameter(),
            beta: Tensor::zeros(&[channels]).into_parameter(),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match mode {
            Mode::Train => {
                let (y, cache) = ops::batch_norm2d_train(
                    x,
                    &self.gamma,
                    &self.beta,
                    &mut self.running_mean,
                    &mut self.running_var,
                    self.momentum,
                    self.eps,
                )?;
                self.cache = Some(cache);
                Ok(y)
            }
            Mode::Eval => ops::batch_norm2d_eval(
                x,
                &self.gamma,
                &self.beta,
                &self.running_mean,
                &self.running_var,
                self.eps,
            ),
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.take().ok_or_else(|| no_cache("batch_norm2d"))?;
        let (dx, dg, db) = ops::batch_norm2d_backward(grad_out, &cache, &self.gamma)?;
        self.gamma.accumulate_grad(&dg)?;
        self.beta.accumulate_grad(&db)?;
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct ReluLayer {
    mask: Option<Vec<bool>>,
}

impl ReluLayer {
    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>, keep: bool) -> Tensor<T> {
        let (y, mask) = ops::relu(x);
        self.mask = keep.then_some(mask);
        y
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self.mask.take().ok_or_else(|| no_cache("relu"))?;
        ops::relu_backward(grad_out, &mask)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MaxPoolLayer {
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
    cache: Option<(Vec<u32>, Vec<usize>)>,
}

impl MaxPoolLayer {
    pub fn new(k: usize, stride: usize, padding: usize) -> Self {
        Self {
            k,
            stride,
            padding,
            cache: None,
        }
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>, keep: bool) -> Result<Tensor<T>> {
        let (y, argmax) = ops::max_pool2d(x, self.k, self.stride, self.padding)?;
        self.cache = keep.then(|| (argmax, x.shape().to_vec()));
        Ok(y)
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (argmax, shape) = self.cache.take().ok_or_else(|| no_cache("max_pool2d"))?;
        ops::max_pool2d_backward(grad_out, &argmax, &shape)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPoolLayer {
    in_shape: Option<Vec<usize>>,
}

impl GlobalAvgPoolLayer {
    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>, keep: bool) -> Result<Tensor<T>> {
        let y = ops::adaptive_avg_pool(x)?;
        self.in_shape = keep.then(|| x.shape().to_vec());
        Ok(y)
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self
            .in_shape
            .take()
            .ok_or_else(|| no_cache("adaptive_avg_pool"))?;
        ops::adaptive_avg_pool_backward(grad_out, &shape)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LinearLayer<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> LinearLayer<T> {
    /// PyTorch-style uniform fan-in init for weight and bias.
    pub fn new<R: Rng>(in_f: usize, out_f: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_f as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("uniform bounds");
        let mut draw = |n: usize| -> Vec<T> {
            (0..n).map(|_| T::of_f64(dist.sample(rng))).collect()
        };
        let weight = draw(out_f * in_f);
        let bias = draw(out_f);
        Self {
            weight: Tensor::from_vec(&[out_f, in_f], weight)
                .expect("linear weight")
                .into_parameter(),
            bias: Tensor::from_vec(&[out_f], bias)
                .expect("linear bias")
                .into_parameter(),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, keep: bool) -> Result<Tensor<T>> {
        let y = ops::linear(x, &self.weight, &self.bias)?;
        self.cache = keep.then(|| x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or_else(|| no_cache("linear"))?;
        let (dx, dw, db) = ops::linear_backward(&x, &self.weight, grad_out)?;
        self.weight.accumulate_grad(dw.data())?;
        self.bias.accumulate_grad(&db)?;
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DropoutLayer<T: Scalar> {
    pub p: f64,
    mask: Option<Vec<T>>,
}

impl<T: Scalar> DropoutLayer<T> {
    pub fn new(p: f64) -> Self {
        Self { p, mask: None }
    }

    pub fn forward<R: Rng>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        match mode {
            Mode::Train => {
                let (y, mask) = ops::dropout(x, self.p, rng)?;
                self.mask = Some(mask);
                Ok(y)
            }
            Mode::Eval => Ok(x.clone()),
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self.mask.take().ok_or_else(|| no_cache("dropout"))?;
        ops::dropout_backward(grad_out, &mask)
    }
}

// ---------------------------------------------------------------------------

/// Two 3x3 conv + BN pairs with an identity (or 1x1-projected) shortcut.
#[derive(Debug, Clone)]
pub struct BasicBlock<T: Scalar> {
    pub conv1: Conv2dLayer<T>,
    pub bn1: BatchNorm2dLayer<T>,
    relu1: ReluLayer,
    pub conv2: Conv2dLayer<T>,
    pub bn2: BatchNorm2dLayer<T>,
    pub downsample: Option<(Conv2dLayer<T>, BatchNorm2dLayer<T>)>,
    relu_out: ReluLayer,
}

impl<T: Scalar> BasicBlock<T> {
    pub fn new<R: Rng>(in_c: usize, out_c: usize, stride: usize, rng: &mut R) -> Self {
        let downsample = (stride != 1 || in_c != out_c).then(|| {
            (
                Conv2dLayer::new(in_c, out_c, 1, stride, 0, rng),
                BatchNorm2dLayer::new(out_c),
            )
        });
        Self {
            conv1: Conv2dLayer::new(in_c, out_c, 3, stride, 1, rng),
            bn1: BatchNorm2dLayer::new(out_c),
            relu1: ReluLayer::default(),
            conv2: Conv2dLayer::new(out_c, out_c, 3, 1, 1, rng),
            bn2: BatchNorm2dLayer::new(out_c),
            downsample,
            relu_out: ReluLayer::default(),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let keep = mode == Mode::Train;
        let main = self.conv1.forward(x, keep)?;
        let main = self.bn1.forward(&main, mode)?;
        let main = self.relu1.forward(&main, keep);
        let main = self.conv2.forward(&main, keep)?;
        let mut main = self.bn2.forward(&main, mode)?;
        let shortcut = match &mut self.downsample {
            Some((conv, bn)) => {
                let s = conv.forward(x, keep)?;
                bn.forward(&s, mode)?
            }
            None => x.clone(),
        };
        if main.shape() != shortcut.shape() {
            return Err(Error::shape(
                "basic_block",
                format!("{:?} vs {:?}", main.shape(), shortcut.shape()),
            ));
        }
        for (m, s) in main.data_mut().iter_mut().zip(shortcut.data()) {
            *m += *s;
        }
        Ok(self.relu_out.forward(&main, keep))
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.relu_out.backward(grad_out)?;
        let gm = self.bn2.backward(&g)?;
        let gm = self.conv2.backward(&gm)?;
        let gm = self.relu1.backward(&gm)?;
        let gm = self.bn1.backward(&gm)?;
        let mut gx = self.conv1.backward(&gm)?;
        let gs = match &mut self.downsample {
            Some((conv, bn)) => {
                let t = bn.backward(&g)?;
                conv.backward(&t)?
            }
            None => g,
        };
        for (a, b) in gx.data_mut().iter_mut().zip(gs.data()) {
            *a += *b;
        }
        Ok(gx)
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&format!("{prefix}.conv1.weight"), &mut self.conv1.weight);
        f(&format!("{prefix}.bn1.weight"), &mut self.bn1.gamma);
        f(&format!("{prefix}.bn1.bias"), &mut self.bn1.beta);
        f(&format!("{prefix}.conv2.weight"), &mut self.conv2.weight);
        f(&format!("{prefix}.bn2.weight"), &mut self.bn2.gamma);
        f(&format!("{prefix}.bn2.bias"), &mut self.bn2.beta);
        if let Some((conv, bn)) = &mut self.downsample {
            f(&format!("{prefix}.downsample.0.weight"), &mut conv.weight);
            f(&format!("{prefix}.downsample.1.weight"), &mut bn.gamma);
            f(&format!("{prefix}.downsample.1.bias"), &mut bn.beta);
        }
    }

    pub fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Vec<T>)) {
        f(&format!("{prefix}.bn1.running_mean"), &mut self.bn1.running_mean);
        f(&format!("{prefix}.bn1.running_var"), &mut self.bn1.running_var);
        f(&format!("{prefix}.bn2.running_mean"), &mut self.bn2.running_mean);
        f(&format!("{prefix}.bn2.running_var"), &mut self.bn2.running_var);
        if let Some((_, bn)) = &mut self.downsample {
            f(&format!("{prefix}.downsample.1.running_mean"), &mut bn.running_mean);
            f(&format!("{prefix}.downsample.1.running_var"), &mut bn.running_var);
        }
    }
}
