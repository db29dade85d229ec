use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    add_bias, bias_grad, bn_backward, bn_eval_forward, bn_train_forward, relu_backward, relu_inplace, tconv_backward,
    tconv_forward, update_running, BnCache, ConvGeom,
};
use crate::error::{Error, Result};
use crate::pixelmap::{PixelImage, CHANNELS};
use crate::scalar::Real;

/// One transpose-convolution stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// Batch normalization followed by ReLU; otherwise a plain bias.
    pub norm_relu: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl ArchSpec {
    /// `1x1xP -> 4x4` (k4 s1) followed by stride-2 stages doubling the
    /// resolution up to `width`; channel counts start at `base` and halve per
    /// stage (never below 8); the last stage is linear with 4 outputs.
    pub fn decoder(input_dim: usize, width: usize, base: usize) -> Result<Self> {
        if width < 8 || !width.is_power_of_two() {
            return Err(Error::Invalid(format!("output width {width} must be a power of two >= 8")));
        }
        let stages = (width / 4).trailing_zeros() as usize;
        let mut layers = vec![LayerSpec { cin: input_dim, cout: base, kernel: 4, stride: 1, pad: 0, norm_relu: true }];
        let mut c = base;
        for s in 0..stages {
            let last = s + 1 == stages;
            let cout = if last { CHANNELS } else { (c / 2).max(8) };
            layers.push(LayerSpec { cin: c, cout, kernel: 4, stride: 2, pad: 1, norm_relu: !last });
            c = cout;
        }
        Ok(Self { input_dim, layers })
    }

    /// Desk-scale decoder: channels 256, 128, 64, 32 then 4.
    pub fn desk(input_dim: usize, width: usize) -> Result<Self> {
        Self::decoder(input_dim, width, 256)
    }

    /// Full-size decoder: 90 inputs, 512x512x4 output.
    pub fn full_scale() -> Self {
        Self::decoder(90, 512, 256).expect("valid")
    }

    pub fn output_width(&self) -> usize {
        self.layers.iter().fold(1, |h, l| (h - 1) * l.stride + l.kernel - 2 * l.pad)
    }

    pub fn validate(&self) -> Result<()> {
        let mut c = self.input_dim;
        let mut h = 1usize;
        for (i, l) in self.layers.iter().enumerate() {
            if l.cin != c || l.kernel == 0 || l.stride == 0 || (h - 1) * l.stride + l.kernel <= 2 * l.pad {
                return Err(Error::Shape(format!("layer {i} does not chain")));
            }
            h = (h - 1) * l.stride + l.kernel - 2 * l.pad;
            c = l.cout;
        }
        if c != CHANNELS || self.layers.is_empty() {
            return Err(Error::Shape(format!("decoder must end with {CHANNELS} channels")));
        }
        Ok(())
    }
}

/// A named contiguous range of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderModel<T> {
    pub arch: ArchSpec,
    /// Trainable parameters, layer by layer: kernel, then gamma and beta
    /// (normalized layers) or bias.
    pub params: Vec<T>,
    /// Running mean and variance per normalized layer.
    pub running: Vec<T>,
    pub seed: u64,
    pub step: u64,
}

#[derive(Clone, Copy, Debug)]
struct Offsets {
    weight: usize,
    /// gamma or bias
    a: usize,
    /// beta (normalized layers)
    b: usize,
    rmean: usize,
    rvar: usize,
}

/// Activations retained by a training-mode forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    batch: usize,
    inputs: Vec<Vec<T>>,
    outputs: Vec<Vec<T>>,
    bn: Vec<Option<BnCache<T>>>,
}

impl<T: Real> DecoderModel<T> {
    pub fn new(arch: ArchSpec, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut running = Vec::new();
        for l in &arch.layers {
            let k2 = l.kernel * l.kernel;
            let bound = (6.0 / ((l.cin * k2 + l.cout * k2) as f64)).sqrt();
            params.extend((0..l.cin * k2 * l.cout).map(|_| T::lit(rng.gen_range(-bound..bound))));
            if l.norm_relu {
                params.extend(std::iter::repeat(T::one()).take(l.cout));
                params.extend(std::iter::repeat(T::zero()).take(l.cout));
                running.extend(std::iter::repeat(T::zero()).take(l.cout));
                running.extend(std::iter::repeat(T::one()).take(l.cout));
            } else {
                params.extend(std::iter::repeat(T::zero()).take(l.cout));
            }
        }
        Ok(Self { arch, params, running, seed, step: 0 })
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    pub fn output_width(&self) -> usize {
        self.arch.output_width()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> Vec<Offsets> {
        let mut p = 0;
        let mut r = 0;
        self.arch
            .layers
            .iter()
            .map(|l| {
                let weight = p;
                p += l.cin * l.kernel * l.kernel * l.cout;
                let a = p;
                p += l.cout;
                let b = p;
                let (rmean, rvar) = (r, r + l.cout);
                if l.norm_relu {
                    p += l.cout;
                    r += 2 * l.cout;
                }
                Offsets { weight, a, b, rmean, rvar }
            })
            .collect()
    }

    /// Named parameter blocks in declaration order.
    pub fn blocks(&self) -> Vec<Block> {
        let mut out = Vec::new();
        for (i, (l, o)) in self.arch.layers.iter().zip(self.offsets()).enumerate() {
            out.push(Block {
                name: format!("layer{i}.weight"),
                offset: o.weight,
                len: l.cin * l.kernel * l.kernel * l.cout,
            });
            if l.norm_relu {
                out.push(Block { name: format!("layer{i}.gamma"), offset: o.a, len: l.cout });
                out.push(Block { name: format!("layer{i}.beta"), offset: o.b, len: l.cout });
            } else {
                out.push(Block { name: format!("layer{i}.bias"), offset: o.a, len: l.cout });
            }
        }
        out
    }

    /// Index of the final layer's kernel block.
    pub fn last_layer_weight(&self) -> Block {
        let n = self.arch.layers.len() - 1;
        self.blocks().into_iter().find(|b| b.name == format!("layer{n}.weight")).unwrap()
    }

    fn geom(&self, l: &LayerSpec, batch: usize, h: usize) -> ConvGeom {
        ConvGeom { batch, h, w: h, cin: l.cin, cout: l.cout, k: l.kernel, stride: l.stride, pad: l.pad }
    }

    /// Forward pass over `batch` inputs stored row-wise in `x`. Returns the
    /// NHWC output and, in training mode, the cache for [`Self::backward`].
    pub fn forward_batch(&self, x: &[T], batch: usize, mode: Mode) -> Result<(Vec<T>, Option<ForwardCache<T>>)> {
        if batch == 0 || x.len() != batch * self.input_dim() {
            return Err(Error::Shape(format!(
                "expected {batch} x {} inputs, got {} values",
                self.input_dim(),
                x.len()
            )));
        }
        let offs = self.offsets();
        let mut cache = ForwardCache { batch, inputs: Vec::new(), outputs: Vec::new(), bn: Vec::new() };
        let mut act = x.to_vec();
        let mut h = 1;
        for (l, o) in self.arch.layers.iter().zip(&offs) {
            let g = self.geom(l, batch, h);
            let wlen = l.cin * l.kernel * l.kernel * l.cout;
            let mut y = tconv_forward(&g, &act, &self.params[o.weight..o.weight + wlen]);
            let gamma = &self.params[o.a..o.a + l.cout];
            let mut bn = None;
            if l.norm_relu {
                let beta = &self.params[o.b..o.b + l.cout];
                y = match mode {
                    Mode::Train => {
                        let (y, c) = bn_train_forward(&y, l.cout, gamma, beta);
                        bn = Some(c);
                        y
                    }
                    Mode::Eval => bn_eval_forward(
                        &y,
                        l.cout,
                        gamma,
                        beta,
                        &self.running[o.rmean..o.rmean + l.cout],
                        &self.running[o.rvar..o.rvar + l.cout],
                    ),
                };
                relu_inplace(&mut y);
            } else {
                add_bias(&mut y, gamma);
            }
            h = g.out_h();
            if mode == Mode::Train {
                cache.inputs.push(std::mem::replace(&mut act, y));
                cache.outputs.push(act.clone());
                cache.bn.push(bn);
            } else {
                act = y;
            }
        }
        Ok((act, (mode == Mode::Train).then_some(cache)))
    }

    /// Gradient of `sum(d_out * output)` with respect to the parameters.
    pub fn backward(&self, cache: &ForwardCache<T>, d_out: &[T]) -> Vec<T> {
        let offs = self.offsets();
        let mut grad = vec![T::zero(); self.params.len()];
        let mut dy = d_out.to_vec();
        let mut sizes = vec![1usize];
        for l in &self.arch.layers {
            let h = *sizes.last().unwrap();
            sizes.push((h - 1) * l.stride + l.kernel - 2 * l.pad);
        }
        for (i, (l, o)) in self.arch.layers.iter().zip(&offs).enumerate().rev() {
            if l.norm_relu {
                relu_backward(&mut dy, &cache.outputs[i]);
                let bn = cache.bn[i].as_ref().expect("training cache");
                let gamma = &self.params[o.a..o.a + l.cout];
                let (dz, dg, db) = bn_backward(&dy, bn, gamma, l.cout);
                grad[o.a..o.a + l.cout].copy_from_slice(&dg);
                grad[o.b..o.b + l.cout].copy_from_slice(&db);
                dy = dz;
            } else {
                grad[o.a..o.a + l.cout].copy_from_slice(&bias_grad(&dy, l.cout));
            }
            let g = self.geom(l, cache.batch, sizes[i]);
            let wlen = l.cin * l.kernel * l.kernel * l.cout;
            let (dx, dw) = tconv_backward(&g, &cache.inputs[i], &self.params[o.weight..o.weight + wlen], &dy);
            grad[o.weight..o.weight + wlen].copy_from_slice(&dw);
            dy = dx;
        }
        grad
    }

    /// Folds the batch statistics of a training step into the running
    /// estimates.
    pub fn update_running_stats(&mut self, cache: &ForwardCache<T>) {
        let offs = self.offsets();
        for (i, (l, o)) in self.arch.layers.iter().zip(&offs).enumerate() {
            if let Some(bn) = &cache.bn[i] {
                let n = cache.outputs[i].len() / l.cout;
                let (rm, rv) = self.running.split_at_mut(o.rvar);
                update_running(bn, n, &mut rm[o.rmean..o.rmean + l.cout], &mut rv[..l.cout]);
            }
        }
    }

    /// Single-pose prediction as a pixel image (all pixels marked valid).
    pub fn forward(&self, pose: &[T], mode: Mode) -> Result<PixelImage<T>> {
        let (out, _) = self.forward_batch(pose, 1, mode)?;
        let w = self.output_width();
        Ok(PixelImage { width: w, height: w, data: out, valid: vec![[true; 2]; w * w] })
    }
}

/// Masked residual norm per example, summed over the batch, and its
/// gradient with respect to the prediction (zero where the residual is zero).
pub fn batch_loss<T: Real>(pred: &[T], target: &[T], mask: &[T], batch: usize) -> Result<(T, Vec<T>, Vec<T>)> {
    if pred.len() != target.len() || pred.len() != mask.len() || batch == 0 || pred.len() % batch != 0 {
        return Err(Error::Shape(format!(
            "prediction {} / target {} / mask {} values for batch {batch}",
            pred.len(),
            target.len(),
            mask.len()
        )));
    }
    let per = pred.len() / batch;
    let mut grad = vec![T::zero(); pred.len()];
    let mut losses = Vec::with_capacity(batch);
    for b in 0..batch {
        let r = b * per..(b + 1) * per;
        let mut ss = T::zero();
        for i in r.clone() {
            let d = (pred[i] - target[i]) * mask[i];
            grad[i] = d;
            ss += d * d;
        }
        let n = ss.sqrt();
        let inv = if n > T::zero() { n.recip() } else { T::zero() };
        for g in &mut grad[r] {
            *g *= inv;
        }
        losses.push(n);
    }
    let total = losses.iter().fold(T::zero(), |a, &b| a + b);
    Ok((total, grad, losses))
}

/// Masked residual norm between two images (0/1 mask per value).
pub fn loss<T: Real>(pred: &PixelImage<T>, target: &PixelImage<T>, mask: &[T]) -> Result<T> {
    if pred.width != target.width || pred.height != target.height {
        return Err(Error::Shape(format!("{}x{} vs {}x{}", pred.width, pred.height, target.width, target.height)));
    }
    Ok(batch_loss(&pred.data, &target.data, mask, 1)?.0)
}
