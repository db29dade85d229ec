//! Central finite-difference checks of every layer's backward pass.
//!
//! Each check builds a small random f64 instance, differentiates a random
//! linear functional of the layer output (or the loss itself) and returns the
//! largest relative error over all inputs and parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    bn_backward, bn_train_forward, relu_backward, relu_inplace, tconv_backward, tconv_forward, ConvGeom,
};
use super::model::{batch_loss, ArchSpec, DecoderModel, LayerSpec, Mode};
use super::train::{gradients, Example};

pub const FD_STEP: f64 = 1e-6;
/// Magnitudes below this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max relative error of `analytic` against central differences of `f`.
pub fn max_rel_error(x: &[f64], analytic: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + FD_STEP;
        let fp = f(&xp);
        xp[i] = x[i] - FD_STEP;
        let fm = f(&xp);
        xp[i] = x[i];
        let num = (fp - fm) / (2.0 * FD_STEP);
        let err = (num - analytic[i]).abs() / num.abs().max(analytic[i].abs()).max(REL_FLOOR);
        worst = worst.max(err);
    }
    worst
}

pub fn check_tconv(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = ConvGeom { batch: 2, h: 3, w: 3, cin: 2, cout: 3, k: 4, stride: 2, pad: 1 };
    let x = rand_vec(&mut rng, 2 * 9 * 2);
    let wt = rand_vec(&mut rng, 2 * 16 * 3);
    let c = rand_vec(&mut rng, 2 * g.out_h() * g.out_w() * 3);
    let (dx, dw) = tconv_backward(&g, &x, &wt, &c);
    max_rel_error(&x, &dx, |xp| dot(&tconv_forward(&g, xp, &wt), &c))
        .max(max_rel_error(&wt, &dw, |wp| dot(&tconv_forward(&g, &x, wp), &c)))
}

pub fn check_batch_norm(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = 3;
    // batch of 2 examples with 2x2 positions each
    let z = rand_vec(&mut rng, 2 * 4 * c);
    let gamma = rand_vec(&mut rng, c);
    let beta = rand_vec(&mut rng, c);
    let w = rand_vec(&mut rng, z.len());
    let (_, cache) = bn_train_forward(&z, c, &gamma, &beta);
    let (dz, dg, db) = bn_backward(&w, &cache, &gamma, c);
    max_rel_error(&z, &dz, |zp| dot(&bn_train_forward(zp, c, &gamma, &beta).0, &w))
        .max(max_rel_error(&gamma, &dg, |gp| dot(&bn_train_forward(&z, c, gp, &beta).0, &w)))
        .max(max_rel_error(&beta, &db, |bp| dot(&bn_train_forward(&z, c, &gamma, bp).0, &w)))
}

pub fn check_relu(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep inputs away from the kink
    let x: Vec<f64> = rand_vec(&mut rng, 64).into_iter().map(|v| if v.abs() < 0.05 { v + 0.1 } else { v }).collect();
    let w = rand_vec(&mut rng, 64);
    let relu = |xp: &[f64]| {
        let mut y = xp.to_vec();
        relu_inplace(&mut y);
        y
    };
    let mut g = w.clone();
    relu_backward(&mut g, &relu(&x));
    max_rel_error(&x, &g, |xp| dot(&relu(xp), &w))
}

pub fn check_loss(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * 16;
    let pred = rand_vec(&mut rng, n);
    let target = rand_vec(&mut rng, n);
    let mask: Vec<f64> = (0..n).map(|i| if i % 5 == 0 { 0.0 } else { 1.0 }).collect();
    let (_, grad, _) = batch_loss(&pred, &target, &mask, 2).unwrap();
    max_rel_error(&pred, &grad, |p| batch_loss(p, &target, &mask, 2).unwrap().0)
}

/// Decoder with 376 parameters: `1x1x2 -> 2x2x3 -> 4x4x3 -> 8x8x4`.
pub fn tiny_arch() -> ArchSpec {
    ArchSpec {
        input_dim: 2,
        layers: vec![
            LayerSpec { cin: 2, cout: 3, kernel: 2, stride: 1, pad: 0, norm_relu: true },
            LayerSpec { cin: 3, cout: 3, kernel: 4, stride: 2, pad: 1, norm_relu: true },
            LayerSpec { cin: 3, cout: 4, kernel: 4, stride: 2, pad: 1, norm_relu: false },
        ],
    }
}

/// Random two-example batch for the tiny decoder.
pub fn tiny_batch(seed: u64) -> Vec<Example<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..2)
        .map(|id| Example {
            id,
            input: rand_vec(&mut rng, 2),
            target: rand_vec(&mut rng, 8 * 8 * 4),
            mask: (0..8 * 8 * 4).map(|i| if (i / 4) % 7 == 3 { 0.0 } else { 1.0 }).collect(),
        })
        .collect()
}

/// Whole-model check: loss gradient with respect to every parameter.
pub fn check_model(seed: u64) -> f64 {
    let model = DecoderModel::<f64>::new(tiny_arch(), seed).unwrap();
    let batch = tiny_batch(seed);
    let refs: Vec<&Example<f64>> = batch.iter().collect();
    let (_, grad) = gradients(&model, &refs).unwrap();
    let (x, t, m) = {
        let mut x = Vec::new();
        let mut t = Vec::new();
        let mut m = Vec::new();
        for e in &batch {
            x.extend_from_slice(&e.input);
            t.extend_from_slice(&e.target);
            m.extend_from_slice(&e.mask);
        }
        (x, t, m)
    };
    max_rel_error(&model.params, &grad, |p| {
        let mut probe = model.clone();
        probe.params = p.to_vec();
        let (pred, _) = probe.forward_batch(&x, 2, Mode::Train).unwrap();
        batch_loss(&pred, &t, &m, 2).unwrap().0
    })
}
