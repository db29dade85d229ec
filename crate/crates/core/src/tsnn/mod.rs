//! Decoder network from pose parameters to displacement images.
//!
//! Activations are NHWC. A transpose convolution is one GEMM producing
//! per-input-pixel kernel columns, scattered (col2im) into the output grid.
//! All arithmetic is sequential and seeded, so training is reproducible
//! bit for bit.

mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
mod model;
mod train;

pub use adam::{adam_step, AdamState};
pub use model::{batch_loss, loss, ArchSpec, Block, DecoderModel, ForwardCache, LayerSpec, Mode};
pub use train::{evaluate, gradients, train, EpochStats, Example, TrainConfig, TrainOutcome, Trainer};

#[cfg(test)]
mod tests {
    use super::gradcheck::*;
    use super::*;
    use crate::pixelmap::PixelImage;

    #[test]
    fn desk_and_full_scale_shapes() {
        let desk = ArchSpec::desk(16, 64).unwrap();
        assert_eq!(desk.output_width(), 64);
        let chans: Vec<usize> = desk.layers.iter().map(|l| l.cout).collect();
        assert_eq!(chans, vec![256, 128, 64, 32, 4]);
        let m = DecoderModel::<f32>::new(desk, 1).unwrap();
        let img = m.forward(&[0.1; 16], Mode::Eval).unwrap();
        assert_eq!((img.width, img.height, img.data.len()), (64, 64, 64 * 64 * 4));

        let full = ArchSpec::full_scale();
        assert_eq!(full.input_dim, 90);
        assert_eq!(full.output_width(), 512);
        let m = DecoderModel::<f32>::new(full, 1).unwrap();
        let img = m.forward(&[0.0; 90], Mode::Eval).unwrap();
        assert_eq!(img.data.len(), 512 * 512 * 4);
    }

    #[test]
    fn wrong_input_length_is_a_shape_error() {
        let m = DecoderModel::<f64>::new(tiny_arch(), 0).unwrap();
        assert!(m.forward(&[0.0; 3], Mode::Eval).is_err());
    }

    #[test]
    fn zero_final_layer_gives_zero_image() {
        let mut m = DecoderModel::<f64>::new(ArchSpec::desk(16, 64).unwrap(), 3).unwrap();
        let last = m.last_layer_weight();
        m.params[last.offset..last.offset + last.len].iter_mut().for_each(|p| *p = 0.0);
        let img = m.forward(&[0.3; 16], Mode::Eval).unwrap();
        assert!(img.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn loss_examples() {
        let mut a = PixelImage::<f64>::zeros(2, 2);
        a.valid = vec![[true, true]; 4];
        let mask = a.channel_mask();
        assert_eq!(loss(&a, &a, &mask).unwrap(), 0.0);
        let mut b = a.clone();
        b.data[4] = 0.3;
        b.data[5] = 0.4;
        assert!((loss(&a, &b, &mask).unwrap() - 0.5).abs() < 1e-15);
        let pred = vec![1.0, 0.0, 0.0, 1.0];
        let (total, _, per) = batch_loss(&pred, &[0.0; 4], &[1.0; 4], 2).unwrap();
        assert_eq!(per, vec![1.0, 1.0]);
        assert_eq!(total, 2.0);
    }

    #[test]
    fn zero_residual_has_zero_subgradient() {
        let mut m = DecoderModel::<f64>::new(tiny_arch(), 4).unwrap();
        let last = m.last_layer_weight();
        m.params[last.offset..].iter_mut().for_each(|p| *p = 0.0);
        let batch: Vec<Example<f64>> = tiny_batch(4)
            .into_iter()
            .map(|mut e| {
                e.target.iter_mut().for_each(|t| *t = 0.0);
                e
            })
            .collect();
        let refs: Vec<&Example<f64>> = batch.iter().collect();
        let (l, g) = gradients(&m, &refs).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn finite_difference_agreement() {
        for seed in 0..3 {
            assert!(check_tconv(seed) < 1e-4);
            assert!(check_batch_norm(seed) < 1e-4);
            assert!(check_relu(seed) < 1e-4);
            assert!(check_loss(seed) < 1e-4);
            let e = check_model(seed);
            assert!(e < 1e-4, "model seed {seed}: {e}");
        }
        assert!(DecoderModel::<f64>::new(tiny_arch(), 0).unwrap().num_params() <= 500);
    }

    #[test]
    fn residual_scaling_of_last_layer_gradient() {
        // the norm's gradient is scale free in the residual; its numerator
        // (the residual itself, i.e. the half squared norm's gradient) scales
        let m = DecoderModel::<f64>::new(tiny_arch(), 9).unwrap();
        let base = tiny_batch(9);
        let (pred, _) = {
            let x: Vec<f64> = base.iter().flat_map(|e| e.input.clone()).collect();
            m.forward_batch(&x, 2, Mode::Train).unwrap()
        };
        let per = pred.len() / 2;
        let with_dev = |s: f64| -> Vec<Example<f64>> {
            base.iter()
                .enumerate()
                .map(|(b, e)| {
                    let mut e = e.clone();
                    for i in 0..per {
                        e.target[i] = pred[b * per + i] - s * (0.01 * ((i % 13) as f64 - 6.0));
                    }
                    e
                })
                .collect()
        };
        let last = m.last_layer_weight();
        let one = with_dev(1.0);
        let two = with_dev(2.0);
        let (l1, g1) = gradients(&m, &one.iter().collect::<Vec<_>>()).unwrap();
        let (l2, g2) = gradients(&m, &two.iter().collect::<Vec<_>>()).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12 * l1.max(1.0));
        for i in last.offset..last.offset + last.len {
            assert!((g2[i] - g1[i]).abs() <= 1e-9 * g1[i].abs().max(1e-6));
        }
        // per-example numerators: loss_b * grad doubles; both examples share
        // the same per-example norm ratio, so compare the summed form
        let (_, _, p1) = batch_loss(
            &pred,
            &one.iter().flat_map(|e| e.target.clone()).collect::<Vec<_>>(),
            &one.iter().flat_map(|e| e.mask.clone()).collect::<Vec<_>>(),
            2,
        )
        .unwrap();
        let (_, _, p2) = batch_loss(
            &pred,
            &two.iter().flat_map(|e| e.target.clone()).collect::<Vec<_>>(),
            &two.iter().flat_map(|e| e.mask.clone()).collect::<Vec<_>>(),
            2,
        )
        .unwrap();
        for b in 0..2 {
            assert!((p2[b] - 2.0 * p1[b]).abs() < 1e-12);
        }
        // directional finite difference along the last-layer gradient
        let dir: Vec<f64> = (0..m.num_params())
            .map(|i| if i >= last.offset && i < last.offset + last.len { g1[i] } else { 0.0 })
            .collect();
        let x: Vec<f64> = base.iter().flat_map(|e| e.input.clone()).collect();
        let eval = |ex: &[Example<f64>], s: f64| {
            let mut probe = m.clone();
            for (p, d) in probe.params.iter_mut().zip(&dir) {
                *p += s * d;
            }
            let (out, _) = probe.forward_batch(&x, 2, Mode::Train).unwrap();
            let t: Vec<f64> = ex.iter().flat_map(|e| e.target.clone()).collect();
            let mk: Vec<f64> = ex.iter().flat_map(|e| e.mask.clone()).collect();
            batch_loss(&out, &t, &mk, 2).unwrap().0
        };
        let h = 1e-6;
        let dd: f64 = dir.iter().map(|d| d * d).sum();
        for ex in [&one, &two] {
            let fd = (eval(ex, h) - eval(ex, -h)) / (2.0 * h);
            assert!((fd - dd).abs() < 1e-4 * dd);
        }
    }

    #[test]
    fn eval_forward_is_pure() {
        let m = DecoderModel::<f32>::new(ArchSpec::desk(16, 64).unwrap(), 5).unwrap();
        let a = m.forward(&[0.2; 16], Mode::Eval).unwrap();
        let b = m.forward(&[0.2; 16], Mode::Eval).unwrap();
        assert_eq!(
            a.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    fn tiny_examples(n: usize, seed: u64) -> Vec<Example<f64>> {
        (0..n as u64)
            .flat_map(|i| {
                tiny_batch(seed + i).into_iter().take(1).map(move |mut e| {
                    e.id = i;
                    e.target.iter_mut().for_each(|t| *t *= 0.1);
                    e
                })
            })
            .collect()
    }

    #[test]
    fn training_is_deterministic_and_keeps_best() {
        let data = tiny_examples(6, 20);
        let cfg = TrainConfig { epochs: 4, batch_size: 3, lr: 1e-2, seed: 7 };
        let m = DecoderModel::<f64>::new(tiny_arch(), 1).unwrap();
        let a = train(m.clone(), &data[..4], &data[4..], &cfg).unwrap();
        let b = train(m.clone(), &data[..4], &data[4..], &cfg).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.best.params, b.best.params);
        let best = a.best_epoch.unwrap();
        let min = a.curve.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(a.curve[best].val_loss, min);
        assert!((evaluate(&a.best, &data[4..], 3).unwrap() - min).abs() < 1e-12);

        let none = train(m.clone(), &data[..4], &data[4..], &TrainConfig { epochs: 0, ..cfg.clone() }).unwrap();
        assert!(none.curve.is_empty());
        assert_eq!(none.best, m);
        assert!(train(m, &[], &data, &cfg).is_err());
    }

    #[test]
    fn tiny_model_overfits() {
        let data = tiny_examples(4, 30);
        let refs: Vec<&Example<f64>> = data.iter().collect();
        let mut t = Trainer::new(DecoderModel::<f64>::new(tiny_arch(), 2).unwrap(), 1e-2);
        let first = t.step(&refs).unwrap();
        let mut last = first;
        for _ in 0..1500 {
            last = t.step(&refs).unwrap();
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = DecoderModel::<f32>::new(ArchSpec::desk(4, 16).unwrap(), 8).unwrap();
        m.step = 17;
        m.running[0] = 0.25;
        let bytes = checkpoint::to_bytes(&m);
        let back: DecoderModel<f32> = checkpoint::from_bytes(&bytes, "ckpt").unwrap();
        assert_eq!(back, m);
        assert_eq!(checkpoint::to_bytes(&back), bytes);
        assert!(checkpoint::from_bytes::<f32>(&bytes[..bytes.len() - 1], "ckpt").is_err());
    }
}
