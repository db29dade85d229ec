//! Layer kernels on NHWC activations stored as `rows x channels` matrices.

use crate::scalar::Real;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Geometry of a transpose convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.h - 1) * self.stride + self.k - 2 * self.pad
    }

    pub fn out_w(&self) -> usize {
        (self.w - 1) * self.stride + self.k - 2 * self.pad
    }

    fn cols(&self) -> usize {
        self.k * self.k * self.cout
    }

    /// Calls `f(input_row, col_base, output_row)` for every in-range tap.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (ho, wo) = (self.out_h() as isize, self.out_w() as isize);
        for b in 0..self.batch {
            for iy in 0..self.h {
                for ix in 0..self.w {
                    let row = (b * self.h + iy) * self.w + ix;
                    for ky in 0..self.k {
                        let oy = (iy * self.stride + ky) as isize - self.pad as isize;
                        if oy < 0 || oy >= ho {
                            continue;
                        }
                        for kx in 0..self.k {
                            let ox = (ix * self.stride + kx) as isize - self.pad as isize;
                            if ox < 0 || ox >= wo {
                                continue;
                            }
                            let orow = (b * ho as usize + oy as usize) * wo as usize + ox as usize;
                            f(row, (ky * self.k + kx) * self.cout, orow);
                        }
                    }
                }
            }
        }
    }
}

/// `y = tconv(x, weight)`; weight is `cin x (k*k*cout)` row-major.
pub fn tconv_forward<T: Real>(g: &ConvGeom, x: &[T], weight: &[T]) -> Vec<T> {
    let rows = g.batch * g.h * g.w;
    let nc = g.cols();
    let mut cols = vec![T::zero(); rows * nc];
    T::gemm(rows, g.cin, nc, T::one(), x, false, weight, false, T::zero(), &mut cols);
    let mut y = vec![T::zero(); g.batch * g.out_h() * g.out_w() * g.cout];
    let c = g.cout;
    g.for_each_tap(|row, base, orow| {
        let src = &cols[row * nc + base..row * nc + base + c];
        let dst = &mut y[orow * c..orow * c + c];
        for (d, s) in dst.iter_mut().zip(src) {
            *d += *s;
        }
    });
    y
}

/// Returns `(dx, dweight)` given `dy`.
pub fn tconv_backward<T: Real>(g: &ConvGeom, x: &[T], weight: &[T], dy: &[T]) -> (Vec<T>, Vec<T>) {
    let rows = g.batch * g.h * g.w;
    let nc = g.cols();
    let c = g.cout;
    let mut dcols = vec![T::zero(); rows * nc];
    g.for_each_tap(|row, base, orow| {
        dcols[row * nc + base..row * nc + base + c].copy_from_slice(&dy[orow * c..orow * c + c]);
    });
    let mut dw = vec![T::zero(); g.cin * nc];
    T::gemm(g.cin, rows, nc, T::one(), x, true, &dcols, false, T::zero(), &mut dw);
    let mut dx = vec![T::zero(); rows * g.cin];
    T::gemm(rows, nc, g.cin, T::one(), &dcols, false, weight, true, T::zero(), &mut dx);
    (dx, dw)
}

pub fn add_bias<T: Real>(y: &mut [T], bias: &[T]) {
    for row in y.chunks_exact_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += *b;
        }
    }
}

pub fn bias_grad<T: Real>(dy: &[T], c: usize) -> Vec<T> {
    let mut g = vec![T::zero(); c];
    for row in dy.chunks_exact(c) {
        for (a, v) in g.iter_mut().zip(row) {
            *a += *v;
        }
    }
    g
}

/// Batch statistics kept for the backward pass.
#[derive(Clone, Debug)]
pub struct BnCache<T> {
    pub xhat: Vec<T>,
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub istd: Vec<T>,
}

/// Per-channel normalization with batch statistics over all rows.
pub fn bn_train_forward<T: Real>(z: &[T], c: usize, gamma: &[T], beta: &[T]) -> (Vec<T>, BnCache<T>) {
    let n = z.len() / c;
    let inv_n = T::lit(n as f64).recip();
    let mut mean = vec![T::zero(); c];
    for row in z.chunks_exact(c) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += *v;
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_n);
    let mut var = vec![T::zero(); c];
    for row in z.chunks_exact(c) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            let d = *v - *m;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|s| *s *= inv_n);
    let istd: Vec<T> = var.iter().map(|v| (*v + T::lit(BN_EPS)).sqrt().recip()).collect();
    let mut xhat = vec![T::zero(); z.len()];
    let mut y = vec![T::zero(); z.len()];
    for (i, v) in z.iter().enumerate() {
        let ch = i % c;
        xhat[i] = (*v - mean[ch]) * istd[ch];
        y[i] = gamma[ch] * xhat[i] + beta[ch];
    }
    (y, BnCache { xhat, mean, var, istd })
}

pub fn bn_eval_forward<T: Real>(z: &[T], c: usize, gamma: &[T], beta: &[T], rmean: &[T], rvar: &[T]) -> Vec<T> {
    let scale: Vec<T> = (0..c).map(|ch| gamma[ch] / (rvar[ch] + T::lit(BN_EPS)).sqrt()).collect();
    z.iter()
        .enumerate()
        .map(|(i, v)| {
            let ch = i % c;
            (*v - rmean[ch]) * scale[ch] + beta[ch]
        })
        .collect()
}

/// Returns `(dz, dgamma, dbeta)`.
pub fn bn_backward<T: Real>(dy: &[T], cache: &BnCache<T>, gamma: &[T], c: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = dy.len() / c;
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (i, g) in dy.iter().enumerate() {
        let ch = i % c;
        dgamma[ch] += *g * cache.xhat[i];
        dbeta[ch] += *g;
    }
    let nf = T::lit(n as f64);
    let mut dz = vec![T::zero(); dy.len()];
    for (i, g) in dy.iter().enumerate() {
        let ch = i % c;
        // dxhat = g * gamma; sums of dxhat are gamma * dbeta and gamma * dgamma
        let dxhat = *g * gamma[ch];
        dz[i] = cache.istd[ch] / nf * (nf * dxhat - gamma[ch] * dbeta[ch] - cache.xhat[i] * gamma[ch] * dgamma[ch]);
    }
    (dz, dgamma, dbeta)
}

pub fn update_running<T: Real>(cache: &BnCache<T>, n: usize, rmean: &mut [T], rvar: &mut [T]) {
    let m = T::lit(BN_MOMENTUM);
    let unbias = if n > 1 { T::lit(n as f64 / (n - 1) as f64) } else { T::one() };
    for ch in 0..rmean.len() {
        rmean[ch] = (T::one() - m) * rmean[ch] + m * cache.mean[ch];
        rvar[ch] = (T::one() - m) * rvar[ch] + m * cache.var[ch] * unbias;
    }
}

pub fn relu_inplace<T: Real>(y: &mut [T]) {
    for v in y.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `dy` where the forward output was not positive.
pub fn relu_backward<T: Real>(dy: &mut [T], y: &[T]) {
    for (g, v) in dy.iter_mut().zip(y) {
        if *v <= T::zero() {
            *g = T::zero();
        }
    }
}
