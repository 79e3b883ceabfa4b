//! Layer kernels on flat row-major slices.
//!
//! Backward functions accumulate into parameter gradients (`+=`) and
//! overwrite input gradients.

use rand::Rng;

use super::Scalar;
use crate::error::{Error, Result};
use crate::seed;

/// Lower clamp for probabilities inside the cross-entropy losses.
pub const PROB_EPS: f64 = 1e-7;

/// Dot product with eight independent accumulators.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let mut tail = S::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + *x * *y;
    }
    let mut acc = [S::zero(); 8];
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`.
#[inline]
pub fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}

/// Valid, stride-1 2-D cross-correlation geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_c: usize,
    pub h: usize,
    pub w: usize,
    pub out_c: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvGeom {
    pub fn new(input: [usize; 3], out_c: usize, kernel: [usize; 2]) -> Result<Self> {
        let [in_c, h, w] = input;
        let [kh, kw] = kernel;
        if [in_c, h, w, out_c, kh, kw].contains(&0) {
            return Err(Error::Shape(format!("conv sizes must be positive: input {input:?}, {out_c} maps, kernel {kernel:?}")));
        }
        if kh > h || kw > w {
            return Err(Error::Shape(format!("kernel {kernel:?} larger than input {h}x{w}")));
        }
        Ok(ConvGeom { in_c, h, w, out_c, kh, kw })
    }

    pub fn out_h(&self) -> usize {
        self.h - self.kh + 1
    }

    pub fn out_w(&self) -> usize {
        self.w - self.kw + 1
    }

    pub fn input_len(&self) -> usize {
        self.in_c * self.h * self.w
    }

    pub fn output_len(&self) -> usize {
        self.out_c * self.out_h() * self.out_w()
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_c, self.in_c, self.kh, self.kw]
    }

    pub fn weight_len(&self) -> usize {
        self.out_c * self.in_c * self.kh * self.kw
    }

    fn check(&self, x: usize, w: usize, b: usize, y: usize) -> Result<()> {
        if x != self.input_len() || w != self.weight_len() || b != self.out_c || y != self.output_len() {
            return Err(Error::Shape(format!(
                "conv {self:?}: got input {x}, weights {w}, bias {b}, output {y}; expected {}, {}, {}, {}",
                self.input_len(),
                self.weight_len(),
                self.out_c,
                self.output_len()
            )));
        }
        Ok(())
    }
}

pub fn conv2d_forward<S: Scalar>(g: &ConvGeom, x: &[S], w: &[S], b: &[S], y: &mut [S]) -> Result<()> {
    g.check(x.len(), w.len(), b.len(), y.len())?;
    let (oh, ow) = (g.out_h(), g.out_w());
    for o in 0..g.out_c {
        for i in 0..oh {
            let row = &mut y[(o * oh + i) * ow..][..ow];
            row.fill(b[o]);
            for c in 0..g.in_c {
                for p in 0..g.kh {
                    let xrow = &x[(c * g.h + i + p) * g.w..][..g.w];
                    let wk = &w[((o * g.in_c + c) * g.kh + p) * g.kw..][..g.kw];
                    for (q, &wq) in wk.iter().enumerate() {
                        axpy(wq, &xrow[q..q + ow], row);
                    }
                }
            }
        }
    }
    Ok(())
}

/// `dx` may be `None` for the first layer, whose input gradient is unused.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<S: Scalar>(
    g: &ConvGeom,
    x: &[S],
    w: &[S],
    dy: &[S],
    dx: Option<&mut [S]>,
    dw: &mut [S],
    db: &mut [S],
) -> Result<()> {
    g.check(x.len(), w.len(), db.len(), dy.len())?;
    if dw.len() != w.len() {
        return Err(Error::Shape(format!("conv weight gradient has {} values, expected {}", dw.len(), w.len())));
    }
    let mut dx = dx;
    if let Some(dx) = dx.as_deref_mut() {
        if dx.len() != x.len() {
            return Err(Error::Shape(format!("conv input gradient has {} values, expected {}", dx.len(), x.len())));
        }
        dx.fill(S::zero());
    }
    let (oh, ow) = (g.out_h(), g.out_w());
    for o in 0..g.out_c {
        for i in 0..oh {
            let dyrow = &dy[(o * oh + i) * ow..][..ow];
            db[o] += dyrow.iter().fold(S::zero(), |a, &v| a + v);
            for c in 0..g.in_c {
                for p in 0..g.kh {
                    let row_at = (c * g.h + i + p) * g.w;
                    let widx = ((o * g.in_c + c) * g.kh + p) * g.kw;
                    for q in 0..g.kw {
                        dw[widx + q] += dot(dyrow, &x[row_at + q..][..ow]);
                        if let Some(dx) = dx.as_deref_mut() {
                            axpy(w[widx + q], dyrow, &mut dx[row_at + q..][..ow]);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn dense_check(n_in: usize, n_out: usize, x: usize, w: usize, b: usize, y: usize) -> Result<()> {
    if x != n_in || w != n_in * n_out || b != n_out || y != n_out {
        return Err(Error::Shape(format!(
            "dense {n_in}->{n_out}: got input {x}, weights {w}, bias {b}, output {y}"
        )));
    }
    Ok(())
}

/// `y = W x + b` with `W` stored `[n_out, n_in]`.
pub fn dense_forward<S: Scalar>(x: &[S], w: &[S], b: &[S], y: &mut [S]) -> Result<()> {
    dense_check(x.len(), y.len(), x.len(), w.len(), b.len(), y.len())?;
    let n_in = x.len();
    for (o, yo) in y.iter_mut().enumerate() {
        *yo = b[o] + dot(&w[o * n_in..][..n_in], x);
    }
    Ok(())
}

pub fn dense_backward<S: Scalar>(
    x: &[S],
    w: &[S],
    dy: &[S],
    dx: Option<&mut [S]>,
    dw: &mut [S],
    db: &mut [S],
) -> Result<()> {
    let n_in = x.len();
    dense_check(n_in, dy.len(), n_in, w.len(), db.len(), dy.len())?;
    if dw.len() != w.len() {
        return Err(Error::Shape(format!("dense weight gradient has {} values, expected {}", dw.len(), w.len())));
    }
    let mut dx = dx;
    if let Some(dx) = dx.as_deref_mut() {
        if dx.len() != n_in {
            return Err(Error::Shape(format!("dense input gradient has {} values, expected {n_in}", dx.len())));
        }
        dx.fill(S::zero());
    }
    for (o, &g) in dy.iter().enumerate() {
        db[o] += g;
        if g == S::zero() {
            continue;
        }
        axpy(g, x, &mut dw[o * n_in..][..n_in]);
        if let Some(dx) = dx.as_deref_mut() {
            axpy(g, &w[o * n_in..][..n_in], dx);
        }
    }
    Ok(())
}

fn same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: lengths {a} and {b} differ")));
    }
    Ok(())
}

pub fn relu_forward<S: Scalar>(x: &[S], y: &mut [S]) -> Result<()> {
    same_len("relu", x.len(), y.len())?;
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = if xi > S::zero() { xi } else { S::zero() };
    }
    Ok(())
}

/// Uses the forward output: the derivative is 1 where `y > 0`.
pub fn relu_backward<S: Scalar>(y: &[S], dy: &[S], dx: &mut [S]) -> Result<()> {
    same_len("relu backward", y.len(), dy.len())?;
    same_len("relu backward", y.len(), dx.len())?;
    for ((d, &g), &yi) in dx.iter_mut().zip(dy).zip(y) {
        *d = if yi > S::zero() { g } else { S::zero() };
    }
    Ok(())
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask<S: Scalar>(len: usize, rate: f64, seed: u64) -> Result<Vec<S>> {
    let mut mask = vec![S::zero(); len];
    fill_dropout_mask(&mut mask, rate, seed)?;
    Ok(mask)
}

pub fn fill_dropout_mask<S: Scalar>(mask: &mut [S], rate: f64, seed: u64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        mask.fill(S::one());
        return Ok(());
    }
    let keep = S::of(1.0 / (1.0 - rate));
    let mut rng = seed::rng(seed);
    for m in mask.iter_mut() {
        *m = if rng.random::<f64>() < rate { S::zero() } else { keep };
    }
    Ok(())
}

/// Elementwise product with a mask; the same function serves as the backward pass.
pub fn apply_mask<S: Scalar>(x: &[S], mask: &[S], y: &mut [S]) -> Result<()> {
    same_len("dropout", x.len(), mask.len())?;
    same_len("dropout", x.len(), y.len())?;
    for ((yi, &xi), &m) in y.iter_mut().zip(x).zip(mask) {
        *yi = xi * m;
    }
    Ok(())
}

#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

pub fn sigmoid_forward<S: Scalar>(x: &[S], y: &mut [S]) -> Result<()> {
    same_len("sigmoid", x.len(), y.len())?;
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = sigmoid(xi);
    }
    Ok(())
}

pub fn sigmoid_backward<S: Scalar>(y: &[S], dy: &[S], dx: &mut [S]) -> Result<()> {
    same_len("sigmoid backward", y.len(), dy.len())?;
    same_len("sigmoid backward", y.len(), dx.len())?;
    for ((d, &g), &s) in dx.iter_mut().zip(dy).zip(y) {
        *d = g * s * (S::one() - s);
    }
    Ok(())
}

pub fn softmax_forward<S: Scalar>(x: &[S], y: &mut [S]) -> Result<()> {
    same_len("softmax", x.len(), y.len())?;
    let max = x.iter().copied().fold(S::neg_infinity(), S::max);
    let mut sum = S::zero();
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = (xi - max).exp();
        sum += *yi;
    }
    for yi in y.iter_mut() {
        *yi = *yi / sum;
    }
    Ok(())
}

pub fn softmax_backward<S: Scalar>(y: &[S], dy: &[S], dx: &mut [S]) -> Result<()> {
    same_len("softmax backward", y.len(), dy.len())?;
    same_len("softmax backward", y.len(), dx.len())?;
    let inner = y.iter().zip(dy).fold(S::zero(), |a, (&s, &g)| a + s * g);
    for ((d, &g), &s) in dx.iter_mut().zip(dy).zip(y) {
        *d = s * (g - inner);
    }
    Ok(())
}

fn clamp_prob<S: Scalar>(p: S) -> S {
    let lo = S::of(PROB_EPS);
    let hi = S::of(1.0 - PROB_EPS);
    p.max(lo).min(hi)
}

/// Binary cross-entropy averaged over all entries.
///
/// Probabilities are clamped to `[1e-7, 1 - 1e-7]`; the returned gradient is
/// the clamped-point derivative passed straight through to the raw input.
pub fn bce_loss<S: Scalar>(p: &[S], t: &[S], grad: &mut [S]) -> Result<f64> {
    same_len("bce", p.len(), t.len())?;
    same_len("bce", p.len(), grad.len())?;
    let n = S::of(p.len() as f64);
    let mut loss = 0.0;
    for ((g, &pi), &ti) in grad.iter_mut().zip(p).zip(t) {
        let pc = clamp_prob(pi);
        loss -= (ti * pc.ln() + (S::one() - ti) * (S::one() - pc).ln()).to64();
        *g = ((S::one() - ti) / (S::one() - pc) - ti / pc) / n;
    }
    Ok(loss / p.len() as f64)
}

/// Sigmoid followed by [`bce_loss`], with the gradient taken directly with
/// respect to the logits: `(sigmoid(z) - t) / n`.
pub fn sigmoid_bce_with_logits<S: Scalar>(z: &[S], t: &[S], grad: &mut [S]) -> Result<f64> {
    same_len("bce", z.len(), t.len())?;
    same_len("bce", z.len(), grad.len())?;
    let n = S::of(z.len() as f64);
    let mut loss = 0.0;
    for ((g, &zi), &ti) in grad.iter_mut().zip(z).zip(t) {
        let p = sigmoid(zi);
        let pc = clamp_prob(p);
        loss -= (ti * pc.ln() + (S::one() - ti) * (S::one() - pc).ln()).to64();
        *g = (p - ti) / n;
    }
    Ok(loss / z.len() as f64)
}

/// Categorical cross-entropy `-sum t ln p` for one distribution, with clamping.
pub fn cce_loss<S: Scalar>(p: &[S], t: &[S], grad: &mut [S]) -> Result<f64> {
    same_len("cce", p.len(), t.len())?;
    same_len("cce", p.len(), grad.len())?;
    let mut loss = 0.0;
    for ((g, &pi), &ti) in grad.iter_mut().zip(p).zip(t) {
        let pc = clamp_prob(pi);
        loss -= (ti * pc.ln()).to64();
        *g = -ti / pc;
    }
    Ok(loss)
}

/// Softmax followed by [`cce_loss`]; gradient with respect to the logits.
pub fn softmax_cce_with_logits<S: Scalar>(z: &[S], t: &[S], grad: &mut [S]) -> Result<f64> {
    softmax_forward(z, grad)?;
    let total = t.iter().fold(S::zero(), |a, &v| a + v);
    let mut loss = 0.0;
    for (g, &ti) in grad.iter_mut().zip(t) {
        loss -= (ti * clamp_prob(*g).ln()).to64();
        *g = *g * total - ti;
    }
    Ok(loss)
}
