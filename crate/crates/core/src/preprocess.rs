//! Snapshot to network-input transformation: a 128-point FFT followed by
//! real/imaginary extraction into a 128 x 2 matrix.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{IqSnapshot, SNAPSHOT_LEN};

const N: usize = SNAPSHOT_LEN;
const LOG2_N: u32 = N.trailing_zeros();

/// Row order of the frequency bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinOrder {
    /// DC at row 64, negative frequencies above it (fftshift order).
    #[default]
    Centered,
    /// Natural FFT order, DC at row 0.
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub normalize: bool,
    pub bin_order: BinOrder,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions { normalize: true, bin_order: BinOrder::Centered }
    }
}

fn twiddles() -> &'static [Complex64] {
    static TW: OnceLock<Vec<Complex64>> = OnceLock::new();
    TW.get_or_init(|| (0..N / 2).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / N as f64)).collect())
}

/// In-place iterative radix-2 decimation-in-time FFT of length 128.
fn fft_in_place(x: &mut [Complex64; N]) {
    for i in 0..N {
        let j = i.reverse_bits() >> (usize::BITS - LOG2_N);
        if j > i {
            x.swap(i, j);
        }
    }
    let tw = twiddles();
    let mut len = 2;
    while len <= N {
        let stride = N / len;
        for start in (0..N).step_by(len) {
            for k in 0..len / 2 {
                let a = x[start + k];
                let b = x[start + k + len / 2] * tw[k * stride];
                x[start + k] = a + b;
                x[start + k + len / 2] = a - b;
            }
        }
        len <<= 1;
    }
}

/// X[m] = sum_k s[k] exp(-i 2 pi k m / 128), reordered per `order`.
pub fn dft_128(snapshot: &IqSnapshot, order: BinOrder) -> [Complex64; N] {
    dft_128_slice(snapshot.samples(), order).expect("snapshots always hold 128 samples")
}

/// Same as [`dft_128`] for a raw slice; rejects lengths other than 128.
pub fn dft_128_slice(samples: &[Complex64], order: BinOrder) -> Result<[Complex64; N]> {
    if samples.len() != N {
        return Err(Error::Shape(format!("DFT input must have {N} samples, got {}", samples.len())));
    }
    let mut x = [Complex64::new(0.0, 0.0); N];
    x.copy_from_slice(samples);
    fft_in_place(&mut x);
    if order == BinOrder::Centered {
        x.rotate_left(N / 2);
    }
    Ok(x)
}

/// 128 x 2 matrix; row m holds (Re X[m], Im X[m]).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Box<[[f64; 2]]>,
}

impl FeatureMatrix {
    pub const ROWS: usize = N;
    pub const COLS: usize = 2;

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row][col]
    }

    /// Row-major 128 x 2 layout.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.values.iter().flat_map(|r| r.iter().copied()).collect()
    }

    /// Network layout `[1, 2, 128]`: all real parts, then all imaginary parts.
    pub fn to_network_input(&self) -> Vec<f64> {
        self.values.iter().map(|r| r[0]).chain(self.values.iter().map(|r| r[1])).collect()
    }

    pub fn rms(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum();
        (sum / (2 * N) as f64).sqrt()
    }
}

pub fn to_feature_matrix(snapshot: &IqSnapshot, options: FeatureOptions) -> FeatureMatrix {
    let spectrum = dft_128(snapshot, options.bin_order);
    let mut values: Box<[[f64; 2]]> = spectrum.iter().map(|x| [x.re, x.im]).collect();
    if options.normalize {
        let sum: f64 = values.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum();
        let rms = (sum / (2 * N) as f64).sqrt();
        if rms > 0.0 {
            values.iter_mut().for_each(|r| {
                r[0] /= rms;
                r[1] /= rms;
            });
        }
    }
    FeatureMatrix { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        (0..N)
            .map(|m| {
                (0..N)
                    .map(|k| x[k] * Complex64::from_polar(1.0, -2.0 * PI * ((k * m) % N) as f64 / N as f64))
                    .sum()
            })
            .collect()
    }

    fn random_snapshot(seed: u64) -> IqSnapshot {
        let mut rng = crate::seed::rng(seed);
        IqSnapshot::from_fn(|_| Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0))
    }

    #[test]
    fn constant_maps_to_dc_row() {
        let x = IqSnapshot::from_fn(|_| Complex64::new(1.0, 0.0));
        let spec = dft_128(&x, BinOrder::Centered);
        for (m, v) in spec.iter().enumerate() {
            if m == 64 {
                assert!((v.re - 128.0).abs() < 1e-12 && v.im.abs() < 1e-12);
            } else {
                assert!(v.norm() < 1e-12, "row {m}: {v}");
            }
        }
        let natural = dft_128(&x, BinOrder::Natural);
        assert!((natural[0].re - 128.0).abs() < 1e-12);
    }

    #[test]
    fn tone_lands_eight_rows_above_dc() {
        let x = IqSnapshot::from_fn(|k| Complex64::from_polar(1.0, 2.0 * PI * 8.0 * k as f64 / 128.0));
        let spec = dft_128(&x, BinOrder::Centered);
        let argmax = (0..N).max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm())).unwrap();
        assert_eq!(argmax, 72);
        assert!(spec.iter().enumerate().filter(|(m, _)| *m != 72).all(|(_, v)| v.norm() < 1e-10));
    }

    #[test]
    fn matches_naive_dft_and_parseval() {
        for seed in 0..50 {
            let x = random_snapshot(seed);
            let fast = dft_128(&x, BinOrder::Natural);
            let slow = naive_dft(x.samples());
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-9);
            }
            let e_time: f64 = x.samples().iter().map(|s| s.norm_sqr()).sum();
            let e_freq: f64 = fast.iter().map(|s| s.norm_sqr()).sum();
            assert!((e_freq - 128.0 * e_time).abs() <= 1e-6 * e_freq);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(dft_128_slice(&[Complex64::default(); 64], BinOrder::Centered).is_err());
    }

    #[test]
    fn zero_snapshot_gives_zero_features() {
        let f = to_feature_matrix(&IqSnapshot::zeros(), FeatureOptions { normalize: false, ..Default::default() });
        assert!(f.to_row_major().iter().all(|&v| v == 0.0));
        let f = to_feature_matrix(&IqSnapshot::zeros(), FeatureOptions::default());
        assert!(f.to_row_major().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn real_input_is_conjugate_symmetric() {
        let mut rng = crate::seed::rng(4);
        let x = IqSnapshot::from_fn(|_| Complex64::new(rng.random::<f64>() - 0.5, 0.0));
        let f = to_feature_matrix(&x, FeatureOptions { normalize: false, bin_order: BinOrder::Centered });
        for m in 1..64 {
            assert!((f.get(64 + m, 0) - f.get(64 - m, 0)).abs() < 1e-9);
            assert!((f.get(64 + m, 1) + f.get(64 - m, 1)).abs() < 1e-9);
        }
    }

    #[test]
    fn normalized_rms_is_one() {
        let f = to_feature_matrix(&random_snapshot(8), FeatureOptions::default());
        assert!((f.rms() - 1.0).abs() < 1e-9);
        assert_eq!(f.to_row_major().len(), 256);
        let net = f.to_network_input();
        assert_eq!((net[0], net[128]), (f.get(0, 0), f.get(0, 1)));
    }

    #[test]
    fn linear_without_normalization() {
        let (x, y) = (random_snapshot(1), random_snapshot(2));
        let (a, b) = (0.7, -1.9);
        let opts = FeatureOptions { normalize: false, bin_order: BinOrder::Centered };
        let combo = IqSnapshot::from_fn(|k| x.samples()[k] * a + y.samples()[k] * b);
        let (fx, fy, fc) = (to_feature_matrix(&x, opts), to_feature_matrix(&y, opts), to_feature_matrix(&combo, opts));
        for ((u, v), w) in fx.to_row_major().iter().zip(fy.to_row_major()).zip(fc.to_row_major()) {
            assert!((a * u + b * v - w).abs() < 1e-9);
        }
    }
}
