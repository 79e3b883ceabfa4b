//! Anti-alias low-pass filter and decimation from the synthesis rate to the
//! 10 MHz sensing rate.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use super::waveform::OVERSAMPLE;
use super::SNAPSHOT_LEN;

/// FIR length; Blackman window, about 1.1 MHz transition at 80 MHz.
const TAPS: usize = 385;

fn taps() -> &'static [f64] {
    static TAPS_CELL: OnceLock<Vec<f64>> = OnceLock::new();
    TAPS_CELL.get_or_init(|| {
        // cutoff at the sensing Nyquist frequency (5 MHz), normalized to the input rate
        let fc = 0.5 / OVERSAMPLE as f64;
        let m = (TAPS - 1) as f64;
        let mut h: Vec<f64> = (0..TAPS)
            .map(|n| {
                let x = n as f64 - m / 2.0;
                let sinc = if x == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * x).sin() / (PI * x) };
                let w = 0.42 - 0.5 * (2.0 * PI * n as f64 / m).cos() + 0.08 * (4.0 * PI * n as f64 / m).cos();
                sinc * w
            })
            .collect();
        let dc: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= dc);
        h
    })
}

/// Number of high-rate input samples needed for one output snapshot.
pub(crate) fn input_len() -> usize {
    (SNAPSHOT_LEN - 1) * OVERSAMPLE + TAPS
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn decimate(input: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(input.len(), input_len(), "decimator input length");
    let h = taps();
    let re: Vec<f64> = input.iter().map(|s| s.re).collect();
    let im: Vec<f64> = input.iter().map(|s| s.im).collect();
    (0..SNAPSHOT_LEN)
        .map(|m| {
            let start = m * OVERSAMPLE;
            Complex64::new(dot(h, &re[start..start + TAPS]), dot(h, &im[start..start + TAPS]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gain_at(freq_hz: f64) -> f64 {
        let fs = super::super::waveform::HI_RATE_HZ;
        let w = 2.0 * PI * freq_hz / fs;
        let z: Complex64 = taps()
            .iter()
            .enumerate()
            .map(|(n, h)| Complex64::from_polar(*h, -w * n as f64))
            .sum();
        z.norm()
    }

    #[test]
    fn passband_and_stopband() {
        assert!((gain_at(0.0) - 1.0).abs() < 1e-12);
        assert!((gain_at(3.5e6) - 1.0).abs() < 1e-3);
        assert!((gain_at(5.0e6) - 0.5).abs() < 0.02);
        for f in [6.0e6, 10.0e6, 25.0e6, 39.0e6] {
            assert!(gain_at(f) < 1e-3, "{f}: {}", gain_at(f));
        }
    }
}
