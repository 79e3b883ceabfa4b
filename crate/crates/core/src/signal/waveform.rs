//! High-rate complex-baseband modulators.
//!
//! All generators return `n` samples at [`HI_RATE_HZ`] starting
//! `symbol_offset` seconds into a random symbol stream, with zero initial
//! carrier phase and no frequency offset.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;

use super::catalog::{ModulationVariant, Scheme, Shaping};
use super::SAMPLE_RATE_HZ;

pub(crate) const OVERSAMPLE: usize = 8;
pub(crate) const HI_RATE_HZ: f64 = SAMPLE_RATE_HZ * OVERSAMPLE as f64;

/// Gaussian pulse support in symbol periods.
const GFSK_SPAN: usize = 4;

const BARKER_11: [f64; 11] = [1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0];

/// 802.15.4 2.4 GHz chip sequence for data symbol 0 (c0 first).
const ZB_SYMBOL_0: [u8; 32] = [
    1, 1, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 1, 0,
];

pub(crate) fn generate<R: Rng>(variant: &ModulationVariant, symbol_offset: f64, n: usize, rng: &mut R) -> Vec<Complex64> {
    match (variant.scheme, variant.shaping) {
        (Scheme::Gfsk, Shaping::Gaussian { bt, modulation_index }) => {
            gfsk(variant.symbol_rate, bt, modulation_index, symbol_offset, n, rng)
        }
        (Scheme::OqpskDsss, Shaping::HalfSine { chip_rate_hz }) => oqpsk(chip_rate_hz, symbol_offset, n, rng),
        (scheme, Shaping::RectChips { chip_rate_hz }) => {
            let chips_per_symbol = match scheme {
                Scheme::DbpskBarker | Scheme::DqpskBarker => 11,
                _ => 8,
            };
            let span = (n - 1) as f64 / HI_RATE_HZ + symbol_offset;
            let n_symbols = (span * chip_rate_hz) as usize / chips_per_symbol + 2;
            let chips = dsss_chips(scheme, n_symbols, rng);
            (0..n)
                .map(|k| {
                    let t = k as f64 / HI_RATE_HZ + symbol_offset;
                    chips[(t * chip_rate_hz) as usize]
                })
                .collect()
        }
        (scheme, shaping) => unreachable!("catalog pairs {scheme:?} with {shaping:?}"),
    }
}

/// Unit-area Gaussian-filtered rectangular frequency pulse, evaluated at
/// `u` seconds from the symbol center.
fn gaussian_pulse(u: f64, symbol_period: f64, bt: f64) -> f64 {
    let sigma = (2.0f64.ln()).sqrt() / (2.0 * PI * bt / symbol_period);
    let s = sigma * SQRT_2;
    0.5 * (libm::erf((u + symbol_period / 2.0) / s) - libm::erf((u - symbol_period / 2.0) / s)) / symbol_period
}

fn gfsk<R: Rng>(symbol_rate: f64, bt: f64, h: f64, symbol_offset: f64, n: usize, rng: &mut R) -> Vec<Complex64> {
    let sps_f = HI_RATE_HZ / symbol_rate;
    let sps = sps_f.round() as usize;
    assert!((sps_f - sps as f64).abs() < 1e-9, "GFSK needs an integer oversampling ratio");
    let dt = 1.0 / HI_RATE_HZ;
    let period = 1.0 / symbol_rate;
    let q = (symbol_offset / dt).floor();
    let frac = symbol_offset - q * dt;
    let q = q as usize;

    // pulse table: entry j is the pulse at (j + 0.5) dt + frac - span/2
    let half_span = GFSK_SPAN / 2;
    let mut table: Vec<f64> = (0..GFSK_SPAN * sps)
        .map(|j| gaussian_pulse((j as f64 + 0.5) * dt + frac - half_span as f64 * period, period, bt))
        .collect();
    let area: f64 = table.iter().sum::<f64>() * dt;
    table.iter_mut().for_each(|g| *g /= area);

    // symbols -pad..count, stored with an index shift of `pad`
    let pad = half_span + 1;
    let count = (n + q) / sps + half_span + 2;
    let symbols: Vec<f64> = (0..count + pad).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();

    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        out.push(Complex64::from_polar(1.0, phase));
        let pos = k + q;
        let centre = pos / sps;
        let mut freq = 0.0;
        for sym in (centre + pad).saturating_sub(half_span + 1)..=centre + pad + half_span {
            // j = pos - (sym - pad) * sps + half_span * sps
            let j = (pos + (pad + half_span) * sps) as isize - (sym * sps) as isize;
            if (0..table.len() as isize).contains(&j) {
                freq += symbols[sym] * table[j as usize];
            }
        }
        phase += PI * h * freq * dt;
    }
    out
}

fn bits<R: Rng>(rng: &mut R, count: usize) -> Vec<bool> {
    (0..count).map(|_| rng.random::<bool>()).collect()
}

fn dqpsk_step(b0: bool, b1: bool) -> f64 {
    match (b0, b1) {
        (false, false) => 0.0,
        (false, true) => FRAC_PI_2,
        (true, true) => PI,
        (true, false) => 3.0 * FRAC_PI_2,
    }
}

fn qpsk_phase(b0: bool, b1: bool) -> f64 {
    match (b0, b1) {
        (false, false) => 0.0,
        (false, true) => FRAC_PI_2,
        (true, false) => PI,
        (true, true) => 3.0 * FRAC_PI_2,
    }
}

fn cck_codeword(p1: f64, p2: f64, p3: f64, p4: f64) -> [Complex64; 8] {
    let e = |p: f64| Complex64::from_polar(1.0, p);
    [
        e(p1 + p2 + p3 + p4),
        e(p1 + p3 + p4),
        e(p1 + p2 + p4),
        -e(p1 + p4),
        e(p1 + p2 + p3),
        e(p1 + p3),
        -e(p1 + p2),
        e(p1),
    ]
}

fn dsss_chips<R: Rng>(scheme: Scheme, n_symbols: usize, rng: &mut R) -> Vec<Complex64> {
    let mut phase = 0.0f64;
    let mut chips = Vec::new();
    for _ in 0..n_symbols {
        match scheme {
            Scheme::DbpskBarker | Scheme::DqpskBarker => {
                phase += if scheme == Scheme::DbpskBarker {
                    if rng.random::<bool>() { PI } else { 0.0 }
                } else {
                    let b = bits(rng, 2);
                    dqpsk_step(b[0], b[1])
                };
                let carrier = Complex64::from_polar(1.0, phase);
                chips.extend(BARKER_11.iter().map(|&c| carrier * c));
            }
            Scheme::Cck5_5 => {
                let b = bits(rng, 4);
                phase += dqpsk_step(b[0], b[1]);
                let p2 = if b[2] { PI } else { 0.0 } + FRAC_PI_2;
                let p4 = if b[3] { PI } else { 0.0 };
                chips.extend(cck_codeword(phase, p2, 0.0, p4));
            }
            Scheme::Cck11 => {
                let b = bits(rng, 8);
                phase += dqpsk_step(b[0], b[1]);
                let (p2, p3, p4) = (qpsk_phase(b[2], b[3]), qpsk_phase(b[4], b[5]), qpsk_phase(b[6], b[7]));
                chips.extend(cck_codeword(phase, p2, p3, p4));
            }
            other => unreachable!("{other:?} is not a DSSS/CCK scheme"),
        }
    }
    chips
}

/// Chip sequence of 802.15.4 data symbol `symbol` (0..16), as +-1.
fn zb_chips(symbol: usize) -> [f64; 32] {
    let base = symbol % 8;
    let mut out = [0.0; 32];
    for (i, c) in out.iter_mut().enumerate() {
        let mut bit = ZB_SYMBOL_0[(i + 32 - 4 * base) % 32];
        if symbol >= 8 && i % 2 == 1 {
            bit ^= 1;
        }
        *c = if bit == 1 { 1.0 } else { -1.0 };
    }
    out
}

fn oqpsk<R: Rng>(chip_rate: f64, symbol_offset: f64, n: usize, rng: &mut R) -> Vec<Complex64> {
    let tc = 1.0 / chip_rate;
    let symbol_period = 32.0 * tc;
    // one leading symbol so the delayed Q branch always has a chip to draw from
    let start = symbol_offset + symbol_period;
    let span = (n - 1) as f64 / HI_RATE_HZ + start;
    let n_symbols = (span / symbol_period) as usize + 2;
    let chips: Vec<f64> = (0..n_symbols).flat_map(|_| zb_chips(rng.random_range(0..16))).collect();
    (0..n)
        .map(|k| {
            let t = k as f64 / HI_RATE_HZ + start;
            let ki = (t / (2.0 * tc)) as usize;
            let ti = t - 2.0 * ki as f64 * tc;
            let tq = t - tc;
            let kq = (tq / (2.0 * tc)) as usize;
            let tq = tq - 2.0 * kq as f64 * tc;
            let pulse = |u: f64| (PI * u / (2.0 * tc)).sin();
            Complex64::new(chips[2 * ki] * pulse(ti), chips[2 * kq + 1] * pulse(tq))
        })
        .collect()
}
