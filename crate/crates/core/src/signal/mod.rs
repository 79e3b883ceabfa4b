//! Complex-baseband burst synthesis for the 15 channel classes of one 10 MHz
//! sensing sub-band.
//!
//! Bursts are generated at [`waveform::OVERSAMPLE`] times the sensing rate,
//! shifted to the channel offset, then low-pass filtered and decimated to
//! 10 MHz, the way a spectrum analyzer with a 10 MHz span would capture them.
//! Wide-band IEEE 802.11 b/g channels therefore appear only partially inside
//! the snapshot.

mod catalog;
mod resample;
mod waveform;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use catalog::{class_catalog, class_spec, variant_catalog, ClassSpec, ModulationVariant, Scheme, Shaping};

/// Samples per sensing snapshot.
pub const SNAPSHOT_LEN: usize = 128;
/// Sensing sample rate (equal to the sensing bandwidth).
pub const SAMPLE_RATE_HZ: f64 = 10.0e6;
/// Number of (technology, channel) classes inside one sensing sub-band.
pub const NUM_CLASSES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Technology {
    #[serde(rename = "BT_15_1")]
    Bt15_1,
    #[serde(rename = "WLAN_11BG")]
    Wlan11bg,
    #[serde(rename = "ZB_15_4")]
    Zb15_4,
}

impl Technology {
    pub const ALL: [Technology; 3] = [Technology::Bt15_1, Technology::Wlan11bg, Technology::Zb15_4];

    pub fn label(self) -> &'static str {
        match self {
            Technology::Bt15_1 => "IEEE 802.15.1",
            Technology::Wlan11bg => "IEEE 802.11 b/g",
            Technology::Zb15_4 => "IEEE 802.15.4",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Technology::Bt15_1 => "BT_15_1",
            Technology::Wlan11bg => "WLAN_11BG",
            Technology::Zb15_4 => "ZB_15_4",
        }
    }

    pub fn is_narrow_band(self) -> bool {
        !matches!(self, Technology::Wlan11bg)
    }

    /// Classes belonging to this technology, in index order.
    pub fn classes(self) -> impl Iterator<Item = ClassId> {
        ClassId::all().filter(move |c| c.technology() == self)
    }
}

/// One of the 15 class identifiers: 0-9 IEEE 802.15.1, 10-12 IEEE 802.11 b/g,
/// 13-14 IEEE 802.15.4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ClassId(u8);

impl ClassId {
    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_CLASSES {
            Ok(ClassId(index as u8))
        } else {
            invalid(format!("class index {index} outside [0, {}]", NUM_CLASSES - 1))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = ClassId> + Clone {
        (0..NUM_CLASSES as u8).map(ClassId)
    }

    pub fn technology(self) -> Technology {
        match self.0 {
            0..=9 => Technology::Bt15_1,
            10..=12 => Technology::Wlan11bg,
            _ => Technology::Zb15_4,
        }
    }
}

impl TryFrom<u8> for ClassId {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        ClassId::new(value as usize)
    }
}

impl From<ClassId> for u8 {
    fn from(c: ClassId) -> u8 {
        c.0
    }
}

impl std::fmt::Display for ClassId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// 128 complex baseband samples at 10 MHz (12.8 us).
#[derive(Debug, Clone, PartialEq)]
pub struct IqSnapshot {
    samples: Box<[Complex64]>,
}

impl IqSnapshot {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != SNAPSHOT_LEN {
            return Err(Error::Shape(format!(
                "snapshot needs {SNAPSHOT_LEN} samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return invalid("snapshot contains non-finite samples");
        }
        Ok(IqSnapshot { samples: samples.into_boxed_slice() })
    }

    pub fn zeros() -> Self {
        IqSnapshot { samples: vec![Complex64::new(0.0, 0.0); SNAPSHOT_LEN].into_boxed_slice() }
    }

    /// Builds a snapshot from a per-index generator. Panics on non-finite output.
    pub fn from_fn(f: impl FnMut(usize) -> Complex64) -> Self {
        let samples: Vec<Complex64> = (0..SNAPSHOT_LEN).map(f).collect();
        assert!(
            samples.iter().all(|s| s.re.is_finite() && s.im.is_finite()),
            "non-finite sample"
        );
        IqSnapshot { samples: samples.into_boxed_slice() }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn power(&self) -> f64 {
        measure_power(self)
    }

    pub fn scaled(&self, factor: f64) -> IqSnapshot {
        IqSnapshot::from_fn(|k| self.samples[k] * factor)
    }

    /// Rounds every component to the nearest `f32`, the precision of the
    /// dataset file format.
    pub fn quantized_f32(&self) -> IqSnapshot {
        IqSnapshot::from_fn(|k| {
            let s = self.samples[k];
            Complex64::new(s.re as f32 as f64, s.im as f32 as f64)
        })
    }

    pub(crate) fn from_boxed_unchecked(samples: Box<[Complex64]>) -> Self {
        debug_assert_eq!(samples.len(), SNAPSHOT_LEN);
        IqSnapshot { samples }
    }
}

impl std::ops::Add for &IqSnapshot {
    type Output = IqSnapshot;

    fn add(self, rhs: &IqSnapshot) -> IqSnapshot {
        IqSnapshot::from_fn(|k| self.samples[k] + rhs.samples[k])
    }
}

/// Mean of |s[k]|^2 over the snapshot.
pub fn measure_power(snapshot: &IqSnapshot) -> f64 {
    snapshot.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / SNAPSHOT_LEN as f64
}

/// Multiplies sample k by exp(i 2 pi offset k / 10 MHz).
pub fn frequency_shift(snapshot: &IqSnapshot, offset_hz: f64) -> IqSnapshot {
    let step = 2.0 * PI * offset_hz / SAMPLE_RATE_HZ;
    IqSnapshot::from_fn(|k| {
        let (s, c) = (step * k as f64).sin_cos();
        snapshot.samples[k] * Complex64::new(c, s)
    })
}

/// Synthesizes a continuously transmitting burst of `class_id` using
/// `variant`, with random payload, symbol-clock offset and carrier phase
/// drawn from `seed`. The result has unit mean power.
pub fn synthesize_burst(class_id: ClassId, variant: &ModulationVariant, seed: u64) -> Result<IqSnapshot> {
    let spec = class_spec(class_id);
    if !spec.variant_set.iter().any(|v| v == variant) {
        return invalid(format!(
            "variant '{}' is not defined for class {} ({})",
            variant.name,
            class_id,
            spec.technology.label()
        ));
    }
    let mut rng = crate::seed::rng(seed);
    let symbol_offset = rng.random::<f64>() / variant.symbol_rate;
    let phase = rng.random::<f64>() * 2.0 * PI;
    let n_hi = resample::input_len();
    let mut hi = waveform::generate(variant, symbol_offset, n_hi, &mut rng);

    let step = 2.0 * PI * spec.center_offset_hz / waveform::HI_RATE_HZ;
    for (n, s) in hi.iter_mut().enumerate() {
        let (sn, cs) = (step * n as f64 + phase).sin_cos();
        *s *= Complex64::new(cs, sn);
    }

    let mut out = resample::decimate(&hi);
    let power = out.iter().map(|s| s.norm_sqr()).sum::<f64>() / SNAPSHOT_LEN as f64;
    if !(power > 0.0 && power.is_finite()) {
        return invalid(format!("degenerate burst power {power} for class {class_id}"));
    }
    let gain = power.sqrt().recip();
    out.iter_mut().for_each(|s| *s *= gain);
    Ok(IqSnapshot::from_boxed_unchecked(out.into_boxed_slice()))
}

/// Looks up a variant by name within the class's variant set.
pub fn find_variant(class_id: ClassId, name: &str) -> Result<&'static ModulationVariant> {
    let spec = class_spec(class_id);
    spec.variant_set.iter().find(|v| v.name == name).ok_or_else(|| {
        let known: Vec<&str> = spec.variant_set.iter().map(|v| v.name.as_str()).collect();
        Error::InvalidArgument(format!(
            "unknown variant '{name}' for class {class_id}; expected one of: {}",
            known.join(", ")
        ))
    })
}
