//! Single-label (AWGN SNR sweep) and multi-label (utilized signal plus
//! weighted interferers) snapshot datasets, and their on-disk format.

mod generate;
mod io;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{ClassId, IqSnapshot, NUM_CLASSES};

pub use generate::{
    add_awgn, combine_multi_label, generate_multi_label, generate_multi_label_streaming, generate_single_label,
    generate_single_label_streaming, interference_sum, interference_weight, multi_label_components,
    partition_indices, single_label_record, split_train_val, MixComponents, SourcePool,
};
pub use io::{
    file_sha256, load_dataset, read_metadata, save_dataset, save_manifest, sidecar_path, split_file, DatasetReader,
    DatasetWriter, RecordMeta, FORMAT_VERSION, MAGIC, RECORD_BYTES,
};

/// SNR of the single-label snapshots that feed multi-label mixtures.
pub const SOURCE_SNR_DB: f32 = 20.0;
/// Largest number of interferers in one multi-label snapshot.
pub const MAX_INTERFERERS: usize = 6;

/// Subset of the 15 classes, stored as a bitmask (bit i = class i).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelSet(u16);

impl LabelSet {
    pub const fn empty() -> Self {
        LabelSet(0)
    }

    pub fn single(class: ClassId) -> Self {
        LabelSet(1 << class.index())
    }

    pub fn from_bits(bits: u16) -> Result<Self> {
        if bits >> NUM_CLASSES != 0 {
            return invalid(format!("label bitmask {bits:#06x} has bits beyond class {}", NUM_CLASSES - 1));
        }
        Ok(LabelSet(bits))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn insert(&mut self, class: ClassId) {
        self.0 |= 1 << class.index();
    }

    pub fn contains(self, class: ClassId) -> bool {
        self.0 & (1 << class.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: LabelSet) -> LabelSet {
        LabelSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = ClassId> {
        ClassId::all().filter(move |c| self.contains(*c))
    }
}

impl FromIterator<ClassId> for LabelSet {
    fn from_iter<I: IntoIterator<Item = ClassId>>(iter: I) -> Self {
        let mut set = LabelSet::empty();
        iter.into_iter().for_each(|c| set.insert(c));
        set
    }
}

impl fmt::Debug for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|c| c.index())).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub snapshot: IqSnapshot,
    pub labels: LabelSet,
    pub utilized_class: Option<ClassId>,
    /// `None` when unknown; `+inf` means noise-free.
    pub snr_db: Option<f32>,
    pub num_interferers: u8,
    pub seed: u64,
}

impl DatasetRecord {
    pub fn is_single_label(&self) -> bool {
        self.labels.len() == 1 && self.num_interferers == 0
    }

    /// The single class of a single-label record.
    pub fn single_class(&self) -> Option<ClassId> {
        if self.labels.len() == 1 {
            self.labels.iter().next()
        } else {
            None
        }
    }

    /// Interferer classes: every label except the utilized class.
    pub fn interferers(&self) -> LabelSet {
        match self.utilized_class {
            Some(u) => LabelSet(self.labels.0 & !(1 << u.index())),
            None => self.labels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return invalid("record has an empty label set");
        }
        if self.labels.len() > MAX_INTERFERERS + 1 {
            return invalid(format!("record has {} labels, at most {}", self.labels.len(), MAX_INTERFERERS + 1));
        }
        if let Some(u) = self.utilized_class {
            if !self.labels.contains(u) {
                return invalid(format!("utilized class {u} missing from labels {:?}", self.labels));
            }
            if self.num_interferers as usize != self.labels.len() - 1 {
                return invalid(format!(
                    "num_interferers {} does not match {} labels",
                    self.num_interferers,
                    self.labels.len()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SirMode {
    /// Amplitude 1/sqrt(N): aggregate interference power equals the utilized power.
    #[serde(rename = "POWER_PRESERVING")]
    PowerPreserving,
    /// Amplitude 1/N, as literally written; aggregate interference power is P/N.
    #[serde(rename = "LITERAL_ONE_OVER_N")]
    LiteralOneOverN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub snapshots_per_class_snr: usize,
    pub snr_grid: Vec<f32>,
    pub multi_total: usize,
    pub interferer_counts: Vec<u8>,
    pub sir_mode: SirMode,
    pub master_seed: u64,
    pub train_fraction: f64,
}

impl GenConfig {
    /// 715 snapshots per class and SNR over -20..=20 dB in 2 dB steps,
    /// 450,000 multi-label snapshots over 1..=6 interferers, 80/20 split.
    pub fn paper() -> Self {
        GenConfig {
            snapshots_per_class_snr: 715,
            snr_grid: (0..21).map(|i| -20.0 + 2.0 * i as f32).collect(),
            multi_total: 450_000,
            interferer_counts: (1..=6).collect(),
            sir_mode: SirMode::PowerPreserving,
            master_seed: 42,
            train_fraction: 0.8,
        }
    }

    /// Desktop-sized variant used by the test suite and `presets/desk.json`.
    pub fn desk() -> Self {
        GenConfig { snapshots_per_class_snr: 40, multi_total: 12_000, ..GenConfig::paper() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.snapshots_per_class_snr == 0 {
            return bad("snapshots_per_class_snr must be positive".into());
        }
        if self.snr_grid.is_empty() {
            return bad("snr_grid is empty".into());
        }
        if self.snr_grid.iter().any(|s| !s.is_finite()) {
            return bad("snr_grid entries must be finite".into());
        }
        if !self.snr_grid.windows(2).all(|w| w[0] < w[1]) {
            return bad(format!("snr_grid must be strictly increasing: {:?}", self.snr_grid));
        }
        if self.interferer_counts.is_empty() {
            return bad("interferer_counts is empty".into());
        }
        if let Some(n) = self.interferer_counts.iter().find(|&&n| n == 0 || n as usize > MAX_INTERFERERS) {
            return bad(format!("interferer count {n} outside [1, {MAX_INTERFERERS}]"));
        }
        let mut sorted = self.interferer_counts.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.interferer_counts.len() {
            return bad("interferer_counts has duplicates".into());
        }
        if self.multi_total % self.interferer_counts.len() != 0 {
            return bad(format!(
                "multi_total {} is not divisible by {} interferer counts",
                self.multi_total,
                self.interferer_counts.len()
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        Ok(())
    }

    pub fn single_label_count(&self) -> usize {
        NUM_CLASSES * self.snr_grid.len() * self.snapshots_per_class_snr
    }

    pub fn per_interferer_count(&self) -> usize {
        self.multi_total / self.interferer_counts.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Single,
    Multi,
    Train,
    Validation,
}

/// Generation provenance stored next to a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub kind: DatasetKind,
    pub config: GenConfig,
    pub record_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    pub manifest: Option<DatasetManifest>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks the record count against the count implied by the manifest.
    pub fn validate_counts(&self) -> Result<()> {
        let Some(m) = &self.manifest else { return Ok(()) };
        let expected = match m.kind {
            DatasetKind::Single => m.config.single_label_count() as u64,
            DatasetKind::Multi => m.config.multi_total as u64,
            DatasetKind::Train | DatasetKind::Validation => m.record_count,
        };
        if m.record_count != expected || self.records.len() as u64 != expected {
            return invalid(format!(
                "{:?} dataset holds {} records, manifest says {} (formula {expected})",
                m.kind,
                self.records.len(),
                m.record_count
            ));
        }
        Ok(())
    }

    /// Record counts per number of interferers, indexed by N (0..=6).
    pub fn count_by_interferers(&self) -> [usize; MAX_INTERFERERS + 1] {
        let mut out = [0; MAX_INTERFERERS + 1];
        for r in &self.records {
            out[(r.num_interferers as usize).min(MAX_INTERFERERS)] += 1;
        }
        out
    }
}
