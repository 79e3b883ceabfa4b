//! Thresholding, per-class true positive rates and their groupings.
//!
//! A class counts for a record when it is a true label of that record; with
//! `mask_utilized` the record's utilized class is left out of that class's
//! tally, since the utilized signal is known and not interference.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{LabelSet, RecordMeta};
use crate::error::{Error, Result};
use crate::signal::{ClassId, Technology, NUM_CLASSES};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const THRESHOLD_SWEEP: [f64; 3] = [0.3, 0.5, 0.7];

/// Classes whose score is strictly greater than `threshold`.
pub fn apply_threshold(scores: &[f64], threshold: f64) -> LabelSet {
    scores
        .iter()
        .take(NUM_CLASSES)
        .enumerate()
        .filter(|(_, &s)| s > threshold)
        .map(|(i, _)| ClassId::new(i).expect("index below NUM_CLASSES"))
        .collect()
}

/// Thresholds row-major score rows of width 15.
pub fn decide_all(scores: &[f64], threshold: f64) -> Result<Vec<LabelSet>> {
    if scores.len() % NUM_CLASSES != 0 {
        return Err(Error::Shape(format!("{} scores is not a multiple of {NUM_CLASSES}", scores.len())));
    }
    Ok(scores.chunks(NUM_CLASSES).map(|row| apply_threshold(row, threshold)).collect())
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    target: u8,
    n: u8,
    utilized: Option<u8>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    tp: u64,
    fn_: u64,
    fp: u64,
}

/// Tallies for one group. Fields that a grouping aggregates over are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTally {
    pub target: Option<u8>,
    pub num_interferers: Option<u8>,
    pub utilized: Option<u8>,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Extension: false positives, reported because TPR alone rewards
    /// predicting every class.
    pub fp: u64,
    /// `tp / (tp + fn)`, `None` for a group with no positives.
    pub tpr: Option<f64>,
}

impl GroupTally {
    fn new(target: Option<u8>, num_interferers: Option<u8>, utilized: Option<u8>, c: Counts) -> Self {
        let pos = c.tp + c.fn_;
        GroupTally {
            target,
            num_interferers,
            utilized,
            tp: c.tp,
            fn_: c.fn_,
            fp: c.fp,
            tpr: (pos > 0).then(|| c.tp as f64 / pos as f64),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tp + self.fn_ == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Class,
    N,
    Utilized,
}

/// Tallies keyed by (target class, interferer count, utilized class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TprReport {
    pub mask_utilized: bool,
    pub groups: Vec<GroupTally>,
}

pub fn tpr_report(predicted: &[LabelSet], truths: &[RecordMeta], mask_utilized: bool) -> Result<TprReport> {
    if predicted.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} decisions for {} truth records",
            predicted.len(),
            truths.len()
        )));
    }
    let mut tally: BTreeMap<Key, Counts> = BTreeMap::new();
    for (pred, truth) in predicted.iter().zip(truths) {
        let utilized = truth.utilized_class.map(u8::from);
        for c in ClassId::all() {
            if mask_utilized && truth.utilized_class == Some(c) {
                continue;
            }
            let key = Key { target: c.into(), n: truth.num_interferers, utilized };
            let counts = tally.entry(key).or_default();
            match (truth.labels.contains(c), pred.contains(c)) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fn_ += 1,
                (false, true) => counts.fp += 1,
                (false, false) => {}
            }
        }
    }
    let groups =
        tally.into_iter().map(|(k, c)| GroupTally::new(Some(k.target), Some(k.n), k.utilized, c)).collect();
    Ok(TprReport { mask_utilized, groups })
}

impl TprReport {
    fn sum_by<K: Ord>(&self, key: impl Fn(&GroupTally) -> K) -> BTreeMap<K, Counts> {
        let mut out: BTreeMap<K, Counts> = BTreeMap::new();
        for g in &self.groups {
            let c = out.entry(key(g)).or_default();
            c.tp += g.tp;
            c.fn_ += g.fn_;
            c.fp += g.fp;
        }
        out
    }

    /// Collapses the groups onto one key.
    pub fn rollup(&self, by: GroupBy) -> Vec<GroupTally> {
        match by {
            GroupBy::Class => {
                let sums = self.sum_by(|g| g.target);
                // every class gets a row, possibly empty
                (0..NUM_CLASSES as u8)
                    .map(|c| GroupTally::new(Some(c), None, None, sums.get(&Some(c)).copied().unwrap_or_default()))
                    .collect()
            }
            GroupBy::N => {
                self.sum_by(|g| g.num_interferers).into_iter().map(|(n, c)| GroupTally::new(None, n, None, c)).collect()
            }
            GroupBy::Utilized => {
                self.sum_by(|g| g.utilized).into_iter().map(|(u, c)| GroupTally::new(None, None, u, c)).collect()
            }
        }
    }

    /// Mean of the per-class TPRs over classes with at least one positive.
    pub fn mean_tpr(&self) -> Option<f64> {
        let tprs: Vec<f64> = self.rollup(GroupBy::Class).iter().filter_map(|g| g.tpr).collect();
        (!tprs.is_empty()).then(|| tprs.iter().sum::<f64>() / tprs.len() as f64)
    }
}

/// Linear-interpolation quantile of sorted values (`q` in [0, 1]).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// One point of a per-technology TPR curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechPoint {
    pub interferer: Technology,
    pub utilized: Technology,
    pub num_interferers: u8,
    /// Mean, 10th and 90th percentile over the utilized-class groups.
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
    /// Number of utilized classes contributing.
    pub groups: usize,
}

impl TechPoint {
    /// Interferer and utilized signal share a technology.
    pub fn is_same_technology(&self) -> bool {
        self.interferer == self.utilized
    }
}

/// Per interferer technology, utilized technology and N: the TPR of each
/// utilized class (class tallies within the technology pooled, i.e. weighted
/// by support), summarized by mean and 10/90 % quantiles.
pub fn tpr_by_interferer_count(report: &TprReport) -> Vec<TechPoint> {
    let mut per_utilized: BTreeMap<(Technology, u8, u8), Counts> = BTreeMap::new();
    for g in &report.groups {
        let (Some(t), Some(n), Some(u)) = (g.target, g.num_interferers, g.utilized) else { continue };
        let tech = ClassId::new(t as usize).expect("valid class").technology();
        let c = per_utilized.entry((tech, n, u)).or_default();
        c.tp += g.tp;
        c.fn_ += g.fn_;
    }
    let mut values: BTreeMap<(Technology, Technology, u8), Vec<f64>> = BTreeMap::new();
    for ((tech, n, u), c) in per_utilized {
        if c.tp + c.fn_ == 0 {
            continue;
        }
        let utilized = ClassId::new(u as usize).expect("valid class").technology();
        values.entry((tech, utilized, n)).or_default().push(c.tp as f64 / (c.tp + c.fn_) as f64);
    }
    values
        .into_iter()
        .map(|((interferer, utilized, n), mut v)| {
            v.sort_by(f64::total_cmp);
            TechPoint {
                interferer,
                utilized,
                num_interferers: n,
                mean: v.iter().sum::<f64>() / v.len() as f64,
                p10: quantile(&v, 0.1),
                p90: quantile(&v, 0.9),
                groups: v.len(),
            }
        })
        .collect()
}

/// Same-technology mean TPR for `tech`, averaged over interferer counts.
pub fn sti_mean(points: &[TechPoint], tech: Technology) -> Option<f64> {
    let v: Vec<f64> =
        points.iter().filter(|p| p.interferer == tech && p.utilized == tech).map(|p| p.mean).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub threshold: f64,
    pub snr_db: f32,
    pub mean_tpr: Option<f64>,
    pub records: usize,
}

/// Mean per-class TPR at each SNR of a single-label set, for each threshold.
pub fn single_label_comparison(scores: &[f64], truths: &[RecordMeta], thresholds: &[f64]) -> Result<Vec<SnrPoint>> {
    if scores.len() != truths.len() * NUM_CLASSES {
        return Err(Error::Shape(format!("{} scores for {} records", scores.len(), truths.len())));
    }
    if truths.is_empty() {
        return Err(Error::InvalidArgument("no records to compare".into()));
    }
    let mut by_snr: BTreeMap<u32, (f32, Vec<usize>)> = BTreeMap::new();
    for (i, t) in truths.iter().enumerate() {
        let Some(snr) = t.snr_db else {
            return Err(Error::InvalidArgument(format!("record {i} has no SNR")));
        };
        if t.labels.len() != 1 || t.utilized_class.is_some() {
            return Err(Error::InvalidArgument(format!("record {i} is not single-label")));
        }
        // order-preserving key for f32
        let bits = snr.to_bits();
        let key = if bits >> 31 == 1 { !bits } else { bits | 1 << 31 };
        by_snr.entry(key).or_insert((snr, Vec::new())).1.push(i);
    }
    let mut out = Vec::new();
    for &threshold in thresholds {
        check_threshold(threshold)?;
        let predicted = decide_all(scores, threshold)?;
        for (snr, idx) in by_snr.values() {
            let p: Vec<LabelSet> = idx.iter().map(|&i| predicted[i]).collect();
            let t: Vec<RecordMeta> = idx.iter().map(|&i| truths[i]).collect();
            out.push(SnrPoint {
                threshold,
                snr_db: *snr,
                mean_tpr: tpr_report(&p, &t, false)?.mean_tpr(),
                records: idx.len(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn groups_to_csv(groups: &[GroupTally]) -> String {
    let mut s = String::from("target,num_interferers,utilized,tp,fn,fp,tpr\n");
    for g in groups {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            opt(g.target),
            opt(g.num_interferers),
            opt(g.utilized),
            g.tp,
            g.fn_,
            g.fp,
            opt(g.tpr)
        );
    }
    s
}

pub fn tech_points_to_csv(points: &[TechPoint]) -> String {
    let mut s = String::from("interferer,utilized,num_interferers,mean,p10,p90,groups\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.interferer.short_name(),
            p.utilized.short_name(),
            p.num_interferers,
            p.mean,
            p.p10,
            p.p90,
            p.groups
        );
    }
    s
}

pub fn snr_points_to_csv(points: &[SnrPoint]) -> String {
    let mut s = String::from("threshold,snr_db,mean_tpr,records\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{}", p.threshold, p.snr_db, opt(p.mean_tpr), p.records);
    }
    s
}

pub fn report_to_string(report: &TprReport, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Json => crate::config::canonical_json(report)? + "\n",
        ReportFormat::Csv => groups_to_csv(&report.groups),
    })
}

pub fn emit_report(report: &TprReport, format: ReportFormat, path: &Path) -> Result<()> {
    fs::write(path, report_to_string(report, format)?)?;
    Ok(())
}
