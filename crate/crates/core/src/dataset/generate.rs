use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{
    Dataset, DatasetKind, DatasetManifest, DatasetRecord, GenConfig, LabelSet, SirMode, MAX_INTERFERERS,
    SOURCE_SNR_DB,
};
use crate::error::{invalid, Error, Result};
use crate::seed::{self, tag};
use crate::signal::{class_spec, synthesize_burst, ClassId, IqSnapshot, NUM_CLASSES};

/// Records generated per parallel work unit when streaming.
const CHUNK: usize = 4096;

/// Adds circularly-symmetric complex Gaussian noise of power
/// `P * 10^(-snr_db / 10)`, where `P` is the measured snapshot power.
/// `snr_db = +inf` returns the input unchanged.
pub fn add_awgn(snapshot: &IqSnapshot, snr_db: f64, seed: u64) -> Result<IqSnapshot> {
    if snr_db == f64::INFINITY {
        return Ok(snapshot.clone());
    }
    if !snr_db.is_finite() {
        return invalid(format!("snr_db must be finite or +inf, got {snr_db}"));
    }
    let noise_power = snapshot.power() * 10f64.powf(-snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = seed::rng(seed);
    Ok(IqSnapshot::from_fn(|k| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        snapshot.samples()[k] + Complex64::new(re, im) * sigma
    }))
}

/// Record `index` of the single-label dataset. Records are ordered by class,
/// then SNR, then repetition.
pub fn single_label_record(config: &GenConfig, index: usize) -> Result<DatasetRecord> {
    let per_class = config.snr_grid.len() * config.snapshots_per_class_snr;
    if index >= NUM_CLASSES * per_class {
        return invalid(format!("record index {index} beyond single-label count {}", NUM_CLASSES * per_class));
    }
    let class = ClassId::new(index / per_class)?;
    let snr = config.snr_grid[(index % per_class) / config.snapshots_per_class_snr];
    let record_seed = seed::derive(config.master_seed, &[tag::SINGLE, index as u64]);
    let spec = class_spec(class);
    let mut rng = seed::rng(record_seed);
    let variant = &spec.variant_set[rng.random_range(0..spec.variant_set.len())];
    let burst = synthesize_burst(class, variant, seed::derive(record_seed, &[tag::BURST]))?;
    let noisy = add_awgn(&burst, snr as f64, seed::derive(record_seed, &[tag::NOISE]))?;
    Ok(DatasetRecord {
        snapshot: noisy.quantized_f32(),
        labels: LabelSet::single(class),
        utilized_class: None,
        snr_db: Some(snr),
        num_interferers: 0,
        seed: record_seed,
    })
}

/// Streams the single-label dataset in record order to `sink`; returns the
/// number of records emitted.
pub fn generate_single_label_streaming(
    config: &GenConfig,
    mut sink: impl FnMut(DatasetRecord) -> Result<()>,
) -> Result<u64> {
    config.validate()?;
    let total = config.single_label_count();
    for start in (0..total).step_by(CHUNK) {
        let chunk: Vec<DatasetRecord> = (start..(start + CHUNK).min(total))
            .into_par_iter()
            .map(|i| single_label_record(config, i))
            .collect::<Result<_>>()?;
        chunk.into_iter().try_for_each(&mut sink)?;
    }
    Ok(total as u64)
}

pub fn generate_single_label(config: &GenConfig) -> Result<Dataset> {
    let mut records = Vec::with_capacity(config.single_label_count());
    let count = generate_single_label_streaming(config, |r| {
        records.push(r);
        Ok(())
    })?;
    Ok(Dataset {
        records,
        manifest: Some(DatasetManifest { kind: DatasetKind::Single, config: config.clone(), record_count: count }),
    })
}

/// Amplitude applied to each interferer when `n` are superimposed.
pub fn interference_weight(n: usize, mode: SirMode) -> f64 {
    match mode {
        SirMode::PowerPreserving => (n as f64).sqrt().recip(),
        SirMode::LiteralOneOverN => (n as f64).recip(),
    }
}

/// Weighted sum `a_N * sum_i x_i` of the interferer snapshots.
pub fn interference_sum(interferers: &[&DatasetRecord], mode: SirMode) -> IqSnapshot {
    let a = interference_weight(interferers.len(), mode);
    IqSnapshot::from_fn(|k| interferers.iter().map(|r| r.snapshot.samples()[k]).sum::<Complex64>() * a)
}

/// Superimposes a utilized single-label record and 1..=6 interferers with
/// pairwise distinct classes. The label set is the union of the sources.
pub fn combine_multi_label(
    utilized: &DatasetRecord,
    interferers: &[&DatasetRecord],
    mode: SirMode,
) -> Result<DatasetRecord> {
    let n = interferers.len();
    if n == 0 || n > MAX_INTERFERERS {
        return invalid(format!("number of interferers {n} outside [1, {MAX_INTERFERERS}]"));
    }
    let sources = std::iter::once(utilized).chain(interferers.iter().copied());
    let mut labels = LabelSet::empty();
    for (i, r) in sources.clone().enumerate() {
        let class = match (r.is_single_label(), r.single_class()) {
            (true, Some(c)) => c,
            _ => return invalid(format!("source {i} is not a single-label record (labels {:?})", r.labels)),
        };
        if labels.contains(class) {
            return invalid(format!("class {class} appears more than once in the mixture"));
        }
        labels.insert(class);
    }
    let interference = interference_sum(interferers, mode);
    let snapshot = (&utilized.snapshot + &interference).quantized_f32();
    let snr_db = utilized.snr_db.filter(|s| sources.clone().all(|r| r.snr_db == Some(*s)));
    let seeds: Vec<u64> = sources.map(|r| r.seed).collect();
    Ok(DatasetRecord {
        snapshot,
        labels,
        utilized_class: utilized.single_class(),
        snr_db,
        num_interferers: n as u8,
        seed: seed::derive(seeds[0], &seeds[1..]),
    })
}

/// Per-class pools of 20 dB single-label records used as mixture sources.
#[derive(Debug, Clone)]
pub struct SourcePool {
    by_class: Vec<Vec<DatasetRecord>>,
}

impl SourcePool {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DatasetRecord>) -> Result<Self> {
        let mut pool = SourcePool { by_class: vec![Vec::new(); NUM_CLASSES] };
        for r in records {
            pool.offer(r.clone());
        }
        pool.check()?;
        Ok(pool)
    }

    /// Keeps `record` if it is a single-label record at the source SNR.
    pub fn offer(&mut self, record: DatasetRecord) {
        if record.snr_db == Some(SOURCE_SNR_DB) && record.is_single_label() {
            if let Some(c) = record.single_class() {
                self.by_class[c.index()].push(record);
            }
        }
    }

    pub fn empty() -> Self {
        SourcePool { by_class: vec![Vec::new(); NUM_CLASSES] }
    }

    pub fn check(&self) -> Result<()> {
        let missing: Vec<usize> = (0..NUM_CLASSES).filter(|&c| self.by_class[c].is_empty()).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "single-label dataset has no {SOURCE_SNR_DB} dB records for classes {missing:?}"
            )))
        }
    }

    pub fn class_pool(&self, class: ClassId) -> &[DatasetRecord] {
        &self.by_class[class.index()]
    }
}

/// The sources drawn for one multi-label record.
#[derive(Debug, Clone)]
pub struct MixComponents<'a> {
    pub utilized: &'a DatasetRecord,
    pub interferers: Vec<&'a DatasetRecord>,
    pub record_seed: u64,
}

/// Draws the sources of multi-label record `index`: N from the interleaved
/// interferer-count schedule, a uniform utilized class, N distinct other
/// classes without replacement, and uniform pool members for each.
pub fn multi_label_components<'a>(config: &GenConfig, pool: &'a SourcePool, index: usize) -> Result<MixComponents<'a>> {
    if config.interferer_counts.is_empty() {
        return invalid("interferer_counts is empty");
    }
    let n = config.interferer_counts[index % config.interferer_counts.len()] as usize;
    let record_seed = seed::derive(config.master_seed, &[tag::MULTI, index as u64]);
    let mut rng = seed::rng(record_seed);
    let utilized_class = ClassId::new(rng.random_range(0..NUM_CLASSES))?;
    let mut draw = |class: ClassId| -> Result<&'a DatasetRecord> {
        let members = pool.class_pool(class);
        if members.is_empty() {
            return invalid(format!("no {SOURCE_SNR_DB} dB source records for class {class}"));
        }
        Ok(&members[rng.random_range(0..members.len())])
    };
    let utilized = draw(utilized_class)?;
    let others: Vec<ClassId> = ClassId::all().filter(|&c| c != utilized_class).collect();
    let picks = index::sample(&mut seed::rng(seed::derive(record_seed, &[1])), others.len(), n);
    let interferers = picks.iter().map(|i| draw(others[i])).collect::<Result<Vec<_>>>()?;
    Ok(MixComponents { utilized, interferers, record_seed })
}

fn multi_record(config: &GenConfig, pool: &SourcePool, index: usize) -> Result<DatasetRecord> {
    let parts = multi_label_components(config, pool, index)?;
    let mut record = combine_multi_label(parts.utilized, &parts.interferers, config.sir_mode)?;
    record.seed = parts.record_seed;
    Ok(record)
}

pub fn generate_multi_label_streaming(
    pool: &SourcePool,
    config: &GenConfig,
    mut sink: impl FnMut(DatasetRecord) -> Result<()>,
) -> Result<u64> {
    config.validate()?;
    pool.check()?;
    let total = config.multi_total;
    for start in (0..total).step_by(CHUNK) {
        let chunk: Vec<DatasetRecord> = (start..(start + CHUNK).min(total))
            .into_par_iter()
            .map(|i| multi_record(config, pool, i))
            .collect::<Result<_>>()?;
        chunk.into_iter().try_for_each(&mut sink)?;
    }
    Ok(total as u64)
}

pub fn generate_multi_label(single: &Dataset, config: &GenConfig) -> Result<Dataset> {
    let pool = SourcePool::from_records(&single.records)?;
    let mut records = Vec::with_capacity(config.multi_total);
    let count = generate_multi_label_streaming(&pool, config, |r| {
        records.push(r);
        Ok(())
    })?;
    Ok(Dataset {
        records,
        manifest: Some(DatasetManifest { kind: DatasetKind::Multi, config: config.clone(), record_count: count }),
    })
}

/// Assigns each record to train (`true`) or validation (`false`), shuffling
/// within each interferer-count stratum and sending `round(len * fraction)`
/// of every stratum to train.
pub fn partition_indices(num_interferers: &[u8], train_fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return invalid(format!("train_fraction {train_fraction} outside (0, 1)"));
    }
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); 256];
    for (i, &n) in num_interferers.iter().enumerate() {
        strata[n as usize].push(i);
    }
    let mut assign = vec![false; num_interferers.len()];
    for (n, members) in strata.iter_mut().enumerate().filter(|(_, m)| !m.is_empty()) {
        let take = (members.len() as f64 * train_fraction).round() as usize;
        let mut rng = seed::rng(seed::derive(seed, &[tag::SPLIT, n as u64]));
        let chosen = index::sample(&mut rng, members.len(), take);
        for i in chosen.iter() {
            assign[members[i]] = true;
        }
    }
    let train = assign.iter().filter(|&&t| t).count();
    if train == 0 || train == assign.len() {
        return invalid(format!(
            "split of {} records at fraction {train_fraction} leaves an empty side",
            assign.len()
        ));
    }
    Ok(assign)
}

/// Disjoint stratified train/validation partition; both halves keep the
/// input record order.
pub fn split_train_val(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let ns: Vec<u8> = dataset.records.iter().map(|r| r.num_interferers).collect();
    let assign = partition_indices(&ns, train_fraction, seed)?;
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (r, &t) in dataset.records.iter().zip(&assign) {
        if t { train.push(r.clone()) } else { val.push(r.clone()) }
    }
    let manifest = |kind, count: usize| {
        dataset.manifest.as_ref().map(|m| DatasetManifest {
            kind,
            config: GenConfig { train_fraction, ..m.config.clone() },
            record_count: count as u64,
        })
    };
    let (nt, nv) = (train.len(), val.len());
    Ok((
        Dataset { records: train, manifest: manifest(DatasetKind::Train, nt) },
        Dataset { records: val, manifest: manifest(DatasetKind::Validation, nv) },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::measure_power;

    fn tiny_config() -> GenConfig {
        GenConfig {
            snapshots_per_class_snr: 2,
            snr_grid: vec![0.0, 20.0],
            multi_total: 60,
            interferer_counts: (1..=6).collect(),
            sir_mode: SirMode::PowerPreserving,
            master_seed: 5,
            train_fraction: 0.8,
        }
    }

    fn unit_tone(freq_bins: f64, seed: u64) -> IqSnapshot {
        let phase = seed as f64 * 0.37;
        IqSnapshot::from_fn(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * freq_bins * k as f64 / 128.0 + phase))
    }

    fn single(class: usize, snapshot: IqSnapshot) -> DatasetRecord {
        DatasetRecord {
            snapshot,
            labels: LabelSet::single(ClassId::new(class).unwrap()),
            utilized_class: None,
            snr_db: Some(SOURCE_SNR_DB),
            num_interferers: 0,
            seed: class as u64,
        }
    }

    #[test]
    fn awgn_infinite_snr_is_identity() {
        let x = unit_tone(3.0, 0);
        assert_eq!(add_awgn(&x, f64::INFINITY, 1).unwrap(), x);
        assert!(add_awgn(&x, f64::NAN, 1).is_err());
    }

    #[test]
    fn awgn_zero_db_noise_power() {
        let x = unit_tone(3.0, 0);
        // A single 128-sample estimate has ~9% standard deviation, so the
        // 5% bound is checked on the mean estimate over 64 seeds.
        let estimate = |seed| {
            let y = add_awgn(&x, 0.0, seed).unwrap();
            y.samples().iter().zip(x.samples()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / 128.0
        };
        let mean = (0..64).map(estimate).sum::<f64>() / 64.0;
        assert!((mean - 1.0).abs() < 0.05, "mean noise power {mean}");
        assert_eq!(add_awgn(&x, 0.0, 11).unwrap(), add_awgn(&x, 0.0, 11).unwrap());
    }

    #[test]
    fn awgn_calibration_over_many_samples() {
        let x = unit_tone(5.0, 1);
        for snr in [-10.0, 0.0, 7.0] {
            let mut total = 0.0;
            let trials = 100;
            for s in 0..trials {
                let y = add_awgn(&x, snr, 1000 + s).unwrap();
                total += y.samples().iter().zip(x.samples()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
            }
            let measured = total / (trials as f64 * 128.0);
            let expected = 10f64.powf(-snr / 10.0);
            assert!((measured / expected - 1.0).abs() < 0.02, "snr {snr}: {measured} vs {expected}");
        }
    }

    #[test]
    fn single_label_counts_and_labels() {
        let cfg = GenConfig { snapshots_per_class_snr: 10, ..tiny_config() };
        let ds = generate_single_label(&cfg).unwrap();
        assert_eq!(ds.len(), 300);
        ds.validate_counts().unwrap();
        assert!(ds.records.iter().all(|r| r.labels.len() == 1 && r.validate().is_ok()));
        assert_eq!(ds.records[0].single_class().unwrap().index(), 0);
        assert_eq!(ds.records[299].single_class().unwrap().index(), 14);
        assert_eq!(ds.records[19].snr_db, Some(20.0));
    }

    #[test]
    fn combine_single_interferer_is_plain_sum() {
        let u = single(3, unit_tone(2.0, 1));
        let i = single(10, unit_tone(-9.0, 2));
        for mode in [SirMode::PowerPreserving, SirMode::LiteralOneOverN] {
            let m = combine_multi_label(&u, &[&i], mode).unwrap();
            let expect = (&u.snapshot + &i.snapshot).quantized_f32();
            assert_eq!(m.snapshot, expect);
        }
    }

    #[test]
    fn combine_labels_are_the_union() {
        let u = single(3, unit_tone(2.0, 1));
        let (a, b) = (single(10, unit_tone(-9.0, 2)), single(14, unit_tone(20.0, 3)));
        let m = combine_multi_label(&u, &[&a, &b], SirMode::PowerPreserving).unwrap();
        assert_eq!(m.labels.iter().map(|c| c.index()).collect::<Vec<_>>(), vec![3, 10, 14]);
        assert_eq!(m.utilized_class, ClassId::new(3).ok());
        assert_eq!(m.num_interferers, 2);
        m.validate().unwrap();
    }

    #[test]
    fn combine_power_preserving_sir_four_interferers() {
        let u = single(0, unit_tone(1.0, 0));
        let sources: Vec<DatasetRecord> =
            [(4, 17.0), (9, 33.0), (11, -40.0), (13, -20.0)].iter().map(|&(c, f)| single(c, unit_tone(f, c as u64))).collect();
        let refs: Vec<&DatasetRecord> = sources.iter().collect();
        let sir_db = 10.0 * (measure_power(&u.snapshot) / measure_power(&interference_sum(&refs, SirMode::PowerPreserving))).log10();
        assert!(sir_db.abs() <= 1.0, "{sir_db}");
        let literal = 10.0 * (1.0 / measure_power(&interference_sum(&refs, SirMode::LiteralOneOverN))).log10();
        assert!((literal - 10.0 * 4f64.log10()).abs() < 0.5);
    }

    #[test]
    fn combine_rejects_bad_inputs() {
        let u = single(3, unit_tone(2.0, 1));
        let dup = single(3, unit_tone(5.0, 1));
        assert!(combine_multi_label(&u, &[&dup], SirMode::PowerPreserving).is_err());
        assert!(combine_multi_label(&u, &[], SirMode::PowerPreserving).is_err());
        let many: Vec<DatasetRecord> = (4..11).map(|c| single(c, unit_tone(c as f64, 0))).collect();
        let refs: Vec<&DatasetRecord> = many.iter().collect();
        assert!(combine_multi_label(&u, &refs, SirMode::PowerPreserving).is_err());
        let mixed = combine_multi_label(&u, &refs[..2], SirMode::PowerPreserving).unwrap();
        assert!(combine_multi_label(&single(0, unit_tone(1.0, 0)), &[&mixed], SirMode::PowerPreserving).is_err());
    }

    #[test]
    fn multi_label_generation_properties() {
        let cfg = tiny_config();
        let single = generate_single_label(&cfg).unwrap();
        let multi = generate_multi_label(&single, &cfg).unwrap();
        assert_eq!(multi.len(), 60);
        multi.validate_counts().unwrap();
        assert_eq!(&multi.count_by_interferers()[1..], &[10; 6]);
        for r in &multi.records {
            r.validate().unwrap();
            assert!((2..=7).contains(&r.labels.len()));
            assert_eq!(r.num_interferers as usize, r.labels.len() - 1);
        }
        let again = generate_multi_label(&single, &cfg).unwrap();
        assert_eq!(multi, again);
    }

    #[test]
    fn multi_label_requires_source_pool() {
        let cfg = GenConfig { snr_grid: vec![0.0, 10.0], ..tiny_config() };
        let single = generate_single_label(&cfg).unwrap();
        let err = generate_multi_label(&single, &cfg).unwrap_err();
        assert!(err.to_string().contains("20 dB"), "{err}");
    }

    #[test]
    fn split_sizes_and_partition() {
        let ns: Vec<u8> = vec![0; 10];
        let assign = partition_indices(&ns, 0.5, 3).unwrap();
        assert_eq!(assign.iter().filter(|&&t| t).count(), 5);
        assert!(partition_indices(&[0, 0], 0.1, 3).is_err());
        assert!(partition_indices(&ns, 1.0, 3).is_err());

        let cfg = tiny_config();
        let multi = generate_multi_label(&generate_single_label(&cfg).unwrap(), &cfg).unwrap();
        let (train, val) = split_train_val(&multi, 0.8, 9).unwrap();
        assert_eq!((train.len(), val.len()), (48, 12));
        assert_eq!(&train.count_by_interferers()[1..], &[8; 6]);
        let mut seeds: Vec<u64> = train.records.iter().chain(&val.records).map(|r| r.seed).collect();
        seeds.sort_unstable();
        let mut all: Vec<u64> = multi.records.iter().map(|r| r.seed).collect();
        all.sort_unstable();
        assert_eq!(seeds, all);
    }
}
