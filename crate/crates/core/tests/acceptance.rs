//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one `PASS` or `FAIL` line; exits nonzero if any fails.
//!
//! `cargo test -p wii-core --test acceptance -- <substring>` runs only the
//! criteria whose name contains the substring.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::Rng;
use serde_json::Value;

use wii_core::dataset::{
    generate_single_label, interference_sum, multi_label_components, read_metadata, GenConfig, LabelSet, RecordMeta,
    SirMode, SourcePool,
};
use wii_core::eval::{decide_all, tpr_report};
use wii_core::nn::ops::{self, ConvGeom};
use wii_core::nn::{LayerSpec, Network, NetworkConfig, Workspace, INPUT_LEN};
use wii_core::preprocess::{dft_128, BinOrder, FeatureOptions};
use wii_core::{seed, ClassId, IqSnapshot, Technology, NUM_CLASSES};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: &[(&str, fn() -> Outcome)] = &[
        ("dataset-counts", dataset_counts),
        ("sir-invariant", sir_invariant),
        ("dft-oracle", dft_oracle),
        ("gradient-suite", gradient_suite),
        ("architecture-shape", architecture_shape),
        ("desk-training", desk_training),
        ("snr-curve", snr_curve),
        ("determinism", determinism),
        ("threshold-monotonicity", threshold_monotonicity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let t = Instant::now();
        let o = match std::panic::catch_unwind(check) {
            Ok(o) => o,
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        failed += usize::from(!o.pass);
        println!("{} {name} ({:.1} s): {}", if o.pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64(), o.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn wii(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_wii"))
        .args(args)
        .env_remove("WII_OUT_DIR")
        .env_remove("WII_THREADS")
        .output()
        .expect("run wii");
    assert!(out.status.success(), "wii {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Paper preset through the CLI: exact record counts and split sizes.
fn dataset_counts() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let t = Instant::now();
    let (single, multi, split) = (d.join("single.wiid"), d.join("multi.wiid"), d.join("split"));
    wii(&["gen-single", "--preset", "paper", "--out", s(&single)]);
    wii(&["gen-multi", "--preset", "paper", "--single", s(&single), "--out", s(&multi)]);
    wii(&["split", "--preset", "paper", "--in", s(&multi), "--out", s(&split)]);
    let elapsed = t.elapsed();

    let n_single = read_metadata(&single).unwrap().len();
    let meta = read_metadata(&multi).unwrap();
    let mut per_n = [0usize; 7];
    meta.iter().for_each(|m| per_n[m.num_interferers as usize] += 1);
    let n_train = read_metadata(&split.join("train.wiid")).unwrap().len();
    let n_val = read_metadata(&split.join("val.wiid")).unwrap().len();
    let pass = n_single == 225_225
        && meta.len() == 450_000
        && per_n == [0, 75_000, 75_000, 75_000, 75_000, 75_000, 75_000]
        && (n_train, n_val) == (360_000, 90_000)
        && elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "single {n_single}, multi {} (per N {:?}), split {n_train}/{n_val}, {:.0} s",
            meta.len(),
            &per_n[1..],
            elapsed.as_secs_f64()
        ),
    )
}

/// Power-preserving mixing: for each interferer count, the mean utilized
/// power over the mean interference power is 0 dB within 1 dB.
fn sir_invariant() -> Outcome {
    let config = GenConfig::desk();
    let single = generate_single_label(&config).unwrap();
    let pool = SourcePool::from_records(&single.records).unwrap();
    let mut rng = seed::rng(7);
    let mut sums = [(0.0f64, 0.0f64, 0usize); 7];
    let (mut outside, mut worst_record) = (0, 0.0f64);
    for _ in 0..1000 {
        let index = rng.random_range(0..config.multi_total);
        let parts = multi_label_components(&config, &pool, index).unwrap();
        let n = parts.interferers.len();
        let interference = interference_sum(&parts.interferers, SirMode::PowerPreserving);
        let (pu, pi) = (parts.utilized.snapshot.power(), interference.power());
        sums[n].0 += pu;
        sums[n].1 += pi;
        sums[n].2 += 1;
        let record_sir = 10.0 * (pu / pi).log10();
        worst_record = worst_record.max(record_sir.abs());
        outside += usize::from(record_sir.abs() > 1.0);
    }
    let sirs: Vec<(usize, f64, usize)> =
        (1..=6).map(|n| (n, 10.0 * (sums[n].0 / sums[n].1).log10(), sums[n].2)).collect();
    let pass = sirs.iter().all(|&(_, sir, count)| count > 0 && sir.abs() <= 1.0);
    let per_n = sirs.iter().map(|(n, sir, c)| format!("N={n}: {sir:+.3} dB ({c})")).collect::<Vec<_>>().join(", ");
    // Reported, not judged: with a fixed 1/sqrt(N) weight the per-record
    // ratio carries the cross terms of the finite snapshots.
    outcome(pass, format!("{per_n}; single records outside 1 dB: {outside}/1000, worst {worst_record:.2} dB"))
}

fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|m| {
            (0..n)
                .map(|k| x[k] * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * ((k * m) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn dft_oracle() -> Outcome {
    let mut rng = seed::rng(3);
    let (mut worst_bin, mut worst_parseval) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let s = IqSnapshot::from_fn(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let fast = dft_128(&s, BinOrder::Natural);
        let slow = naive_dft(s.samples());
        for (a, b) in fast.iter().zip(&slow) {
            worst_bin = worst_bin.max((a - b).norm());
        }
        let centered = dft_128(&s, BinOrder::Centered);
        for m in 0..128 {
            worst_bin = worst_bin.max((centered[m] - fast[(m + 64) % 128]).norm());
        }
        let time: f64 = s.samples().iter().map(|c| c.norm_sqr()).sum();
        let freq: f64 = fast.iter().map(|c| c.norm_sqr()).sum();
        worst_parseval = worst_parseval.max((freq - 128.0 * time).abs() / (128.0 * time));
    }
    outcome(
        worst_bin <= 1e-9 && worst_parseval <= 1e-6,
        format!("worst bin error {worst_bin:.2e}, worst Parseval error {worst_parseval:.2e}"),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Worst relative error between an analytic gradient and central differences
/// of `loss` with respect to every entry of `v`.
fn fd_check(v: &[f64], analytic: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> f64 {
    const H: f64 = 1e-5;
    let mut worst = 0.0f64;
    let mut p = v.to_vec();
    for i in 0..v.len() {
        p[i] = v[i] + H;
        let up = loss(&p);
        p[i] = v[i] - H;
        let down = loss(&p);
        p[i] = v[i];
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * H)));
    }
    worst
}

fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Values kept at least 1e-3 away from zero, so ReLU's kink is never straddled.
fn away_from_zero(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.001..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Finite-difference checks of every backward pass at 64-bit precision, with
/// a random linear functional `L = r . y` as the upstream loss.
fn gradient_suite() -> Outcome {
    const CONFIGS: usize = 24;
    let mut rng = seed::rng(11);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut record = |name: &'static str, e: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(w) => w.1 = w.1.max(e),
        None => worst.push((name, e)),
    };

    for _ in 0..CONFIGS {
        let (in_c, h, w) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(3..12));
        let kernel = [rng.random_range(1..=h), rng.random_range(1..=3)];
        let g = ConvGeom::new([in_c, h, w], rng.random_range(1..5), kernel).unwrap();
        let (x, w, b) = (rand_vec(&mut rng, g.input_len()), rand_vec(&mut rng, g.weight_len()), rand_vec(&mut rng, g.out_c));
        let r = rand_vec(&mut rng, g.output_len());
        let (mut dx, mut dw, mut db) = (vec![0.0; x.len()], vec![0.0; w.len()], vec![0.0; b.len()]);
        ops::conv2d_backward(&g, &x, &w, &r, Some(&mut dx), &mut dw, &mut db).unwrap();
        let fwd = |x: &[f64], w: &[f64], b: &[f64]| {
            let mut y = vec![0.0; g.output_len()];
            ops::conv2d_forward(&g, x, w, b, &mut y).unwrap();
            dot(&y, &r)
        };
        record("conv", fd_check(&x, &dx, |p| fwd(p, &w, &b)));
        record("conv", fd_check(&w, &dw, |p| fwd(&x, p, &b)));
        record("conv", fd_check(&b, &db, |p| fwd(&x, &w, p)));
    }

    for _ in 0..CONFIGS {
        let (n_in, n_out) = (rng.random_range(1..20), rng.random_range(1..20));
        let (x, w, b) = (rand_vec(&mut rng, n_in), rand_vec(&mut rng, n_in * n_out), rand_vec(&mut rng, n_out));
        let r = rand_vec(&mut rng, n_out);
        let (mut dx, mut dw, mut db) = (vec![0.0; n_in], vec![0.0; w.len()], vec![0.0; n_out]);
        ops::dense_backward(&x, &w, &r, Some(&mut dx), &mut dw, &mut db).unwrap();
        let fwd = |x: &[f64], w: &[f64], b: &[f64]| {
            let mut y = vec![0.0; n_out];
            ops::dense_forward(x, w, b, &mut y).unwrap();
            dot(&y, &r)
        };
        record("dense", fd_check(&x, &dx, |p| fwd(p, &w, &b)));
        record("dense", fd_check(&w, &dw, |p| fwd(&x, p, &b)));
        record("dense", fd_check(&b, &db, |p| fwd(&x, &w, p)));
    }

    type Forward = fn(&[f64], &mut [f64]) -> wii_core::Result<()>;
    type Backward = fn(&[f64], &[f64], &mut [f64]) -> wii_core::Result<()>;
    let activations: [(&str, Forward, Backward); 3] = [
        ("relu", ops::relu_forward, ops::relu_backward),
        ("sigmoid", ops::sigmoid_forward, ops::sigmoid_backward),
        ("softmax", ops::softmax_forward, ops::softmax_backward),
    ];
    for (name, forward, backward) in activations {
        for _ in 0..CONFIGS {
            let n = rng.random_range(1..30);
            let x: Vec<f64> = away_from_zero(&mut rng, n).iter().map(|v| v * 4.0).collect();
            let r = rand_vec(&mut rng, n);
            let mut y = vec![0.0; n];
            forward(&x, &mut y).unwrap();
            let mut dx = vec![0.0; n];
            backward(&y, &r, &mut dx).unwrap();
            record(name, fd_check(&x, &dx, |p| {
                let mut y = vec![0.0; n];
                forward(p, &mut y).unwrap();
                dot(&y, &r)
            }));
        }
    }

    for c in 0..CONFIGS {
        let n = rng.random_range(1..200);
        let rate = rng.random_range(0.0..0.9);
        let mask: Vec<f64> = ops::dropout_mask(n, rate, c as u64).unwrap();
        let (x, r) = (rand_vec(&mut rng, n), rand_vec(&mut rng, n));
        // The backward pass of dropout is the same mask applied to dy.
        let mut dx = vec![0.0; n];
        ops::apply_mask(&r, &mask, &mut dx).unwrap();
        record("dropout", fd_check(&x, &dx, |p| {
            let mut y = vec![0.0; n];
            ops::apply_mask(p, &mask, &mut y).unwrap();
            dot(&y, &r)
        }));
    }

    type Loss = fn(&[f64], &[f64], &mut [f64]) -> wii_core::Result<f64>;
    let losses: [(&str, Loss); 4] = [
        ("bce", ops::bce_loss),
        ("sigmoid+bce", ops::sigmoid_bce_with_logits),
        ("cce", ops::cce_loss),
        ("softmax+cce", ops::softmax_cce_with_logits),
    ];
    for (name, loss) in losses {
        for _ in 0..CONFIGS {
            let n = rng.random_range(2..16);
            let x: Vec<f64> = match name {
                "bce" | "cce" => (0..n).map(|_| rng.random_range(0.05..0.95)).collect(),
                _ => rand_vec(&mut rng, n).iter().map(|v| v * 5.0).collect(),
            };
            let t: Vec<f64> = if name.contains("cce") {
                let hot = rng.random_range(0..n);
                (0..n).map(|i| f64::from(u8::from(i == hot))).collect()
            } else {
                (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect()
            };
            let mut grad = vec![0.0; n];
            loss(&x, &t, &mut grad).unwrap();
            record(name, fd_check(&x, &grad, |p| loss(p, &t, &mut vec![0.0; n]).unwrap()));
        }
    }

    // Whole networks, through the unfused sigmoid head, with dropout active.
    for c in 0..CONFIGS {
        use LayerSpec::*;
        let config = NetworkConfig {
            input_shape: [1, 2, 128],
            layers: vec![
                Conv { maps: rng.random_range(1..4), kernel: [1, rng.random_range(1..4)] },
                Relu,
                Conv { maps: rng.random_range(1..4), kernel: [2, rng.random_range(1..4)] },
                Relu,
                Dropout { rate: 0.5 },
                Flatten,
                Dense { units: rng.random_range(2..8) },
                Relu,
                Dense { units: 15 },
                Sigmoid,
            ],
            features: FeatureOptions::default(),
        };
        let mut net = Network::<f64>::new(config, c as u64).unwrap();
        // Biases start at zero, which puts ReLU inputs exactly on the kink
        // whenever a window sees only zeros; check at a generic point instead.
        for t in net.params_mut().iter_mut().filter(|t| t.shape().len() == 1) {
            t.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let x: Vec<f32> = (0..INPUT_LEN).map(|_| rng.random_range(-2.0..2.0)).collect();
        let r = rand_vec(&mut rng, 15);
        let drop = Some(c as u64 + 100);
        let grads = net.output_gradients(&x, drop, |_, g| g.copy_from_slice(&r)).unwrap();
        let eval = |n: &Network<f64>| {
            let mut ws = Workspace::new(n);
            n.forward_with(&mut ws, &x, drop).unwrap();
            dot(ws.output(), &r)
        };
        for (ti, g) in grads.iter().enumerate() {
            // Every entry of small tensors, a spread of 25 for large ones.
            let step = 1 + g.len() / 25;
            let idx: Vec<usize> = (0..g.len()).step_by(step).collect();
            let values: Vec<f64> = idx.iter().map(|&i| net.params()[ti].data()[i]).collect();
            let analytic: Vec<f64> = idx.iter().map(|&i| g.data()[i]).collect();
            record("network", fd_check(&values, &analytic, |p| {
                let mut m = net.clone();
                for (&i, &v) in idx.iter().zip(p) {
                    m.params_mut()[ti].data_mut()[i] = v;
                }
                eval(&m)
            }));
        }
    }

    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let detail = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(max < 1e-4, format!("{CONFIGS} configurations per kind; worst relative error: {detail}"))
}

fn architecture_shape() -> Outcome {
    let config = NetworkConfig::paper();
    let flat = config.flatten_size().unwrap();
    let out = config.output_len().unwrap();
    let net = Network::<f32>::new(config, 1).unwrap();
    let pass = flat == Some(126_976) && out == 15 && net.output_len() == 15 && net.input_len() == 256;
    outcome(pass, format!("flatten {flat:?}, output {out}, {} parameters", net.num_parameters()))
}

/// Desk pipeline through the CLI; the directory is kept for later criteria.
struct DeskRun {
    dir: PathBuf,
    _tmp: tempfile::TempDir,
}

fn desk_pipeline(train_seed: u64) -> DeskRun {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_path_buf();
    let p = |n: &str| d.join(n).to_str().unwrap().to_string();
    let seed = train_seed.to_string();
    wii(&["gen-single", "--preset", "desk", "--out", &p("single.wiid")]);
    wii(&["gen-multi", "--preset", "desk", "--single", &p("single.wiid"), "--out", &p("multi.wiid")]);
    wii(&["split", "--preset", "desk", "--in", &p("multi.wiid"), "--out", &p("multi")]);
    wii(&["split", "--preset", "desk", "--in", &p("single.wiid"), "--out", &p("single")]);
    wii(&[
        "train", "--preset", "desk", "--train-seed", &seed, "--train", &p("multi/train.wiid"), "--val",
        &p("multi/val.wiid"), "--out", &p("model.wiim"),
    ]);
    wii(&["report", "--preset", "desk", "--model", &p("model.wiim"), "--data", &p("multi/val.wiid"), "--out", &p("report")]);
    wii(&["compare-single", "--preset", "desk", "--model", &p("model.wiim"), "--data", &p("single/val.wiid"), "--out", &p("snr.csv")]);
    DeskRun { dir: d, _tmp: tmp }
}

const TRAIN_SEEDS: [u64; 3] = [42, 43, 44];

fn desk_runs() -> &'static std::sync::Mutex<Vec<(u64, DeskRun)>> {
    static RUNS: std::sync::OnceLock<std::sync::Mutex<Vec<(u64, DeskRun)>>> = std::sync::OnceLock::new();
    RUNS.get_or_init(Default::default)
}

/// Runs `check` on the desk pipeline for up to three training seeds, reusing
/// runs made by earlier criteria, and stops at the first seed that passes.
fn with_desk_retry(check: impl Fn(&Path) -> Outcome) -> Outcome {
    let mut notes = Vec::new();
    for seed in TRAIN_SEEDS {
        let mut runs = desk_runs().lock().unwrap();
        if !runs.iter().any(|(s, _)| *s == seed) {
            runs.push((seed, desk_pipeline(seed)));
        }
        let run = &runs.iter().find(|(s, _)| *s == seed).unwrap().1;
        let o = check(&run.dir);
        notes.push(format!("seed {seed}: {}", o.detail));
        if o.pass {
            return outcome(true, notes.join("; "));
        }
    }
    outcome(false, notes.join("; "))
}

fn desk_training() -> Outcome {
    with_desk_retry(|dir| {
        let summary: Value = serde_json::from_str(&fs::read_to_string(dir.join("report/summary.json")).unwrap()).unwrap();
        let sti = |t: Technology| summary["sti_mean_tpr"][t.short_name()].as_f64().unwrap_or(f64::NAN);
        let (bt, wlan, zb) = (sti(Technology::Bt15_1), sti(Technology::Wlan11bg), sti(Technology::Zb15_4));
        let pass = bt >= 0.90 && zb >= 0.90 && wlan >= 0.50 && bt >= wlan - 0.05 && zb >= wlan - 0.05;
        outcome(pass, format!("STI mean TPR: BT {bt:.3}, ZB {zb:.3}, WLAN {wlan:.3}"))
    })
}

fn snr_curve() -> Outcome {
    with_desk_retry(|dir| {
        let csv = fs::read_to_string(dir.join("snr.csv")).unwrap();
        let curve: Vec<(f64, f64)> = csv
            .lines()
            .skip(1)
            .filter_map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0].parse::<f64>().ok()? == 0.5).then(|| (f[1].parse().unwrap(), f[2].parse().unwrap_or(f64::NAN)))
            })
            .collect();
        let at = |snr: f64| curve.iter().find(|p| p.0 == snr).map_or(f64::NAN, |p| p.1);
        let (lo, hi) = (at(-20.0), at(20.0));
        let worst_drop = curve.windows(2).map(|w| w[0].1 - w[1].1).fold(0.0, f64::max);
        let pass = curve.len() == 21 && worst_drop <= 0.03 && hi >= 0.95 && hi - lo > 0.3;
        outcome(pass, format!("TPR(-20 dB) {lo:.3}, TPR(+20 dB) {hi:.3}, largest decrease {worst_drop:.3}"))
    })
}

fn determinism() -> Outcome {
    let first = {
        let mut runs = desk_runs().lock().unwrap();
        if runs.is_empty() {
            runs.push((TRAIN_SEEDS[0], desk_pipeline(TRAIN_SEEDS[0])));
        }
        let (seed, run) = &runs[0];
        (*seed, run.dir.clone())
    };
    let second = desk_pipeline(first.0);
    let mut files = Vec::new();
    collect_files(&first.1, &first.1, &mut files);
    let differing: Vec<&String> =
        files.iter().filter(|f| fs::read(first.1.join(f)).ok() != fs::read(second.dir.join(f)).ok()).collect();
    outcome(
        differing.is_empty() && files.len() >= 20,
        format!("{} files compared, differing: {differing:?}", files.len()),
    )
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            out.push(path.strip_prefix(root).unwrap().to_str().unwrap().to_string());
        }
    }
    out.sort();
}

fn threshold_monotonicity() -> Outcome {
    let records = 1..40usize;
    let strategy = records.prop_flat_map(|n| {
        (
            proptest::collection::vec(0.0f64..=1.0, n * NUM_CLASSES),
            proptest::collection::vec((1u16..1 << 15, proptest::option::of(0usize..NUM_CLASSES)), n),
            0.0f64..1.0,
            0.0f64..1.0,
            any::<bool>(),
        )
    });
    let mut runner = TestRunner::new(PtConfig { cases: 10_000, failure_persistence: None, ..PtConfig::default() });
    let result = runner.run(&strategy, |(scores, truths, a, b, mask)| {
        let (lo, hi) = (a.min(b), a.max(b));
        let truths: Vec<RecordMeta> = truths
            .into_iter()
            .map(|(bits, utilized)| {
                let mut labels = LabelSet::from_bits(bits).unwrap();
                let utilized = utilized.map(|c| ClassId::new(c).unwrap());
                if let Some(u) = utilized {
                    labels.insert(u);
                }
                RecordMeta { labels, utilized_class: utilized, num_interferers: 1, snr_db: None, seed: 0 }
            })
            .collect();
        let at = |t: f64| {
            let r = tpr_report(&decide_all(&scores, t).unwrap(), &truths, mask).unwrap();
            r.rollup(wii_core::eval::GroupBy::Class)
        };
        for (l, h) in at(lo).iter().zip(at(hi).iter()) {
            if let (Some(tl), Some(th)) = (l.tpr, h.tpr) {
                prop_assert!(th <= tl, "class {:?}: TPR {th} at {hi} > {tl} at {lo}", l.target);
            }
        }
        Ok(())
    });
    match result {
        Ok(()) => outcome(true, "10000 random score matrices, per-class TPR non-increasing"),
        Err(e) => outcome(false, e.to_string()),
    }
}
