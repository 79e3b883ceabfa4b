//! The `wii` command-line tool.
//!
//! Every subcommand resolves a [`RunConfig`] (from `--config` or `--preset`),
//! validates its inputs before writing anything, and writes a manifest next
//! to its output recording the resolved configuration and SHA-256 checksums.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{canonical_json, RunConfig};
use crate::dataset::{
    add_awgn, file_sha256, generate_multi_label_streaming, generate_single_label_streaming, save_manifest,
    sidecar_path, split_file, DatasetKind, DatasetManifest, DatasetReader, DatasetWriter, SourcePool,
};
use crate::error::{Error, Result};
use crate::eval::{self, GroupBy, ReportFormat};
use crate::nn::{self, load_model, AnyModel, Network, Precision, TrainingSet};
use crate::preprocess::to_feature_matrix;
use crate::signal::{class_spec, find_variant, synthesize_burst, ClassId, Technology};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_DATA: i32 = 5;

/// Overrides the directory that relative output paths resolve against.
pub const ENV_OUT_DIR: &str = "WII_OUT_DIR";
/// Default for `--threads`.
pub const ENV_THREADS: &str = "WII_THREADS";

#[derive(Debug, Parser)]
#[command(name = "wii", version, about = "Multi-label wireless interference identification lab")]
pub struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = ENV_THREADS)]
    pub threads: Option<usize>,
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ConfigArgs {
    /// Run configuration JSON.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration: `paper` or `desk` (the default).
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides the generation master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GroupByArg {
    /// Every (class, interferer count, utilized class) group.
    Full,
    Class,
    N,
    Utilized,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize one burst and write its 128 IQ samples as CSV.
    SynthPreview {
        #[arg(long)]
        class: usize,
        /// Modulation variant name; defaults to the class's first variant.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Adds white Gaussian noise at this SNR.
        #[arg(long)]
        snr: Option<f64>,
        /// Writes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the single-label SNR-sweep dataset.
    GenSingle {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate multi-label mixtures from the 20 dB records of a single-label dataset.
    GenMulti {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        single: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified train/validation split into `<out>/train.wiid` and `<out>/val.wiid`.
    Split {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the 128 x 2 feature matrix of one record as CSV.
    Features {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        index: u64,
        /// Writes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a network.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        /// Overrides the training seed.
        #[arg(long)]
        train_seed: Option<u64>,
        #[arg(long, value_enum)]
        precision: Option<PrecisionArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class TPR of a model on a dataset.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_enum, default_value = "full")]
        group_by: GroupByArg,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Count the utilized class like any other label.
        #[arg(long)]
        no_mask: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean TPR against SNR on a single-label dataset, for each threshold of the sweep.
    CompareSingle {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full evaluation bundle: groups, per-technology curves and a summary.
    Report {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are printed to stderr as one line.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let (kind, code) = classify(&e);
            eprintln!("error: {kind}: {}", e.to_string().replace('\n', " "));
            code
        }
    }
}

/// Exit code and short kind name for an error.
pub fn classify(e: &Error) -> (&'static str, i32) {
    match e {
        Error::InvalidArgument(_) => ("usage", EXIT_USAGE),
        Error::InvalidConfig(_) => ("config", EXIT_CONFIG),
        Error::Io(_) => ("io", EXIT_IO),
        Error::Format(_) | Error::Shape(_) | Error::Json(_) => ("data", EXIT_DATA),
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, cli.verbose))
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(ENV_OUT_DIR) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn resolve(cfg: &ConfigArgs) -> Result<RunConfig> {
    let mut config = match (&cfg.config, &cfg.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::desk(),
    };
    if let Some(seed) = cfg.seed {
        config.generation.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn require_file(p: &Path) -> Result<()> {
    if !p.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("input {} does not exist", p.display()),
        )));
    }
    Ok(())
}

fn create_parent(p: &Path) -> Result<()> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn name_of(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

fn checksums(paths: &[&Path]) -> Result<Value> {
    let mut map = serde_json::Map::new();
    for p in paths {
        map.insert(name_of(p), Value::String(file_sha256(p)?));
        let side = sidecar_path(p);
        if side.is_file() {
            map.insert(name_of(&side), Value::String(file_sha256(&side)?));
        }
    }
    Ok(Value::Object(map))
}

/// Run manifest: command, resolved configuration and parameters, and the
/// checksums of inputs and outputs. Deliberately free of timestamps.
fn write_run_manifest(
    path: &Path,
    command: &str,
    config: Option<&RunConfig>,
    params: Value,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        tool: &'static str,
        version: &'static str,
        command: &'a str,
        config: Option<&'a RunConfig>,
        parameters: Value,
        inputs: Value,
        outputs: Value,
    }
    let m = Manifest {
        tool: "wii",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        parameters: params,
        inputs: checksums(inputs)?,
        outputs: checksums(outputs)?,
    };
    fs::write(path, canonical_json(&m)? + "\n")?;
    Ok(())
}

/// `<out>.manifest.json`
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn progress(verbose: bool, msg: impl FnOnce() -> String) {
    if verbose {
        eprintln!("{}", msg());
    }
}

fn dispatch(command: &Command, verbose: bool) -> Result<()> {
    match command {
        Command::SynthPreview { class, variant, seed, snr, out } => {
            synth_preview(*class, variant.as_deref(), *seed, *snr, out.as_deref().map(out_path).as_deref())
        }
        Command::GenSingle { cfg, out } => gen_single(&resolve(cfg)?, &out_path(out), verbose),
        Command::GenMulti { cfg, single, out } => gen_multi(&resolve(cfg)?, single, &out_path(out), verbose),
        Command::Split { cfg, input, out } => split(&resolve(cfg)?, input, &out_path(out)),
        Command::Features { cfg, input, index, out } => {
            features(&resolve(cfg)?, input, *index, out.as_deref().map(out_path).as_deref())
        }
        Command::Train { cfg, train, val, epochs, batch, train_seed, precision, out } => {
            let mut config = resolve(cfg)?;
            if let Some(e) = epochs {
                config.training.epochs = *e;
            }
            if let Some(b) = batch {
                config.training.batch_size = *b;
            }
            if let Some(s) = train_seed {
                config.training.seed = *s;
            }
            if let Some(p) = precision {
                config.training.precision = match p {
                    PrecisionArg::F32 => Precision::F32,
                    PrecisionArg::F64 => Precision::F64,
                };
            }
            config.validate()?;
            train_cmd(&config, train, val.as_deref(), &out_path(out), verbose)
        }
        Command::Eval { cfg, model, data, threshold, group_by, format, no_mask, out } => {
            let mut config = resolve(cfg)?;
            if let Some(t) = threshold {
                config.evaluation.threshold = *t;
            }
            if *no_mask {
                config.evaluation.mask_utilized = false;
            }
            config.validate()?;
            eval_cmd(&config, model, data, *group_by, *format, &out_path(out))
        }
        Command::CompareSingle { cfg, model, data, out } => compare_single(&resolve(cfg)?, model, data, &out_path(out)),
        Command::Report { cfg, model, data, out } => report(&resolve(cfg)?, model, data, &out_path(out)),
    }
}

fn synth_preview(class: usize, variant: Option<&str>, seed: u64, snr: Option<f64>, out: Option<&Path>) -> Result<()> {
    let class = ClassId::new(class)?;
    let v = match variant {
        Some(name) => find_variant(class, name)?,
        None => &class_spec(class).variant_set[0],
    };
    let mut burst = synthesize_burst(class, v, seed)?;
    if let Some(snr) = snr {
        burst = add_awgn(&burst, snr, crate::seed::derive(seed, &[crate::seed::tag::NOISE]))?;
    }
    let mut csv = String::from("index,i,q\n");
    for (k, s) in burst.samples().iter().enumerate() {
        csv.push_str(&format!("{k},{},{}\n", s.re, s.im));
    }
    let Some(out) = out else {
        std::io::stdout().write_all(csv.as_bytes())?;
        return Ok(());
    };
    create_parent(out)?;
    fs::write(out, csv)?;
    let params = json!({"class": class.index(), "variant": v.name, "seed": seed, "snr_db": snr});
    write_run_manifest(&manifest_path(out), "synth-preview", None, params, &[], &[out])
}

fn gen_single(config: &RunConfig, out: &Path, verbose: bool) -> Result<()> {
    create_parent(out)?;
    let g = &config.generation;
    let mut writer = DatasetWriter::create(out)?;
    let total = g.single_label_count();
    generate_single_label_streaming(g, |r| {
        writer.push(&r)?;
        let n = writer.count();
        if n % 50_000 == 0 {
            progress(verbose, || format!("gen-single: {n}/{total}"));
        }
        Ok(())
    })?;
    let count = writer.finish()?;
    save_manifest(out, &DatasetManifest { kind: DatasetKind::Single, config: g.clone(), record_count: count })?;
    println!("gen-single: wrote {count} records to {}", out.display());
    write_run_manifest(&manifest_path(out), "gen-single", Some(config), json!({}), &[], &[out])
}

fn gen_multi(config: &RunConfig, single: &Path, out: &Path, verbose: bool) -> Result<()> {
    require_file(single)?;
    let mut pool = SourcePool::empty();
    for r in DatasetReader::open(single)? {
        pool.offer(r?);
    }
    pool.check()?;
    create_parent(out)?;
    let g = &config.generation;
    let mut writer = DatasetWriter::create(out)?;
    generate_multi_label_streaming(&pool, g, |r| {
        writer.push(&r)?;
        let n = writer.count();
        if n % 50_000 == 0 {
            progress(verbose, || format!("gen-multi: {n}/{}", g.multi_total));
        }
        Ok(())
    })?;
    let count = writer.finish()?;
    save_manifest(out, &DatasetManifest { kind: DatasetKind::Multi, config: g.clone(), record_count: count })?;
    println!("gen-multi: wrote {count} records to {}", out.display());
    write_run_manifest(&manifest_path(out), "gen-multi", Some(config), json!({}), &[single], &[out])
}

fn split(config: &RunConfig, input: &Path, out: &Path) -> Result<()> {
    require_file(input)?;
    DatasetReader::open(input)?;
    fs::create_dir_all(out)?;
    let (train, val) = (out.join("train.wiid"), out.join("val.wiid"));
    let g = &config.generation;
    let (nt, nv) = split_file(input, &train, &val, g.train_fraction, g.master_seed)?;
    println!("split: {nt} train / {nv} validation records in {}", out.display());
    let params = json!({"train_fraction": g.train_fraction, "seed": g.master_seed, "train": nt, "validation": nv});
    write_run_manifest(&out.join("manifest.json"), "split", Some(config), params, &[input], &[&train, &val])
}

fn features(config: &RunConfig, input: &Path, index: u64, out: Option<&Path>) -> Result<()> {
    require_file(input)?;
    let mut reader = DatasetReader::open(input)?;
    let count = reader.record_count();
    if index >= count {
        return Err(Error::InvalidArgument(format!("index {index} out of range for {count} records")));
    }
    let record = reader.nth(index as usize).expect("index checked against count")?;
    let m = to_feature_matrix(&record.snapshot, config.network.features);
    let mut csv = String::from("row,re,im\n");
    for (i, r) in m.rows().iter().enumerate() {
        csv.push_str(&format!("{i},{},{}\n", r[0], r[1]));
    }
    match out {
        Some(path) => {
            create_parent(path)?;
            fs::write(path, csv)?;
            let params = json!({"index": index, "features": config.network.features});
            write_run_manifest(&manifest_path(path), "features", Some(config), params, &[input], &[path])
        }
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
            Ok(())
        }
    }
}

fn load_set(path: &Path, config: &RunConfig) -> Result<TrainingSet> {
    require_file(path)?;
    TrainingSet::from_stream(DatasetReader::open(path)?, config.network.features)
}

fn train_cmd(config: &RunConfig, train: &Path, val: Option<&Path>, out: &Path, verbose: bool) -> Result<()> {
    let data = load_set(train, config)?;
    let val_set = val.map(|v| load_set(v, config)).transpose()?;
    let options = config.training.options();
    let init_seed = crate::seed::derive(config.training.seed, &[crate::seed::tag::INIT]);
    let log = |l: &nn::EpochLog| {
        progress(verbose, || {
            format!("epoch {:>4}: loss {:.6} val mean TPR {:?}", l.epoch, l.train_loss, l.val_mean_tpr)
        })
    };
    let model = match config.training.precision {
        Precision::F32 => {
            let mut net = Network::<f32>::new(config.network.clone(), init_seed)?;
            nn::train(&mut net, &data, val_set.as_ref(), &options, log)?;
            AnyModel::F32(net)
        }
        Precision::F64 => {
            let mut net = Network::<f64>::new(config.network.clone(), init_seed)?;
            nn::train(&mut net, &data, val_set.as_ref(), &options, log)?;
            AnyModel::F64(net)
        }
    };
    create_parent(out)?;
    model.save(out)?;
    let last = model.training_log().last().cloned();
    println!("train: saved model to {} (last epoch {last:?})", out.display());
    let mut inputs = vec![train];
    inputs.extend(val);
    write_run_manifest(&manifest_path(out), "train", Some(config), json!({}), &inputs, &[out])
}

fn scores_for(model: &AnyModel, set: &TrainingSet) -> Result<Vec<f64>> {
    if model.output_len() != crate::NUM_CLASSES {
        return Err(Error::Shape(format!("model has {} outputs, expected 15", model.output_len())));
    }
    model.predict_batch(set.inputs())
}

fn load_model_and_data(config: &RunConfig, model: &Path, data: &Path) -> Result<(AnyModel, TrainingSet)> {
    require_file(model)?;
    let model = load_model(model)?;
    let mut config = config.clone();
    config.network.features = model.config().features;
    Ok((model, load_set(data, &config)?))
}

fn eval_cmd(config: &RunConfig, model: &Path, data: &Path, by: GroupByArg, format: FormatArg, out: &Path) -> Result<()> {
    let (net, set) = load_model_and_data(config, model, data)?;
    let e = &config.evaluation;
    let predicted = eval::decide_all(&scores_for(&net, &set)?, e.threshold)?;
    let mut report = eval::tpr_report(&predicted, set.meta(), e.mask_utilized)?;
    let by = match by {
        GroupByArg::Full => None,
        GroupByArg::Class => Some(GroupBy::Class),
        GroupByArg::N => Some(GroupBy::N),
        GroupByArg::Utilized => Some(GroupBy::Utilized),
    };
    if let Some(by) = by {
        report.groups = report.rollup(by);
    }
    let format = match format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
    };
    create_parent(out)?;
    eval::emit_report(&report, format, out)?;
    println!("eval: mean TPR {:?} over {} records", report.mean_tpr(), set.len());
    let params = json!({"group_by": format!("{by:?}"), "format": format!("{format:?}")});
    write_run_manifest(&manifest_path(out), "eval", Some(config), params, &[model, data], &[out])
}

fn compare_single(config: &RunConfig, model: &Path, data: &Path, out: &Path) -> Result<()> {
    let (net, set) = load_model_and_data(config, model, data)?;
    let points = eval::single_label_comparison(&scores_for(&net, &set)?, set.meta(), &config.evaluation.sweep)?;
    create_parent(out)?;
    fs::write(out, eval::snr_points_to_csv(&points))?;
    println!("compare-single: {} curve points written to {}", points.len(), out.display());
    write_run_manifest(&manifest_path(out), "compare-single", Some(config), json!({}), &[model, data], &[out])
}

fn report(config: &RunConfig, model: &Path, data: &Path, out: &Path) -> Result<()> {
    let (net, set) = load_model_and_data(config, model, data)?;
    let e = &config.evaluation;
    let predicted = eval::decide_all(&scores_for(&net, &set)?, e.threshold)?;
    let report = eval::tpr_report(&predicted, set.meta(), e.mask_utilized)?;
    let points = eval::tpr_by_interferer_count(&report);
    let mut sti = serde_json::Map::new();
    for tech in Technology::ALL {
        sti.insert(tech.short_name().into(), json!(eval::sti_mean(&points, tech)));
    }
    let summary = json!({
        "records": set.len(),
        "threshold": e.threshold,
        "mask_utilized": e.mask_utilized,
        "mean_tpr": report.mean_tpr(),
        "sti_mean_tpr": sti,
        "by_class": report.rollup(GroupBy::Class),
        "by_num_interferers": report.rollup(GroupBy::N),
    });
    fs::create_dir_all(out)?;
    let files = [
        (out.join("groups.json"), eval::report_to_string(&report, ReportFormat::Json)?),
        (out.join("groups.csv"), eval::groups_to_csv(&report.groups)),
        (out.join("tech_curves.csv"), eval::tech_points_to_csv(&points)),
        (out.join("summary.json"), canonical_json(&summary)? + "\n"),
    ];
    for (path, text) in &files {
        fs::write(path, text)?;
    }
    println!("report: mean TPR {:?}, written to {}", report.mean_tpr(), out.display());
    let outputs: Vec<&Path> = files.iter().map(|(p, _)| p.as_path()).collect();
    write_run_manifest(&out.join("manifest.json"), "report", Some(config), json!({}), &[model, data], &outputs)
}
