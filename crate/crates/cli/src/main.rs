//! `hob2srnn` command-line driver.
//!
//! Exit codes: 0 success, 2 usage error, 3 invalid input data, 4 runtime
//! failure (I/O and internal errors).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hob2srnn::data::{
    load_dataset, split_grouped, synth_generate, Dataset, DatasetHeader, LoadOptions, Split, SynthSpec, DEFAULT_FRACTIONS,
};
use hob2srnn::hierarchy::ClassHierarchy;
use hob2srnn::model::{Checkpoint, Sources};
use hob2srnn::numkernel::SeededRng;
use hob2srnn::traineval::{
    ablation_sweep, epoch_log_table, evaluate, export_attention, init_model, train, Ablation, TrainConfig, Variant,
};
use hob2srnn::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }

    fn invalid(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            msg: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::State(_) | Error::OracleInvalid(_) => EXIT_RUNTIME,
            _ => EXIT_INVALID,
        };
        Failure { code, msg: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read(path: &Path, what: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Failure::invalid(format!("{what} not found: {}", path.display()))
        } else {
            Failure {
                code: EXIT_RUNTIME,
                msg: format!("cannot read {what} {}: {e}", path.display()),
            }
        }
    })
}

fn write(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    fs::write(path, text).map_err(|e| Failure {
        code: EXIT_RUNTIME,
        msg: format!("cannot write {}: {e}", path.display()),
    })
}

fn with_context<T>(r: hob2srnn::Result<T>, what: &str, path: &Path) -> CliResult<T> {
    r.map_err(|e| {
        let f = Failure::from(e);
        Failure {
            msg: format!("{what} {}: {}", path.display(), f.msg),
            ..f
        }
    })
}

#[derive(Parser)]
#[command(name = "hob2srnn", version, about = "Multi-source time-series classification with hierarchical pretraining")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset, header and taxonomy.
    Synth(SynthArgs),
    /// Write a group-exclusive train/val/test split.
    Split(SplitArgs),
    /// Train a model and write checkpoint, logs and manifest to a run directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset or one split partition.
    Eval(EvalArgs),
    /// Repeated-split sweep over the ablation variants.
    Ablate(AblateArgs),
    /// Export attention weights of a checkpoint.
    Attention(AttentionArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Generator spec (TOML); defaults describe a 2/4/8-class, 500-segment set.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory for dataset.csv, header.toml, hierarchy.txt and spec.toml.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the spec seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset table (CSV rows: id, group, label, radar values, optical values).
    #[arg(long)]
    dataset: PathBuf,
    /// Header file (TOML); defaults to header.toml next to the dataset.
    #[arg(long)]
    header: Option<PathBuf>,
    /// Taxonomy file; defaults to hierarchy.txt next to the dataset.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Drop the NDVI optical channel after loading.
    #[arg(long)]
    drop_ndvi: bool,
}

impl DataArgs {
    fn sibling(&self, name: &str) -> PathBuf {
        self.dataset.parent().unwrap_or(Path::new(".")).join(name)
    }

    fn header_path(&self) -> PathBuf {
        self.header.clone().unwrap_or_else(|| self.sibling("header.toml"))
    }

    fn hierarchy_path(&self) -> PathBuf {
        self.hierarchy.clone().unwrap_or_else(|| self.sibling("hierarchy.txt"))
    }

    fn load(&self) -> CliResult<Dataset> {
        let h_path = self.hierarchy_path();
        let hierarchy = with_context(ClassHierarchy::load(&read(&h_path, "hierarchy")?), "hierarchy", &h_path)?;
        let head_path = self.header_path();
        let header = with_context(DatasetHeader::parse(&read(&head_path, "header")?), "header", &head_path)?;
        read(&self.dataset, "dataset")?;
        let options = LoadOptions {
            drop_ndvi: self.drop_ndvi,
        };
        with_context(load_dataset(&self.dataset, &header, &hierarchy, options), "dataset", &self.dataset)
    }
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output split file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Both,
    Radar,
    Optical,
}

impl From<SourceArg> for Sources {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Both => Sources::Both,
            SourceArg::Radar => Sources::Radar,
            SourceArg::Optical => Sources::Optical,
        }
    }
}

/// Training settings. Precedence: flags, then `--config`, then defaults.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Training config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for split, initialization, shuffling and dropout [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Epochs per taxonomy level [default: 2000]
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size [default: 32]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Adam learning rate [default: 0.0001]
    #[arg(long)]
    lr: Option<f64>,
    /// Dropout rate [default: 0.4]
    #[arg(long)]
    dropout: Option<f64>,
    /// Ablation: none, noAtt, softmaxAtt, noHierPre, noEnrich, noNDVI [default: none]
    #[arg(long)]
    ablate: Option<String>,
    /// Input sources [default: both]
    #[arg(long, value_enum)]
    source: Option<SourceArg>,
    /// Recurrent hidden units [default: 512]
    #[arg(long)]
    hidden_units: Option<usize>,
    /// First enrichment layer units [default: 64]
    #[arg(long)]
    fc1_units: Option<usize>,
    /// Second enrichment layer units [default: 128]
    #[arg(long)]
    fc2_units: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> CliResult<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => with_context(TrainConfig::parse(&read(p, "config")?), "config", p).map_err(|f| Failure {
                code: EXIT_USAGE,
                ..f
            })?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs_per_level = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.dropout {
            cfg.dropout = v;
        }
        if let Some(v) = &self.ablate {
            cfg.ablation = v.parse::<Ablation>().map_err(|e| Failure::usage(e.to_string()))?;
        }
        if let Some(v) = self.source {
            cfg.sources = v.into();
        }
        if let Some(v) = self.hidden_units {
            cfg.hidden_units = v;
        }
        if let Some(v) = self.fc1_units {
            cfg.fc1_units = v;
        }
        if let Some(v) = self.fc2_units {
            cfg.fc2_units = v;
        }
        cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Use this split file instead of drawing one from the seed.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Parent directory of the run directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Partition {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Split file selecting the evaluated partition.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    partition: Partition,
    /// Taxonomy level to evaluate [default: target level]
    #[arg(long)]
    level: Option<usize>,
    /// Also write the metrics report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Random splits per variant.
    #[arg(long, default_value_t = hob2srnn::traineval::DEFAULT_SPLITS)]
    splits: usize,
    /// Comma-separated variant names [default: all]
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    /// Summary output file (TOML).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterBy {
    True,
    Predicted,
}

#[derive(Args)]
struct AttentionArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Keep only rows of this class at the exported level.
    #[arg(long)]
    class: Option<String>,
    #[arg(long, value_enum, default_value = "true")]
    by: FilterBy,
    #[arg(long)]
    level: Option<usize>,
    /// Output directory for radar.csv, optical.csv and fused.csv.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_synth(args: &SynthArgs) -> CliResult {
    let mut spec = match &args.spec {
        Some(p) => SynthSpec::parse(&read(p, "spec")?).map_err(|e| Failure::usage(format!("spec {}: {e}", p.display())))?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let out = synth_generate(&spec, &mut SeededRng::new(spec.seed))?;
    let ds = &out.dataset;
    write(&args.out.join("dataset.csv"), &ds.to_table())?;
    write(&args.out.join("header.toml"), &ds.header.to_toml())?;
    write(&args.out.join("hierarchy.txt"), &ds.hierarchy.to_text())?;
    write(&args.out.join("spec.toml"), &spec.to_toml())?;
    println!("segments = {}", ds.len());
    println!("dataset_digest = \"{}\"", ds.digest());
    println!("hierarchy_digest = \"{}\"", ds.hierarchy.digest());
    Ok(())
}

fn parse_split(ds: &Dataset, path: &Path) -> CliResult<Split> {
    let text = read(path, "split")?;
    Split::parse(&text, ds).map_err(|e| Failure::invalid(format!("split {}: {e}", path.display())))
}

fn cmd_split(args: &SplitArgs) -> CliResult {
    let ds = args.data.load()?;
    let split = split_grouped(&ds, DEFAULT_FRACTIONS, &mut SeededRng::new(args.seed))?;
    write(&args.out, &split.to_text(&ds))?;
    println!(
        "train = {}\nval = {}\ntest = {}",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct RunManifest {
    tool_version: String,
    seed: u64,
    dataset_digest: String,
    hierarchy_digest: String,
    inputs: ManifestInputs,
    outputs: ManifestOutputs,
    config: TrainConfig,
}

#[derive(Serialize)]
struct ManifestInputs {
    dataset: String,
    header: String,
    hierarchy: String,
    split: Option<String>,
    drop_ndvi: bool,
}

#[derive(Serialize)]
struct ManifestOutputs {
    run_dir: String,
    checkpoint: String,
    epoch_log: String,
    split: String,
    metrics: String,
}

fn cmd_train(args: &TrainArgs) -> CliResult {
    let cfg = args.config.resolve()?;
    let raw = args.data.load()?;
    let ds = cfg.prepare_dataset(&raw)?;
    let run_dir = args.out.join(format!("run-{}-{}", cfg.seed, &cfg.digest()[..8]));
    let file = |n: &str| run_dir.join(n);
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        dataset_digest: raw.digest(),
        hierarchy_digest: raw.hierarchy.digest(),
        inputs: ManifestInputs {
            dataset: args.data.dataset.display().to_string(),
            header: args.data.header_path().display().to_string(),
            hierarchy: args.data.hierarchy_path().display().to_string(),
            split: args.split.as_ref().map(|p| p.display().to_string()),
            drop_ndvi: args.data.drop_ndvi,
        },
        outputs: ManifestOutputs {
            run_dir: run_dir.display().to_string(),
            checkpoint: file("checkpoint.txt").display().to_string(),
            epoch_log: file("epoch_log.csv").display().to_string(),
            split: file("split.csv").display().to_string(),
            metrics: file("metrics.toml").display().to_string(),
        },
        config: cfg.clone(),
    };
    write(&file("manifest.toml"), &toml::to_string(&manifest).expect("manifest serializes"))?;

    let mut rng = SeededRng::new(cfg.seed);
    let split = match &args.split {
        Some(p) => parse_split(&ds, p)?,
        None => split_grouped(&ds, DEFAULT_FRACTIONS, &mut rng)?,
    };
    write(&file("split.csv"), &split.to_text(&ds))?;
    let stats = hob2srnn::data::fit_normalize(&ds.subset(&split.train).samples)?;
    let norm = stats.apply_dataset(&ds)?;
    let model = init_model(&cfg, &norm, &mut rng)?;
    let outcome = train(model, &norm.subset(&split.train), &norm.subset(&split.val), &cfg, &mut rng)?;
    write(&file("epoch_log.csv"), &epoch_log_table(&outcome.log))?;
    let checkpoint = Checkpoint {
        model: outcome.model,
        normalization: Some(stats),
        seed: cfg.seed,
        hierarchy_digest: ds.hierarchy.digest(),
    };
    write(&file("checkpoint.txt"), &checkpoint.to_text())?;
    let target = ds.hierarchy.target_level();
    let metrics = evaluate(&checkpoint.model, &norm.subset(&split.test), target)?;
    write(&file("metrics.toml"), &metrics.to_toml())?;
    println!("run_dir = \"{}\"", run_dir.display());
    print!("{}", metrics.to_toml());
    Ok(())
}

/// Loads a checkpoint and checks it against `ds`; returns it with `ds`
/// normalized by the stored statistics.
fn load_checkpoint(path: &Path, ds: &Dataset) -> CliResult<(Checkpoint, Dataset)> {
    let ck = with_context(Checkpoint::parse(&read(path, "checkpoint")?), "checkpoint", path)?;
    let c = ck.model.config();
    let (cr, co) = (ds.header.radar_channels.len(), ds.header.optical_channels.len());
    if c.sources.uses_radar() && c.radar_channels != cr || c.sources.uses_optical() && c.optical_channels != co {
        return Err(Failure::invalid(format!(
            "checkpoint expects {} radar / {} optical channels, dataset has {cr} / {co}",
            c.radar_channels, c.optical_channels
        )));
    }
    if ck.hierarchy_digest != ds.hierarchy.digest() {
        return Err(Failure::invalid("checkpoint was trained on a different taxonomy"));
    }
    let norm = match &ck.normalization {
        Some(stats) => stats.apply_dataset(ds)?,
        None => ds.clone(),
    };
    Ok((ck, norm))
}

fn level_arg(level: Option<usize>, ds: &Dataset, ck: &Checkpoint) -> CliResult<usize> {
    let level = level.unwrap_or(ds.hierarchy.target_level());
    if !ck.model.has_heads(level) {
        return Err(Failure::usage(format!("checkpoint has no classifier for level {level}")));
    }
    Ok(level)
}

fn cmd_eval(args: &EvalArgs) -> CliResult {
    let ds = args.data.load()?;
    let (ck, norm) = load_checkpoint(&args.checkpoint, &ds)?;
    let level = level_arg(args.level, &ds, &ck)?;
    let subset = match (&args.split, args.partition) {
        (_, Partition::All) => norm,
        (None, _) => return Err(Failure::usage("--partition other than 'all' needs --split")),
        (Some(p), part) => {
            let split = parse_split(&ds, p)?;
            let idx = match part {
                Partition::Train => split.train,
                Partition::Val => split.val,
                _ => split.test,
            };
            norm.subset(&idx)
        }
    };
    let metrics = evaluate(&ck.model, &subset, level)?;
    let text = metrics.to_toml();
    if let Some(out) = &args.out {
        write(out, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_ablate(args: &AblateArgs) -> CliResult {
    let cfg = args.config.resolve()?;
    let ds = args.data.load()?;
    let all = Variant::standard();
    let variants: Vec<Variant> = if args.variants.is_empty() {
        all
    } else {
        args.variants
            .iter()
            .map(|n| {
                all.iter()
                    .find(|v| v.name.eq_ignore_ascii_case(n))
                    .copied()
                    .ok_or_else(|| Failure::usage(format!("unknown variant '{n}'")))
            })
            .collect::<CliResult<_>>()?
    };
    let results = ablation_sweep(&ds, &cfg, &variants, args.splits, cfg.seed)?;
    let mut text = String::new();
    for (v, report) in &results {
        let _ = writeln!(text, "[{}]", v.name);
        for (name, m) in [
            ("accuracy", report.accuracy),
            ("weighted_f1", report.weighted_f1),
            ("kappa", report.kappa),
        ] {
            let _ = writeln!(text, "{name}_mean = {:?}\n{name}_std = {:?}", m.mean, m.std);
        }
        text.push('\n');
    }
    if let Some(out) = &args.out {
        write(out, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_attention(args: &AttentionArgs) -> CliResult {
    let ds = args.data.load()?;
    let (ck, norm) = load_checkpoint(&args.checkpoint, &ds)?;
    let level = level_arg(args.level, &ds, &ck)?;
    let mut export = export_attention(&ck.model, &norm, level)?;
    if let Some(class) = &args.class {
        if ds.hierarchy.class_index(level, class).is_none() {
            return Err(Failure::usage(format!("unknown class '{class}' at level {level}")));
        }
        export = export.filter(class, matches!(args.by, FilterBy::Predicted));
    }
    for (name, table) in [("radar", &export.radar), ("optical", &export.optical), ("fused", &export.fused)] {
        if let Some(t) = table {
            write(&args.out.join(format!("{name}.csv")), &t.to_csv())?;
            println!("{name} = {}", t.rows.len());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Attention(a) => cmd_attention(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
