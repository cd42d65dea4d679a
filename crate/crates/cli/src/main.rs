//! `unitscore` command line.
//!
//! Exit status: 0 on success, 1 when inputs or arguments are invalid, 2 when
//! a file cannot be read or written.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unitscore::abx;
use unitscore::corpus_io::Manifest;
use unitscore::runner::{self, AbxMode, EvalOptions, EvalReport, Inputs};
use unitscore::synth::{self, ChannelSpec};
use unitscore::{Error, Micros, PhonemeInventory, Track};

#[derive(Parser)]
#[command(name = "unitscore", version, about = "Evaluate discrete speech units against gold phone alignments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a manifest and write a JSON report plus the assignment dump.
    Evaluate(EvaluateArgs),
    /// ABX error rates only, printed as JSON.
    Abx(AbxArgs),
    /// Average per-language reports of one split into CSV.
    Aggregate(AggregateArgs),
    /// Write a synthetic corpus with its manifest and planted record.
    SynthGen(SynthArgs),
    /// Write the unit→phoneme assignment of a manifest as TSV.
    DumpAssignment(DumpArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    manifest: PathBuf,
    /// Override the manifest's track (many-to-one or one-to-one).
    #[arg(long)]
    track: Option<Track>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct AbxFlags {
    #[arg(long, value_parser = ["continuous", "discrete"])]
    abx_mode: Option<String>,
    /// 0/1 distance on collapsed unit sequences instead of edit distance.
    #[arg(long)]
    abx_strict: bool,
    /// Triples per cell before subsampling.
    #[arg(long, default_value_t = abx::DEFAULT_TRIPLE_CAP)]
    abx_cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl AbxFlags {
    fn mode(&self) -> Option<AbxMode> {
        self.abx_mode.as_deref().map(|m| m.parse().expect("validated by clap"))
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
    /// Assignment dump path; defaults to `<out stem>.assignment.tsv`.
    #[arg(long)]
    assignment_out: Option<PathBuf>,
    #[arg(long, default_value_t = 20.0)]
    tolerance_ms: f64,
    #[command(flatten)]
    abx: AbxFlags,
}

#[derive(Args)]
struct AbxArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    abx: AbxFlags,
    /// Also write the item file.
    #[arg(long)]
    items_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    /// Glob matching report files.
    #[arg(long)]
    glob: String,
    /// Split to aggregate, e.g. dev or test.
    #[arg(long)]
    group: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Built-in inventory name.
    #[arg(long, default_value = "english")]
    language: String,
    #[arg(long, default_value_t = 100)]
    utterances: usize,
    #[arg(long, default_value_t = 1)]
    units_per_phone: usize,
    #[arg(long, default_value_t = 0.0)]
    substitution: f64,
    #[arg(long, default_value_t = 0.0)]
    insertion: f64,
    #[arg(long, default_value_t = 0.0)]
    deletion: f64,
    #[arg(long, default_value_t = 4)]
    speakers: usize,
    #[arg(long, default_value = "many-to-one")]
    track: Track,
    #[arg(long, default_value = "dev")]
    split: String,
    /// Also write continuous features with this many dimensions.
    #[arg(long)]
    feature_dims: Option<usize>,
    #[arg(long, default_value_t = 0.3)]
    feature_noise: f64,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn evaluate(args: EvaluateArgs) -> Result<(), Error> {
    if args.tolerance_ms.is_nan() || args.tolerance_ms < 0.0 {
        return Err(Error::Invalid("--tolerance-ms must be non-negative".into()));
    }
    let opts = EvalOptions {
        track: args.common.track,
        tolerance: Micros::from_secs_f64(args.tolerance_ms / 1000.0),
        abx: args.abx.mode(),
        abx_strict: args.abx.abx_strict,
        abx_cap: args.abx.abx_cap,
        seed: args.abx.seed,
    };
    let report = runner::with_threads(args.common.threads, || {
        runner::evaluate(&args.common.manifest, &args.out, args.assignment_out.as_deref(), &opts)
    })??;
    log::info!(
        "{} {}: PNMI {:.2} PER {:.2} F1 {:.2} R {:.2}",
        report.language,
        report.track,
        report.pnmi,
        report.per,
        report.f1,
        report.r_value
    );
    Ok(())
}

fn abx_cmd(args: AbxArgs) -> Result<(), Error> {
    let inputs = Inputs::load(Manifest::load(&args.common.manifest)?, args.common.track)?;
    if let Some(p) = &args.items_out {
        let items = abx::extract_items(&inputs.gold, inputs.inventory.silence_index());
        write(p, &abx::items_to_tsv(&items, &inputs.inventory))?;
    }
    let mode = args.abx.mode().unwrap_or(AbxMode::Discrete);
    let scores = runner::with_threads(args.common.threads, || {
        runner::abx_scores(&inputs, mode, args.abx.abx_strict, args.abx.abx_cap, args.abx.seed)
    })??;
    emit(args.out.as_deref(), &(serde_json::to_string_pretty(&scores)? + "\n"))
}

fn aggregate(args: AggregateArgs) -> Result<(), Error> {
    let paths = glob::glob(&args.glob).map_err(|e| Error::Invalid(format!("bad glob: {e}")))?;
    let mut reports = Vec::new();
    for entry in paths {
        let path = entry.map_err(|e| Error::Io {
            path: e.path().to_path_buf(),
            source: e.into(),
        })?;
        reports.push(EvalReport::load(&path)?);
    }
    if reports.is_empty() {
        return Err(Error::Empty(format!("no report matches `{}`", args.glob)));
    }
    emit(args.out.as_deref(), &runner::aggregate(&reports, &args.group)?)
}

fn synth_gen(args: SynthArgs) -> Result<(), Error> {
    let inv = PhonemeInventory::builtin(&args.language)
        .ok_or_else(|| Error::Invalid(format!("no built-in inventory `{}`", args.language)))?;
    let mut spec = ChannelSpec::new(inv);
    spec.seed = args.seed;
    spec.units_per_phone = args.units_per_phone;
    spec.substitution = args.substitution;
    spec.insertion = args.insertion;
    spec.deletion = args.deletion;
    spec.speakers = args.speakers;
    if args.track == Track::OneToOne && args.units_per_phone != 1 {
        return Err(Error::Invalid("the one-to-one track needs --units-per-phone 1".into()));
    }
    let (gold, units, planted) = synth::generate(&spec, args.utterances)?;
    let files = synth::write_corpus(&args.out_dir, &spec.inventory, &gold, &units, Some(&planted), args.track, &args.split)?;
    if let Some(dims) = args.feature_dims {
        let feats = synth::label_features(&gold, &units, &spec.inventory, dims, args.feature_noise, args.seed)?;
        abx::write_features(args.out_dir.join("features"), units.frame_rate, &feats)?;
        let mut text = std::fs::read_to_string(&files.manifest).map_err(|e| Error::Io {
            path: files.manifest.clone(),
            source: e,
        })?;
        text.push_str("features: features\n");
        write(&files.manifest, &text)?;
    }
    log::info!("wrote {}", files.manifest.display());
    Ok(())
}

fn dump_assignment(args: DumpArgs) -> Result<(), Error> {
    let inputs = Inputs::load(Manifest::load(&args.common.manifest)?, args.common.track)?;
    let a = runner::with_threads(args.common.threads, || inputs.assignment())??;
    emit(args.out.as_deref(), &a.to_tsv(&inputs.inventory))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Abx(a) => abx_cmd(a),
        Command::Aggregate(a) => aggregate(a),
        Command::SynthGen(a) => synth_gen(a),
        Command::DumpAssignment(a) => dump_assignment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
