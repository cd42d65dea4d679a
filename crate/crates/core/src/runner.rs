//! End-to-end evaluation of a manifest, JSON reports and CSV aggregation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::abx::{self, AbxOptions, Condition, Representation};
use crate::assignment::{self, Assignment, SOLVER_ID};
use crate::corpus_io::{check_utterances, Manifest, PhoneCorpus, Track, UnitCorpus};
use crate::error::{read_utf8, Error, Result};
use crate::framesync::{build_contingency, gold_streams};
use crate::inventory::{PhonemeClass, PhonemeInventory};
use crate::metrics::{self, BoundaryCounts, PerBreakdown, SubstitutionCounts, DEFAULT_TOLERANCE};
use crate::time::Micros;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "unitscore";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbxMode {
    Continuous,
    Discrete,
}

impl std::str::FromStr for AbxMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "continuous" => Ok(AbxMode::Continuous),
            "discrete" => Ok(AbxMode::Discrete),
            _ => Err(format!("unknown ABX mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Replaces the manifest's track; the vocabulary constraint is rechecked.
    pub track: Option<Track>,
    pub tolerance: Micros,
    pub abx: Option<AbxMode>,
    pub abx_strict: bool,
    pub abx_cap: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            track: None,
            tolerance: DEFAULT_TOLERANCE,
            abx: None,
            abx_strict: false,
            abx_cap: abx::DEFAULT_TRIPLE_CAP,
            seed: 0,
        }
    }
}

fn round2<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    let r = (x * 100.0).round() / 100.0;
    s.serialize_f64(if r == 0.0 { 0.0 } else { r })
}

fn round2_rows<S: Serializer>(rows: &[Option<Vec<f64>>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let rounded: Vec<Option<Vec<f64>>> = rows
        .iter()
        .map(|r| {
            r.as_ref().map(|v| {
                v.iter()
                    .map(|x| {
                        let r = (x * 100.0).round() / 100.0;
                        if r == 0.0 {
                            0.0
                        } else {
                            r
                        }
                    })
                    .collect()
            })
        })
        .collect();
    rounded.serialize(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownJson {
    pub sub: u64,
    pub del: u64,
    pub ins: u64,
    pub gold_length: u64,
}

impl From<PerBreakdown> for BreakdownJson {
    fn from(b: PerBreakdown) -> Self {
        BreakdownJson {
            sub: b.substitutions,
            del: b.deletions,
            ins: b.insertions,
            gold_length: b.gold_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionJson {
    /// Row and column order.
    pub classes: Vec<String>,
    /// Substitution counts, gold class by predicted class.
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized percentages; `null` for rows without substitutions.
    #[serde(serialize_with = "round2_rows")]
    pub rows: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryJson {
    pub hits: u64,
    pub gold: u64,
    pub pred: u64,
    #[serde(serialize_with = "round2")]
    pub precision: f64,
    #[serde(serialize_with = "round2")]
    pub recall: f64,
}

/// ABX error rates in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxJson {
    pub mode: AbxMode,
    pub strict: bool,
    #[serde(serialize_with = "round2")]
    pub within: f64,
    #[serde(serialize_with = "round2")]
    pub across: f64,
    #[serde(serialize_with = "round2")]
    pub summary: f64,
    pub cells_within: usize,
    pub cells_across: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub solver: String,
    pub tie_events: usize,
    pub seed: u64,
    pub tolerance_ms: f64,
    pub frame_rate: String,
    pub frames: u64,
    pub utterances: usize,
    pub conventions: BTreeMap<String, String>,
}

/// Metric bundle for one manifest. Metrics are percentages and are rounded
/// to two decimals when serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub language: String,
    pub track: Track,
    pub vocab_size: usize,
    pub split: String,
    #[serde(serialize_with = "round2")]
    pub pnmi: f64,
    #[serde(serialize_with = "round2")]
    pub per: f64,
    pub per_breakdown: BreakdownJson,
    #[serde(serialize_with = "round2")]
    pub f1: f64,
    #[serde(serialize_with = "round2")]
    pub r_value: f64,
    pub boundaries: BoundaryJson,
    pub confusion: ConfusionJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abx: Option<AbxJson>,
    /// File name of the assignment dump, if one was written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<String>,
    pub metadata: Metadata,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_utf8(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

fn conventions(mode: Option<AbxMode>, strict: bool) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    let mut put = |k: &str, v: &str| {
        c.insert(k.to_string(), v.to_string());
    };
    put("frame_labels", "gold label at each frame center; gaps are silence");
    put("per", "corpus micro-average of edits over gold tokens; edge silence stripped, internal silence kept");
    put("boundaries", "inclusive tolerance; windows split at midpoints between gold boundaries");
    put("ties", "many-to-one: earliest label; one-to-one: lexicographically smallest optimal map");
    put("language_mean", "unweighted mean of per-language values");
    if let Some(mode) = mode {
        put("abx_across", "A and B share a speaker, X is from another speaker");
        put(
            "abx_distance",
            match (mode, strict) {
                (AbxMode::Continuous, _) => abx::DTW_DESCRIPTION,
                (AbxMode::Discrete, false) => "edit distance on collapsed units over the longer length",
                (AbxMode::Discrete, true) => "0 if collapsed units are equal, 1 otherwise",
            },
        );
    }
    c
}

/// Loaded inputs of one evaluation.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub manifest: Manifest,
    pub inventory: PhonemeInventory,
    pub gold: PhoneCorpus,
    pub units: UnitCorpus,
}

impl Inputs {
    pub fn load(manifest: Manifest, track: Option<Track>) -> Result<Self> {
        let mut manifest = manifest;
        let inventory = PhonemeInventory::load(&manifest.inventory)?;
        if let Some(t) = track {
            manifest.track = t;
        }
        if manifest.track == Track::OneToOne && manifest.vocab_size != inventory.one_to_one_vocab_size() {
            return Err(Error::VocabMismatch {
                expected: inventory.one_to_one_vocab_size(),
                found: manifest.vocab_size,
            });
        }
        let gold = PhoneCorpus::load(&manifest.gold, &inventory)?;
        let units = UnitCorpus::load(&manifest.units)?;
        for w in &units.warnings {
            log::warn!("{}: {w}", manifest.units.display());
        }
        units.check_vocab(manifest.vocab_size)?;
        check_utterances(&gold, &units)?;
        Ok(Inputs {
            manifest,
            inventory,
            gold,
            units,
        })
    }

    pub fn assignment(&self) -> Result<Assignment> {
        let table = build_contingency(&self.gold, &self.units, &self.inventory, self.manifest.vocab_size)?;
        match self.manifest.track {
            Track::ManyToOne => Ok(assignment::many_to_one(&table)),
            Track::OneToOne => assignment::one_to_one(&table),
        }
    }
}

/// Both ABX conditions over the inputs.
pub fn abx_scores(inputs: &Inputs, mode: AbxMode, strict: bool, cap: usize, seed: u64) -> Result<AbxJson> {
    let items = abx::extract_items(&inputs.gold, inputs.inventory.silence_index());
    let reps: Vec<Representation<f64>> = match mode {
        AbxMode::Discrete => abx::discrete_representations(&items, &inputs.units)?,
        AbxMode::Continuous => {
            let dir = inputs
                .manifest
                .features
                .as_ref()
                .ok_or(Error::MissingField("features"))?;
            let (rate, feats) = abx::load_features::<f64>(dir)?;
            abx::continuous_representations(&items, &feats, rate)?
        }
    };
    let run = |condition| {
        abx::abx_score(
            &items,
            &reps,
            &AbxOptions {
                condition,
                cap,
                seed,
                strict,
            },
        )
    };
    let within = run(Condition::Within)?;
    let across = run(Condition::Across)?;
    let (w, a) = (within.error_rate(), across.error_rate());
    Ok(AbxJson {
        mode,
        strict,
        within: w,
        across: a,
        summary: abx::abx_summary(w, a),
        cells_within: within.cells.len(),
        cells_across: across.cells.len(),
    })
}

/// Runs the full pipeline on loaded inputs.
pub fn evaluate_inputs(inputs: &Inputs, opts: &EvalOptions) -> Result<(EvalReport, Assignment)> {
    let Inputs {
        manifest,
        inventory: inv,
        gold,
        units,
    } = inputs;
    let silence = inv.silence_index();
    let table = build_contingency(gold, units, inv, manifest.vocab_size)?;
    let assignment = match manifest.track {
        Track::ManyToOne => assignment::many_to_one(&table),
        Track::OneToOne => assignment::one_to_one(&table)?,
    };
    let pnmi: f64 = metrics::pnmi(&table)?;
    let assigned = assignment::apply(&assignment, units)?;
    let golds = gold_streams(gold, units, inv)?;

    type Partial = (PerBreakdown, SubstitutionCounts, BoundaryCounts);
    let partials: Vec<Partial> = golds
        .par_iter()
        .map(|(id, g)| {
            let a = &assigned[id];
            let (gt, ht) = (metrics::collapse(g, silence), metrics::collapse(a, silence));
            let ops = metrics::align(&gt, &ht);
            let gb = metrics::segment_boundaries(gold.get(id)?, silence);
            let pb = metrics::frame_boundaries(a, units.frame_rate);
            Ok((
                PerBreakdown::from_ops(&ops, gt.len()),
                SubstitutionCounts::from_ops(&ops, inv),
                BoundaryCounts::from_utterance(&gb, &pb, opts.tolerance)?,
            ))
        })
        .collect::<Result<_>>()?;
    let (breakdown, subs, bounds) = partials.iter().fold(
        (PerBreakdown::default(), SubstitutionCounts::default(), BoundaryCounts::default()),
        |(b, s, c), (pb, ps, pc)| (b.merge(*pb), s.merge(ps), c.merge(*pc)),
    );
    let per: f64 = breakdown.rate()?;
    let seg: metrics::BoundaryScore<f64> = metrics::segmentation_scores(bounds)?;
    let confusion = subs.normalize::<f64>();
    let abx = match opts.abx {
        Some(mode) => Some(abx_scores(inputs, mode, opts.abx_strict, opts.abx_cap, opts.seed)?),
        None => None,
    };

    let report = EvalReport {
        schema_version: SCHEMA_VERSION,
        tool: TOOL.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        language: manifest.language.clone(),
        track: manifest.track,
        vocab_size: manifest.vocab_size,
        split: manifest.split.clone(),
        pnmi: pnmi * 100.0,
        per: per * 100.0,
        per_breakdown: breakdown.into(),
        f1: seg.f1,
        r_value: seg.r_value,
        boundaries: BoundaryJson {
            hits: seg.hits,
            gold: seg.gold_count,
            pred: seg.pred_count,
            precision: seg.precision,
            recall: seg.recall,
        },
        confusion: ConfusionJson {
            classes: PhonemeClass::ALL.iter().map(|c| c.as_str().to_string()).collect(),
            counts: confusion.counts.iter().map(|r| r.to_vec()).collect(),
            rows: confusion.rows,
        },
        abx,
        assignment: None,
        metadata: Metadata {
            solver: match manifest.track {
                Track::ManyToOne => "argmax".to_string(),
                Track::OneToOne => SOLVER_ID.to_string(),
            },
            tie_events: assignment.tie_events,
            seed: opts.seed,
            tolerance_ms: opts.tolerance.0 as f64 / 1000.0,
            frame_rate: units.frame_rate.to_string(),
            frames: table.total(),
            utterances: units.utterances.len(),
            conventions: conventions(opts.abx, opts.abx_strict),
        },
    };
    Ok((report, assignment))
}

/// Default assignment dump path next to a report: `x.json` → `x.assignment.tsv`.
pub fn default_assignment_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    report.with_file_name(format!("{stem}.assignment.tsv"))
}

/// Evaluates a manifest file, writing the report and the assignment dump.
pub fn evaluate(manifest: &Path, out: &Path, assignment_out: Option<&Path>, opts: &EvalOptions) -> Result<EvalReport> {
    let inputs = Inputs::load(Manifest::load(manifest)?, opts.track)?;
    let (mut report, assignment) = evaluate_inputs(&inputs, opts)?;
    let dump = assignment_out.map_or_else(|| default_assignment_path(out), Path::to_path_buf);
    std::fs::write(&dump, assignment.to_tsv(&inputs.inventory)).map_err(|e| Error::io(&dump, e))?;
    report.assignment = dump.file_name().map(|n| n.to_string_lossy().into_owned());
    std::fs::write(out, report.to_json()?).map_err(|e| Error::io(out, e))?;
    Ok(report)
}

/// Runs `f` on a pool with `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

const CSV_HEADER: &str = "language,track,vocab_size,pnmi,per,f1,r_value,abx_within,abx_across,abx";

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.2}")).unwrap_or_default()
}

/// Per-language rows of one split followed by a `mean` row of unweighted
/// means. Rows are sorted by language, so input order does not matter.
pub fn aggregate(reports: &[EvalReport], group: &str) -> Result<String> {
    let mut rows: Vec<&EvalReport> = reports.iter().filter(|r| r.split == group).collect();
    if rows.is_empty() {
        return Err(Error::Empty(format!("no reports for split `{group}`")));
    }
    let track = rows[0].track;
    if rows.iter().any(|r| r.track != track) {
        return Err(Error::Invalid(format!("split `{group}` mixes many-to-one and one-to-one reports")));
    }
    rows.sort_by(|a, b| {
        (&a.language, a.vocab_size)
            .cmp(&(&b.language, b.vocab_size))
            .then_with(|| a.pnmi.total_cmp(&b.pnmi))
    });
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let abx_of = |r: &EvalReport| r.abx.as_ref().map(|a| [a.within, a.across, a.summary]);
    for r in &rows {
        let abx = abx_of(r);
        out.push_str(&format!(
            "{},{},{},{:.2},{:.2},{:.2},{:.2},{},{},{}\n",
            r.language,
            r.track,
            r.vocab_size,
            r.pnmi,
            r.per,
            r.f1,
            r.r_value,
            cell(abx.map(|a| a[0])),
            cell(abx.map(|a| a[1])),
            cell(abx.map(|a| a[2]))
        ));
    }
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&EvalReport) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    let abx_mean = |k: usize| {
        rows.iter()
            .map(|r| abx_of(r).map(|a| a[k]))
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n)
    };
    let vocab = if rows.iter().all(|r| r.vocab_size == rows[0].vocab_size) {
        rows[0].vocab_size.to_string()
    } else {
        String::new()
    };
    out.push_str(&format!(
        "mean,{track},{vocab},{:.2},{:.2},{:.2},{:.2},{},{},{}\n",
        mean(&|r| r.pnmi),
        mean(&|r| r.per),
        mean(&|r| r.f1),
        mean(&|r| r.r_value),
        cell(abx_mean(0)),
        cell(abx_mean(1)),
        cell(abx_mean(2))
    ));
    Ok(out)
}
