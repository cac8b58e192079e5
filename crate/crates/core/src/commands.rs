//! Subcommand implementations behind the `gazemap` binary. Each command
//! reads its inputs, writes every output atomically into `--out-dir`, and
//! finishes with a `manifest.json` describing the run.

use crate::analytics::{detect_jva, peer_gaze_drop_alert, summarize, write_alerts_csv, write_jva_csv};
use crate::baselines::{run_sweep, write_sweep_csv, ForestParams, MlpParams, ModelSpec};
use crate::io::{
    align, annotator_ids, filter_annotator, parse_annotations, parse_decisions, parse_detection_stream,
    write_annotations, write_decisions, write_detection_stream, AnnotationRecord, DetectionStream, SessionConfig,
    TrackingGate,
};
use crate::metrics::{cohens_kappa, evaluate, friedman_test, EvalReport};
use crate::pipeline::{labelled_features, run_pipeline};
use crate::simulator::{generate, SimulationConfig};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(
    name = "gazemap",
    version,
    about = "Gaze-behaviour analytics for group learning sessions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic session: detections, annotations and truth.
    Simulate(SimulateArgs),
    /// Track seats and classify every gaze in a detection stream.
    Pipeline(PipelineArgs),
    /// Score decisions against annotations.
    Evaluate(EvaluateArgs),
    /// Train keypoint baselines on growing fractions of a session.
    Sweep(SweepArgs),
    /// Per-person proportions, joint attention episodes and alerts.
    Summarize(SummarizeArgs),
    /// Friedman rank test over a blocks × treatments score table.
    Friedman(FriedmanArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (TOML with [scene] and optional [noise]).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the scene seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Clone)]
pub struct EngineOverrides {
    /// Tracking gate in pixels, or "auto".
    #[arg(long)]
    pub gate: Option<TrackingGate>,
    /// Anchor smoothing factor in (0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Count tablets as laptops.
    #[arg(long)]
    pub tablet_as_laptop: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Detection stream, one JSON object per line.
    #[arg(long)]
    pub detections: PathBuf,
    /// Session config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub engine: EngineOverrides,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Decisions CSV written by `pipeline`.
    #[arg(long)]
    pub decisions: PathBuf,
    /// Annotations CSV (`frame,person,behaviour,annotator`).
    #[arg(long)]
    pub annotations: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Annotator whose labels are the reference; defaults to the first one
    /// in the file.
    #[arg(long)]
    pub annotator: Option<String>,
    /// Second annotator for inter-annotator agreement.
    #[arg(long)]
    pub second_annotator: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Detection stream, one JSON object per line.
    #[arg(long)]
    pub detections: PathBuf,
    /// Annotations CSV (`frame,person,behaviour,annotator`).
    #[arg(long)]
    pub annotations: PathBuf,
    /// Session config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub fractions: Vec<f64>,
    /// One or more seeds; each gives its own split and model initialisation.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seed: Vec<u64>,
    #[arg(long)]
    pub annotator: Option<String>,
    /// Also fit both models on all samples (first seed) and write them as
    /// JSON for inspection.
    #[arg(long)]
    pub save_models: bool,
    #[command(flatten)]
    pub engine: EngineOverrides,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Decisions CSV written by `pipeline`.
    #[arg(long)]
    pub decisions: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Shortest joint attention episode kept, in frames.
    #[arg(long, default_value_t = 3)]
    pub min_duration: usize,
    #[arg(long, default_value_t = 2)]
    pub min_participants: usize,
    /// Trailing window of the peer-gaze alert, in frames.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 0.5)]
    pub drop_ratio: f64,
}

#[derive(Debug, Args)]
pub struct FriedmanArgs {
    /// CSV with one column per treatment and one row per block. A leading
    /// column named `block` holds labels and is skipped.
    #[arg(long)]
    pub scores: PathBuf,
    /// Also write friedman.json here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// What a command read and wrote. Only `wall_clock_s` varies between
/// identical runs.
#[derive(Debug, Default)]
struct Manifest {
    command: &'static str,
    config: Option<PathBuf>,
    inputs: BTreeMap<&'static str, PathBuf>,
    outputs: Vec<String>,
    seed: Value,
    parameters: Value,
}

impl Manifest {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            seed: Value::Null,
            parameters: Value::Null,
            ..Self::default()
        }
    }

    fn input(&mut self, name: &'static str, path: &Path) {
        self.inputs.insert(name, path.to_path_buf());
    }

    fn finish(&self, out_dir: &Path, started: Instant) -> Result<()> {
        let inputs: BTreeMap<&str, String> = self.inputs.iter().map(|(k, v)| (*k, v.display().to_string())).collect();
        let doc = json!({
            "command": self.command,
            "config": self.config.as_ref().map(|p| p.display().to_string()),
            "inputs": inputs,
            "outputs": self.outputs,
            "seed": self.seed,
            "parameters": self.parameters,
            "engine_version": env!("CARGO_PKG_VERSION"),
            "wall_clock_s": started.elapsed().as_secs_f64(),
        });
        write_atomic(out_dir, "manifest.json", |w| write_json(w, &doc))
    }
}

fn write_json<W: Write>(mut w: W, v: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Writes `out_dir/name` through a temporary file in the same directory and
/// renames it into place.
fn write_atomic<F>(out_dir: &Path, name: &str, fill: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<&mut File>) -> Result<()>,
{
    let mut tmp = tempfile::NamedTempFile::new_in(out_dir)
        .with_context(|| format!("creating a temporary file in {}", out_dir.display()))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w).with_context(|| format!("writing {name}"))?;
        w.flush()?;
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    let target = out_dir.join(name);
    tmp.persist(&target)
        .with_context(|| format!("replacing {}", target.display()))?;
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn read_stream(path: &Path) -> Result<DetectionStream> {
    parse_detection_stream(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_session_config(path: &Path, engine: &EngineOverrides) -> Result<SessionConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("opening {}", path.display()))?;
    let mut cfg = SessionConfig::from_toml(&text).with_context(|| format!("reading {}", path.display()))?;
    if let Some(g) = engine.gate {
        cfg.tracking_gate = g;
    }
    if let Some(a) = engine.alpha {
        cfg.alpha = a;
    }
    cfg.tablet_as_laptop |= engine.tablet_as_laptop;
    cfg.validate().context("applying command-line overrides")?;
    Ok(cfg)
}

/// Annotations of one annotator: the named one, or the first in the file.
fn reference_annotations(all: &[AnnotationRecord], annotator: Option<&str>) -> Result<(String, Vec<AnnotationRecord>)> {
    let ids = annotator_ids(all);
    let name = match annotator {
        Some(a) if ids.iter().any(|i| i == a) => a.to_string(),
        Some(a) => bail!("annotator {a:?} not found; file has {ids:?}"),
        None => match ids.first() {
            Some(a) => a.clone(),
            None => return Ok((String::new(), Vec::new())),
        },
    };
    let records = filter_annotator(all, &name);
    Ok((name, records))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Pipeline(a) => pipeline(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Summarize(a) => summarize_cmd(&a),
        Command::Friedman(a) => friedman(&a),
    }
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("opening {}", a.config.display()))?;
    let mut cfg = SimulationConfig::from_toml(&text).with_context(|| format!("reading {}", a.config.display()))?;
    if let Some(s) = a.seed {
        cfg.scene.seed = s;
    }
    let sim = generate(&cfg.scene, &cfg.noise)?;
    prepare_out_dir(&a.out_dir)?;
    write_atomic(&a.out_dir, "detections.jsonl", |w| {
        Ok(write_detection_stream(&sim.stream, w)?)
    })?;
    write_atomic(&a.out_dir, "annotations.csv", |w| {
        Ok(write_annotations(&sim.annotations, w)?)
    })?;
    write_atomic(&a.out_dir, "truth.csv", |w| Ok(sim.truth.write_csv(w)?))?;
    let session = cfg.scene.session_config();
    write_atomic(&a.out_dir, "session.toml", |w| {
        Ok(w.write_all(session.to_toml().as_bytes())?)
    })?;
    let mut m = Manifest::new("simulate");
    m.config = Some(a.config.clone());
    m.outputs = ["detections.jsonl", "annotations.csv", "truth.csv", "session.toml"]
        .map(String::from)
        .to_vec();
    m.seed = json!(cfg.scene.seed);
    m.parameters = serde_json::to_value(&cfg)?;
    m.finish(&a.out_dir, started)
}

fn pipeline(a: &PipelineArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = read_session_config(&a.config, &a.engine)?;
    let stream = read_stream(&a.detections)?;
    let run =
        run_pipeline(&stream, &cfg).with_context(|| format!("initialising seats from {}", a.detections.display()))?;
    prepare_out_dir(&a.out_dir)?;
    write_atomic(&a.out_dir, "decisions.csv", |w| Ok(write_decisions(&run.decisions, w)?))?;
    write_atomic(&a.out_dir, "seats.csv", |w| Ok(run.init.seat_map.write_csv(w)?))?;
    let warnings = run.final_seats.order_warnings();
    if warnings > 0 {
        eprintln!("warning: {warnings} anchor updates were skipped to keep the seat order");
    }
    let mut m = Manifest::new("pipeline");
    m.config = Some(a.config.clone());
    m.input("detections", &a.detections);
    m.outputs = vec!["decisions.csv".into(), "seats.csv".into()];
    m.parameters = json!({
        "session": serde_json::to_value(&cfg)?,
        "gate_px": run.gate,
        "seed_sample_frames": run.init.sample_frames,
        "order_warnings": warnings,
    });
    m.finish(&a.out_dir, started)
}

/// The report document written by `evaluate`.
pub fn report_json(report: &EvalReport, annotator: &str, kappa: Option<(&str, Value)>) -> Value {
    let mut v = report.to_json();
    v["annotator"] = json!(annotator);
    if let Some((other, k)) = kappa {
        v["agreement"] = json!({ "second_annotator": other, "kappa": k });
    }
    v
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let started = Instant::now();
    let decisions =
        parse_decisions(open(&a.decisions)?).with_context(|| format!("reading {}", a.decisions.display()))?;
    let all =
        parse_annotations(open(&a.annotations)?).with_context(|| format!("reading {}", a.annotations.display()))?;
    let (name, reference) = reference_annotations(&all, a.annotator.as_deref())?;
    let alignment = align(&decisions, &reference);
    let report = evaluate(&alignment.pairs).with_unmatched(alignment.unmatched_pred, alignment.unmatched_true);
    if alignment.pairs.is_empty() {
        eprintln!("warning: no decision matched an annotation; the report is degenerate");
    }
    let kappa = match &a.second_annotator {
        None => None,
        Some(other) => {
            let (other, second) = reference_annotations(&all, Some(other))?;
            let by_key: BTreeMap<_, _> = second
                .iter()
                .map(|r| ((r.frame_index, r.person), r.behaviour))
                .collect();
            let pairs: Vec<_> = reference
                .iter()
                .filter_map(|r| by_key.get(&(r.frame_index, r.person)).map(|b| (r.behaviour, *b)))
                .collect();
            let k = match cohens_kappa(&pairs) {
                Ok(k) => json!({
                    "kappa": k.kappa,
                    "observed": k.observed,
                    "expected": k.expected,
                    "pairs": pairs.len(),
                    "degenerate": k.degenerate,
                }),
                Err(e) => {
                    eprintln!("warning: kappa not computed: {e}");
                    Value::Null
                }
            };
            Some((other, k))
        }
    };
    prepare_out_dir(&a.out_dir)?;
    let doc = report_json(&report, &name, kappa.as_ref().map(|(o, k)| (o.as_str(), k.clone())));
    write_atomic(&a.out_dir, "report.json", |w| write_json(w, &doc))?;
    let mut m = Manifest::new("evaluate");
    m.input("decisions", &a.decisions);
    m.input("annotations", &a.annotations);
    m.outputs = vec!["report.json".into()];
    m.parameters = json!({ "annotator": name, "second_annotator": a.second_annotator });
    m.finish(&a.out_dir, started)
}

/// Forest and MLP with their default settings.
pub fn default_model_specs() -> [ModelSpec; 2] {
    [
        ModelSpec::Forest(ForestParams::default()),
        ModelSpec::Mlp(MlpParams::default()),
    ]
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let started = Instant::now();
    if a.seed.is_empty() {
        bail!("at least one --seed is required");
    }
    let cfg = read_session_config(&a.config, &a.engine)?;
    let stream = read_stream(&a.detections)?;
    let all =
        parse_annotations(open(&a.annotations)?).with_context(|| format!("reading {}", a.annotations.display()))?;
    let (name, reference) = reference_annotations(&all, a.annotator.as_deref())?;
    let run =
        run_pipeline(&stream, &cfg).with_context(|| format!("initialising seats from {}", a.detections.display()))?;
    let alignment = align(&run.decisions, &reference);
    let rule_based = evaluate(&alignment.pairs).weighted_f1;
    let samples = labelled_features(&stream, &run, &reference)
        .with_context(|| format!("featurizing {}", a.detections.display()))?;
    let specs = default_model_specs();
    let result = run_sweep(&samples, &a.fractions, &specs, rule_based, &a.seed)?;
    prepare_out_dir(&a.out_dir)?;
    write_atomic(&a.out_dir, "sweep.csv", |w| Ok(write_sweep_csv(&result, w)?))?;
    let mut outputs = vec!["sweep.csv".to_string()];
    if a.save_models {
        for spec in specs {
            let model = spec.with_seed(a.seed[0]).train(&samples)?;
            let file = format!("{}.json", spec.name());
            write_atomic(&a.out_dir, &file, |w| write_json(w, &serde_json::to_value(&model)?))?;
            outputs.push(file);
        }
    }
    let mut m = Manifest::new("sweep");
    m.config = Some(a.config.clone());
    m.input("detections", &a.detections);
    m.input("annotations", &a.annotations);
    m.outputs = outputs;
    m.seed = json!(a.seed);
    m.parameters = json!({
        "fractions": a.fractions,
        "annotator": name,
        "samples": samples.len(),
        "models": specs,
        "rule_based_f1": rule_based,
    });
    m.finish(&a.out_dir, started)
}

fn summarize_cmd(a: &SummarizeArgs) -> Result<()> {
    let started = Instant::now();
    let decisions =
        parse_decisions(open(&a.decisions)?).with_context(|| format!("reading {}", a.decisions.display()))?;
    let summary = summarize(&decisions);
    let episodes = detect_jva(&decisions, a.min_participants, a.min_duration);
    let alerts = peer_gaze_drop_alert(&decisions, a.window, a.drop_ratio);
    prepare_out_dir(&a.out_dir)?;
    write_atomic(&a.out_dir, "summary.json", |w| write_json(w, &summary.to_json()))?;
    write_atomic(&a.out_dir, "jva.csv", |w| Ok(write_jva_csv(&episodes, w)?))?;
    write_atomic(&a.out_dir, "alerts.csv", |w| Ok(write_alerts_csv(&alerts, w)?))?;
    let mut m = Manifest::new("summarize");
    m.input("decisions", &a.decisions);
    m.outputs = ["summary.json", "jva.csv", "alerts.csv"].map(String::from).to_vec();
    m.parameters = json!({
        "min_duration": a.min_duration,
        "min_participants": a.min_participants,
        "window": a.window,
        "drop_ratio": a.drop_ratio,
    });
    m.finish(&a.out_dir, started)
}

/// Reads a score table; returns treatment names and rows.
pub fn read_score_table<R: std::io::Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let skip = usize::from(header.first().is_some_and(|h| h.eq_ignore_ascii_case("block")));
    let names = header[skip..].to_vec();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(skip)
            .map(|v| {
                v.parse::<f64>()
                    .with_context(|| format!("line {}: {v:?} is not a number", i + 2))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((names, rows))
}

fn friedman(a: &FriedmanArgs) -> Result<()> {
    let started = Instant::now();
    let (names, rows) =
        read_score_table(open(&a.scores)?).with_context(|| format!("reading {}", a.scores.display()))?;
    let r = friedman_test(&rows).with_context(|| format!("testing {}", a.scores.display()))?;
    let rank_sums: serde_json::Map<String, Value> = names
        .iter()
        .cloned()
        .zip(r.rank_sums.iter().map(|v| json!(v)))
        .collect();
    let doc = json!({
        "blocks": rows.len(),
        "treatments": names,
        "statistic": r.statistic,
        "df": r.df,
        "p_value": r.p_value,
        "rank_sums": rank_sums,
        "degenerate": r.degenerate,
    });
    let mut out = std::io::stdout().lock();
    write_json(&mut out, &doc)?;
    if let Some(dir) = &a.out_dir {
        prepare_out_dir(dir)?;
        write_atomic(dir, "friedman.json", |w| write_json(w, &doc))?;
        let mut m = Manifest::new("friedman");
        m.input("scores", &a.scores);
        m.outputs = vec!["friedman.json".into()];
        m.finish(dir, started)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_table_with_and_without_labels() {
        let (n, rows) = read_score_table("block,a,b\nd1,0.5,0.7\nd2, 0.6 ,0.8\n".as_bytes()).unwrap();
        assert_eq!(n, vec!["a", "b"]);
        assert_eq!(rows, vec![vec![0.5, 0.7], vec![0.6, 0.8]]);
        let (n, rows) = read_score_table("x,y\n1,2\n".as_bytes()).unwrap();
        assert_eq!((n.len(), rows.len()), (2, 1));
        let err = read_score_table("x,y\n1,zz\n".as_bytes()).unwrap_err();
        assert!(format!("{err:#}").contains("line 2"));
    }

    #[test]
    fn cli_parses_lists_and_gate() {
        let cli = Cli::try_parse_from([
            "gazemap",
            "sweep",
            "--detections",
            "d",
            "--annotations",
            "a",
            "--config",
            "c",
            "--out-dir",
            "o",
            "--fractions",
            "0.2,0.8",
            "--seed",
            "1,2",
            "--gate",
            "auto",
        ])
        .unwrap();
        let Command::Sweep(s) = cli.command else { panic!() };
        assert_eq!(s.fractions, vec![0.2, 0.8]);
        assert_eq!(s.seed, vec![1, 2]);
        assert_eq!(s.engine.gate, Some(TrackingGate::Auto));
        assert!(Cli::try_parse_from(["gazemap", "pipeline", "--gate", "-3"]).is_err());
    }

    #[test]
    fn unknown_annotator_is_an_error() {
        let recs = vec![AnnotationRecord {
            frame_index: 0,
            person: crate::model::PersonId::new(1).unwrap(),
            behaviour: crate::model::BehaviourClass::Student,
            annotator: "A1".into(),
        }];
        assert_eq!(reference_annotations(&recs, None).unwrap().0, "A1");
        assert!(reference_annotations(&recs, Some("B")).is_err());
        assert_eq!(reference_annotations(&[], None).unwrap().1.len(), 0);
    }
}
