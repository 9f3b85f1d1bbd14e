//! The `gnqa` command line: corpus generation, training, evaluation,
//! explanation and file validation.
//!
//! Exit codes are 0 on success, 1 for usage errors and 2 for runtime or
//! data errors. `--config FILE` reads a JSON object whose keys are long
//! flag names; its entries are spliced in ahead of the command-line flags
//! so that flags given explicitly win.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use crate::dataset::{
    load_image_features, load_samples, load_scene_graphs, Context, Dataset, QaSample,
};
use crate::encoder::{load_embeddings, EmbeddingTable, EncoderConfig, GlobalMode};
use crate::error::{Error, Result};
use crate::explain::{explain_sample, export_dot, Selection};
use crate::heads::{HeadKind, ModelConfig, QaModel};
use crate::scene_graph::SceneGraph;
use crate::synth::{build_corpus, ImageMode, QaKind, Splits, SynthConfig};
use crate::trainer::{
    evaluate, fit, load_checkpoint, log_to_jsonl, save_checkpoint, LrSchedule, TrainConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "gnqa",
    version,
    about = "Graph networks for scene-graph question answering"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON object of flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Train a model and write its checkpoint and epoch log.
    Train(TrainArgs),
    /// Score a split with a trained model.
    Eval(EvalArgs),
    /// Write the salience-filtered graph of one sample.
    Explain(ExplainArgs),
    /// Check scene-graph or QA files.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 500)]
    pub n_val: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Candidates per question.
    #[arg(long, default_value_t = 7)]
    pub k: usize,
    #[arg(long, default_value_t = 16)]
    pub dw: usize,
    #[arg(long, default_value_t = 16)]
    pub dimg: usize,
    /// Comma-separated question kinds.
    #[arg(long, value_delimiter = ',', default_values_t = QaKind::ALL.map(|k| k.to_string()))]
    pub kinds: Vec<String>,
    #[arg(long, value_enum, default_value_t = ImageModeArg::BagOfObjects)]
    pub image_mode: ImageModeArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ImageModeArg {
    BagOfObjects,
    Zeros,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GraphSource {
    /// Scene graphs with named, attributed nodes and predicate edges.
    VgStyle,
    None,
}

/// Where a corpus lives; individual files can be overridden.
#[derive(Args, Debug)]
pub struct DataArgs {
    /// Corpus directory as written by `synth`.
    #[arg(long, default_value = ".")]
    pub data: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub scene_graphs: Option<PathBuf>,
}

impl DataArgs {
    fn file(&self, over: &Option<PathBuf>, name: &str) -> PathBuf {
        over.clone().unwrap_or_else(|| self.data.join(name))
    }

    fn embeddings(&self) -> Result<EmbeddingTable> {
        load_embeddings(self.file(&self.embeddings, "embeddings.txt"))
    }

    fn split(&self, name: &str) -> Result<Vec<QaSample>> {
        load_samples(self.data.join(format!("{name}.jsonl")))
    }

    fn context(&self, cfg: &ModelConfig) -> Result<Context> {
        let graphs = if cfg.no_graph {
            Default::default()
        } else {
            load_scene_graphs(self.file(&self.scene_graphs, "scene_graphs.jsonl"))?
        };
        let images = if cfg.encoder.use_image() {
            load_image_features(self.file(&self.images, "image_features.jsonl"))?
        } else {
            Default::default()
        };
        Ok(Context { graphs, images })
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = HeadArg::Fgn)]
    pub head: HeadArg,
    /// Number of GN blocks.
    #[arg(long, default_value_t = 1)]
    pub stack: usize,
    #[arg(long, overrides_with = "no_attrs")]
    pub attrs: bool,
    /// Encode nodes by name only.
    #[arg(long, overrides_with = "attrs")]
    pub no_attrs: bool,
    #[arg(long, value_enum, default_value_t = GraphSource::VgStyle)]
    pub graphs: GraphSource,
    /// Replace every scene graph by the empty graph.
    #[arg(long)]
    pub no_graph: bool,
    /// Remove all edges.
    #[arg(long)]
    pub no_edges: bool,
    /// Blocks of the global input; defaults to ciq for ugn and iq for fgn.
    #[arg(long, value_enum)]
    pub global_mode: Option<GlobalModeArg>,
    /// Word-vector width; checked against the embeddings file.
    #[arg(long)]
    pub dw: Option<usize>,
    /// Image-feature width; checked against the features file.
    #[arg(long)]
    pub dimg: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Triplets per minibatch.
    #[arg(long, default_value_t = 100)]
    pub batch: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Divide the learning rate every N epochs instead of on validation decreases.
    #[arg(long, value_name = "N")]
    pub decay_every: Option<usize>,
    /// Record elapsed seconds in the epoch log.
    #[arg(long)]
    pub wall_time: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HeadArg {
    Ugn,
    Fgn,
}

impl From<HeadArg> for HeadKind {
    fn from(h: HeadArg) -> Self {
        match h {
            HeadArg::Ugn => HeadKind::Unfactorized,
            HeadArg::Fgn => HeadKind::Factorized,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GlobalModeArg {
    Ciq,
    Cq,
    Iq,
    Q,
}

impl From<GlobalModeArg> for GlobalMode {
    fn from(m: GlobalModeArg) -> Self {
        match m {
            GlobalModeArg::Ciq => GlobalMode::CandidateImageQuestion,
            GlobalModeArg::Cq => GlobalMode::CandidateQuestion,
            GlobalModeArg::Iq => GlobalMode::ImageQuestion,
            GlobalModeArg::Q => GlobalMode::Question,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Also write `eval_report.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Sample id, or its position in the split.
    #[arg(long)]
    pub sample: String,
    /// Candidate whose u-GN pass is explained; defaults to the prediction.
    #[arg(long)]
    pub candidate: Option<usize>,
    /// Fraction of nodes and of edges to keep.
    #[arg(long, default_value_t = 0.5, conflicts_with = "top_k")]
    pub q: f64,
    /// Keep this many nodes and edges instead of a fraction.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, default_value = "explain")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Scene-graph files: `.json` holds one graph, anything else one per line.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Treat the files as QA sample lists instead.
    #[arg(long)]
    pub samples: bool,
}

/// Splices the `--config` file's flags in after the subcommand name.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            path = args.get(i + 1).cloned();
            break;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(OsString::from(p));
            break;
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let path = PathBuf::from(path);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let serde_json::Value::Object(map) = value else {
        return Err(Error::Config(format!(
            "{}: config must be a JSON object",
            path.display()
        )));
    };
    let mut tokens = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let mut push = |v: &serde_json::Value| -> Result<()> {
            match v {
                serde_json::Value::Bool(true) => tokens.push(OsString::from(&flag)),
                serde_json::Value::Bool(false) | serde_json::Value::Null => {}
                serde_json::Value::String(s) => {
                    tokens.extend([OsString::from(&flag), OsString::from(s)])
                }
                serde_json::Value::Number(n) => {
                    tokens.extend([OsString::from(&flag), OsString::from(n.to_string())])
                }
                _ => {
                    return Err(Error::Config(format!(
                        "config key `{key}` has an unsupported value"
                    )))
                }
            }
            Ok(())
        };
        match &v {
            serde_json::Value::Array(items) => items.iter().try_for_each(&mut push)?,
            other => push(other)?,
        }
    }
    let sub = args
        .iter()
        .skip(1)
        .position(|a| {
            ["synth", "train", "eval", "explain", "validate"]
                .contains(&a.to_string_lossy().as_ref())
        })
        .map(|p| p + 2)
        .unwrap_or(args.len());
    let mut out = args[..sub].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&args[sub..]);
    Ok(out)
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a, stdout),
        Command::Train(a) => cmd_train(&a, stdout),
        Command::Eval(a) => cmd_eval(&a, stdout),
        Command::Explain(a) => cmd_explain(&a, stdout),
        Command::Validate(a) => cmd_validate(&a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn cmd_synth(a: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let kinds = a
        .kinds
        .iter()
        .map(|k| k.parse())
        .collect::<Result<Vec<QaKind>>>()?;
    let cfg = SynthConfig {
        kinds,
        sizes: Splits {
            train: a.n_train,
            val: a.n_val,
            test: a.n_test,
        },
        seed: a.seed,
        k: a.k,
        d_w: a.dw,
        d_img: a.dimg,
        image_mode: match a.image_mode {
            ImageModeArg::BagOfObjects => ImageMode::BagOfObjects,
            ImageModeArg::Zeros => ImageMode::Zeros,
        },
        ..SynthConfig::default()
    };
    let corpus = build_corpus(&cfg)?;
    corpus.write(&a.out)?;
    let m = &corpus.manifest;
    let _ = writeln!(
        stdout,
        "wrote {} (seed {}, k {})",
        a.out.display(),
        m.seed,
        m.k
    );
    for (split, total) in &m.totals {
        let by_kind: Vec<String> = m.counts[split]
            .iter()
            .map(|(k, n)| format!("{k} {n}"))
            .collect();
        let _ = writeln!(stdout, "  {split:<6} {total:>6}  ({})", by_kind.join(", "));
    }
    Ok(())
}

fn model_config(a: &TrainArgs, table: &EmbeddingTable, d_img: usize) -> Result<ModelConfig> {
    let head: HeadKind = a.head.into();
    if let Some(dw) = a.dw {
        if dw != table.dim() {
            return Err(Error::Config(format!(
                "--dw {dw} but the embeddings have width {}",
                table.dim()
            )));
        }
    }
    let global_mode = a.global_mode.map(GlobalMode::from).unwrap_or(match head {
        HeadKind::Unfactorized => GlobalMode::CandidateImageQuestion,
        HeadKind::Factorized => GlobalMode::ImageQuestion,
    });
    let cfg = ModelConfig {
        head,
        encoder: EncoderConfig {
            d_w: table.dim(),
            d_img,
            use_attributes: !a.no_attrs,
            global_mode,
        },
        stack: a.stack,
        hidden: a.hidden,
        dropout: a.dropout,
        no_graph: a.no_graph || a.graphs == GraphSource::None,
        no_edges: a.no_edges,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Width of the image features, or 0 when the global mode ignores them.
fn image_width(a: &TrainArgs) -> Result<usize> {
    let uses_image = a
        .global_mode
        .map(|m| GlobalMode::from(m).includes_image())
        .unwrap_or(true);
    if !uses_image {
        return Ok(a.dimg.unwrap_or(0));
    }
    let path = a.data.file(&a.data.images, "image_features.jsonl");
    let rows = load_image_features(&path)?;
    let width = rows.values().next().map_or(0, Vec::len);
    if let Some(d) = a.dimg {
        if d != width {
            return Err(Error::Config(format!(
                "--dimg {d} but {} holds width {width}",
                path.display()
            )));
        }
    }
    Ok(width)
}

pub fn cmd_train(a: &TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let table = a.data.embeddings()?;
    let cfg = model_config(a, &table, image_width(a)?)?;
    let tc = TrainConfig {
        batch_triplets: a.batch,
        lr: a.lr,
        max_epochs: a.epochs,
        seed: a.seed,
        schedule: match a.decay_every {
            Some(every) => LrSchedule::Fixed { every },
            None => LrSchedule::OnValidationDecrease,
        },
        record_wall_time: a.wall_time,
        ..TrainConfig::default()
    };
    tc.validate()?;
    let ctx = a.data.context(&cfg)?;
    let train = Dataset::new(a.data.split("train")?, &ctx, &table, &cfg)?;
    let val = Dataset::new(a.data.split("val")?, &ctx, &table, &cfg)?;
    let model = QaModel::new(cfg, &mut crate::Rng::seed_from_u64(a.seed))?;
    let outcome = fit(model, &train, &val, &tc)?;
    create_dir(&a.out)?;
    save_checkpoint(&outcome.model, a.out.join("model.json"))?;
    write_file(&a.out.join("train_log.jsonl"), &log_to_jsonl(&outcome.log))?;
    let report = evaluate(&outcome.model, &val)?;
    write_file(
        &a.out.join("val_report.json"),
        &(report.to_json_pretty() + "\n"),
    )?;
    let _ = writeln!(
        stdout,
        "best epoch {} of {}, validation accuracy {:.2}%",
        outcome.best_epoch,
        outcome.log.len(),
        100.0 * outcome.best_val_accuracy
    );
    let _ = write!(stdout, "{}", report.table());
    Ok(())
}

/// Loads a checkpoint and encodes one split against it.
fn load_for(data: &DataArgs, checkpoint: &Path, split: &str) -> Result<(QaModel, Dataset)> {
    let model = load_checkpoint(checkpoint)?;
    let table = data.embeddings()?;
    let cfg = model.config().clone();
    if table.dim() != cfg.encoder.d_w {
        return Err(Error::Checkpoint(format!(
            "model expects {}-d word vectors, the embeddings have {}",
            cfg.encoder.d_w,
            table.dim()
        )));
    }
    let ctx = data.context(&cfg)?;
    let set = Dataset::new(data.split(split)?, &ctx, &table, &cfg)?;
    Ok((model, set))
}

pub fn cmd_eval(a: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let (model, set) = load_for(&a.data, &a.checkpoint, &a.split)?;
    let report = evaluate(&model, &set)?;
    let json = report.to_json_pretty() + "\n";
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_file(&out.join("eval_report.json"), &json)?;
    }
    let _ = write!(stdout, "{}{}", report.table(), json);
    Ok(())
}

fn find_sample(samples: &[QaSample], key: &str) -> Result<usize> {
    if let Some(i) = samples.iter().position(|s| s.id.as_deref() == Some(key)) {
        return Ok(i);
    }
    match key.parse::<usize>() {
        Ok(i) if i < samples.len() => Ok(i),
        _ => Err(Error::Config(format!("no sample `{key}` in this split"))),
    }
}

pub fn cmd_explain(a: &ExplainArgs, stdout: &mut dyn Write) -> Result<()> {
    let selection = match a.top_k {
        Some(k) => Selection::TopK(k),
        None => Selection::Fraction(a.q),
    };
    selection.validate()?;
    let (model, set) = load_for(&a.data, &a.checkpoint, &a.split)?;
    let i = find_sample(&set.samples, &a.sample)?;
    let sample = &set.samples[i];
    let graph = if model.config().no_graph {
        SceneGraph::default()
    } else {
        let graphs = load_scene_graphs(a.data.file(&a.data.scene_graphs, "scene_graphs.jsonl"))?;
        let g = graphs.get(&sample.image_id).cloned().unwrap_or_default();
        if model.config().no_edges {
            g.without_edges()
        } else {
            g
        }
    };
    let (_, report) = explain_sample(&model, &set.inputs[i], a.candidate, selection)?;
    let dot = export_dot(&graph, &report)?;
    create_dir(&a.out)?;
    let stem = sample.id.clone().unwrap_or_else(|| i.to_string());
    let dot_path = a.out.join(format!("{stem}.dot"));
    let json_path = a.out.join(format!("{stem}.salience.json"));
    write_file(&dot_path, &dot)?;
    write_file(&json_path, &(report.to_json_pretty() + "\n"))?;
    let _ = writeln!(stdout, "{}\n{}", dot_path.display(), json_path.display());
    Ok(())
}

pub fn cmd_validate(a: &ValidateArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut problems = Vec::new();
    for path in &a.files {
        if a.samples {
            match load_samples(path) {
                Ok(s) => {
                    let _ = writeln!(stdout, "{}: {} samples ok", path.display(), s.len());
                }
                Err(e) => problems.push(e.to_string()),
            }
            continue;
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let graphs: Vec<(usize, SceneGraph)> = if path.extension().is_some_and(|e| e == "json") {
            vec![(
                1,
                serde_json::from_str(&text).map_err(|e| format_error(path, e.line(), e))?,
            )]
        } else {
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    Ok((
                        i + 1,
                        serde_json::from_str(l).map_err(|e| format_error(path, i + 1, e))?,
                    ))
                })
                .collect::<Result<_>>()?
        };
        let before = problems.len();
        for (line, g) in &graphs {
            for v in g.validate().violations {
                problems.push(format!("{}:{line}: {v}", path.display()));
            }
        }
        if problems.len() == before {
            let _ = writeln!(
                stdout,
                "{}: {} scene graphs ok",
                path.display(),
                graphs.len()
            );
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems))
    }
}

fn format_error(path: &Path, line: usize, e: serde_json::Error) -> Error {
    Error::Format {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_tokens_go_before_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(
            &path,
            r#"{"epochs": 3, "no_edges": true, "no-attrs": false, "head": "ugn"}"#,
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let args = expand_config(os(&["gnqa", "train", "--config", p, "--epochs", "5"])).unwrap();
        assert_eq!(
            args,
            os(&[
                "gnqa",
                "train",
                "--epochs",
                "3",
                "--head",
                "ugn",
                "--no-edges",
                "--config",
                p,
                "--epochs",
                "5"
            ])
        );
        let cli = Cli::try_parse_from(args).unwrap();
        let Command::Train(t) = cli.command else {
            panic!()
        };
        assert_eq!(t.epochs, 5);
        assert!(t.no_edges);
        assert_eq!(t.head, HeadArg::Ugn);
    }

    #[test]
    fn later_attribute_flag_wins() {
        let cli = Cli::try_parse_from(os(&["gnqa", "train", "--no-attrs", "--attrs"])).unwrap();
        let Command::Train(t) = cli.command else {
            panic!()
        };
        assert!(!t.no_attrs);
    }

    #[test]
    fn exit_codes() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(os(&["gnqa", "bogus"]), &mut o, &mut e), EXIT_USAGE);
        assert_eq!(run(os(&["gnqa", "--help"]), &mut o, &mut e), EXIT_OK);
        assert_eq!(
            run(
                os(&["gnqa", "validate", "/nonexistent/x.json"]),
                &mut o,
                &mut e
            ),
            EXIT_RUNTIME
        );
        assert_eq!(
            run(
                os(&["gnqa", "train", "--config", "/nonexistent.json"]),
                &mut o,
                &mut e
            ),
            EXIT_USAGE
        );
    }

    #[test]
    fn sample_lookup() {
        let s = QaSample {
            id: Some("a".into()),
            image_id: "i".into(),
            question: "q".into(),
            candidates: vec!["x".into(), "y".into()],
            correct_index: 0,
            decoy_groups: None,
            question_type: None,
        };
        let v = vec![s.clone(), s];
        assert_eq!(find_sample(&v, "a").unwrap(), 0);
        assert_eq!(find_sample(&v, "1").unwrap(), 1);
        assert!(find_sample(&v, "7").is_err());
    }
}
