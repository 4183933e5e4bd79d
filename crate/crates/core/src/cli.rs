//! Command-line driver.
//!
//! Settings are resolved as defaults, then the config stored in a model file
//! (when one is loaded), then `--config`, then individual flags.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{AssocMode, Config};
use crate::domain::{FrameState, LabelSpaces};
use crate::engine::{self, ActivityModel, FitOptions, Structure};
use crate::error::Error;
use crate::eval::{self, PersonFrame};
use crate::io::{self, ModelFile, RecordFrame};
use crate::synth::{self, presets, Scenario};

#[derive(Debug, Parser)]
#[command(name = "crowdflow", version, about = "Joint tracking, grouping and activity recognition")]
pub struct Cli {
    /// TOML file with engine settings (see `Config`); flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Crossing,
    Waiting,
    Queuing,
    Walking,
    Talking,
    TwoTalking,
    Ablation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    TrackOnly,
    GroupOnly,
}

impl From<ModeArg> for AssocMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => AssocMode::Full,
            ModeArg::TrackOnly => AssocMode::TrackOnly,
            ModeArg::GroupOnly => AssocMode::GroupOnly,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic detection stream.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario file (TOML, or JSON by extension); its seed is replaced by --seed.
        #[arg(long, conflicts_with = "preset")]
        scenario: Option<PathBuf>,
        /// Built-in scenario used when no file is given.
        #[arg(long, value_enum, default_value_t = Preset::Ablation)]
        preset: Preset,
        /// Frame count for the single-activity presets.
        #[arg(long, default_value_t = 40)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Associate detections to tracks and groups.
    Track {
        #[arg(long = "in")]
        input: PathBuf,
        /// Model whose stored settings are used as the base configuration.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Weight of the group term [default: 1.0].
        #[arg(long)]
        lambda: Option<f64>,
        /// Association mode [default: full].
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Optional per-detection overlay dump (JSONL).
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Learn a model from labelled streams.
    Train {
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Structured SVM regularisation D [default: 100].
        #[arg(long = "D")]
        dreg: Option<f64>,
        /// Cutting-plane tolerance [default: 0.001].
        #[arg(long)]
        eps: Option<f64>,
        /// Cutting-plane round limit [default: 500].
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Use every n-th frame as a training sample.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        out_model: PathBuf,
    },
    /// Label people, groups and scenes.
    Infer {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Weight of the group term when tracking inline [default: 1.0].
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Score predictions against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth stream; defaults to the `gt` fields of --pred.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
}

/// Failure of one command, with the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("model file not found: {0}")]
    MissingModel(PathBuf),
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingModel(_) => 2,
            CliError::Lib(Error::Format { .. } | Error::Checksum | Error::Model(_) | Error::Dimension(_)) => 3,
            CliError::Lib(_) | CliError::Usage(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_config(base: Config, file: Option<&Path>) -> CliResult<Config> {
    let Some(path) = file else { return Ok(base) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    // merge the file over `base` field by field
    let mut merged = toml::Table::try_from(&base).map_err(|e| CliError::Usage(e.to_string()))?;
    let over: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Format {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    merge(&mut merged, over);
    merged.try_into().map_err(|e: toml::de::Error| {
        CliError::Lib(Error::Format { path: path.to_path_buf(), line: 0, message: e.to_string() })
    })
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn load_model(path: &Path) -> CliResult<ModelFile> {
    if !path.exists() {
        return Err(CliError::MissingModel(path.to_path_buf()));
    }
    Ok(io::read_model(path)?)
}

fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fmt = |message: String| Error::Format { path: path.to_path_buf(), line: 0, message };
    let sc = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| fmt(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| fmt(e.to_string()))?
    };
    Ok(sc)
}

fn preset(p: Preset, seed: u64, frames: usize) -> Scenario {
    use crate::domain::Collective;
    match p {
        Preset::Crossing => presets::separable(Collective::Crossing, seed, frames),
        Preset::Waiting => presets::separable(Collective::Waiting, seed, frames),
        Preset::Queuing => presets::separable(Collective::Queuing, seed, frames),
        Preset::Walking => presets::separable(Collective::Walking, seed, frames),
        Preset::Talking => presets::separable(Collective::Talking, seed, frames),
        Preset::TwoTalking => presets::two_talking_groups(seed),
        Preset::Ablation => presets::ablation(seed),
    }
}

fn throughput(frames: usize, started: Instant) {
    let secs = started.elapsed().as_secs_f64();
    let fps = if secs > 0.0 { frames as f64 / secs } else { f64::INFINITY };
    eprintln!("processed {frames} frames in {secs:.3} s ({fps:.1} frames/s)");
}

fn track_stream(frames: &[RecordFrame], model: Option<&ActivityModel>, cfg: &Config) -> CliResult<Vec<FrameState>> {
    let mut prev = FrameState::initial();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let dets = f.records.iter().map(|r| r.det.clone()).collect();
        let next = engine::advance_frame(&prev, f.index, dets, model, cfg)?;
        out.push(next.clone());
        prev = next;
    }
    Ok(out)
}

fn infer_with_structure(frames: &[RecordFrame], model: &ActivityModel, cfg: &Config) -> CliResult<Vec<FrameState>> {
    let mut prev = FrameState::initial();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let preds: Vec<_> = f.records.iter().filter_map(|r| r.pred).collect();
        let structure = Structure {
            tracks: preds.iter().map(|p| p.track).collect(),
            groups: preds.iter().map(|p| p.group).collect(),
        };
        let dets = f.records.iter().map(|r| r.det.clone()).collect();
        let next = engine::advance_with_structure(&prev, f.index, dets, &structure, Some(model), cfg)?;
        out.push(next.clone());
        prev = next;
    }
    Ok(out)
}

fn write_outputs(out: &Path, overlay: Option<&Path>, states: &[FrameState]) -> CliResult<()> {
    io::write_records(out, &io::prediction_records(states)?)?;
    if let Some(p) = overlay {
        io::write_overlay(p, states)?;
    }
    Ok(())
}

fn eval_records(pred: &[RecordFrame], gt: Option<&[RecordFrame]>, pred_path: &Path) -> CliResult<Vec<PersonFrame>> {
    let missing = |frame: u64| {
        CliError::Lib(Error::Format {
            path: pred_path.to_path_buf(),
            line: 0,
            message: format!("frame {frame} has a record without ground truth"),
        })
    };
    if let Some(gt) = gt {
        if gt.len() != pred.len()
            || gt.iter().zip(pred).any(|(a, b)| a.index != b.index || a.records.len() != b.records.len())
        {
            return Err(CliError::Usage("prediction and ground-truth streams cover different frames".into()));
        }
    }
    let mut out = Vec::new();
    for (n, f) in pred.iter().enumerate() {
        for (i, r) in f.records.iter().enumerate() {
            let truth = match gt {
                Some(gt) => {
                    let g = &gt[n].records[i];
                    if g.det.bbox != r.det.bbox {
                        return Err(CliError::Usage(format!(
                            "frame {}: detections of the two streams differ",
                            f.index
                        )));
                    }
                    g.det.gt
                }
                None => r.det.gt,
            };
            let truth = truth.ok_or_else(|| missing(f.index))?;
            out.push(PersonFrame { frame: f.index, bbox: r.det.bbox, pred: r.pred.unwrap_or(truth), gt: truth });
        }
    }
    Ok(out)
}

fn configure_threads() {
    if let Some(n) = std::env::var("CROWDFLOW_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second initialisation in the same process is harmless to ignore
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> CliResult<()> {
    configure_threads();
    let cfg_file = cli.config.as_deref();
    match cli.command {
        Command::Synth { seed, scenario, preset: p, frames, out } => {
            let sc = match scenario {
                Some(path) => Scenario { seed, ..load_scenario(&path)? },
                None => preset(p, seed, frames),
            };
            let g = synth::generate(&sc)?;
            io::write_detections(&out, &g.frames)?;
        }
        Command::Track { input, model, out, lambda, mode, overlay } => {
            let base = match &model {
                Some(p) => load_model(p)?.config,
                None => Config::default(),
            };
            let mut cfg = load_config(base, cfg_file)?;
            if let Some(l) = lambda {
                cfg.lambda = l;
            }
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            let frames = io::read_records(&input, cfg.hist_bins)?;
            let started = Instant::now();
            let states = track_stream(&frames, None, &cfg)?;
            throughput(states.len(), started);
            write_outputs(&out, overlay.as_deref(), &states)?;
        }
        Command::Train { input, dreg, eps, max_rounds, stride, out_model } => {
            let mut cfg = load_config(Config::default(), cfg_file)?;
            if let Some(d) = dreg {
                cfg.dreg = d;
            }
            if let Some(e) = eps {
                cfg.eps_cp = e;
            }
            if let Some(r) = max_rounds {
                cfg.max_rounds = r;
            }
            let videos = input.iter().map(|p| io::read_detections(p, cfg.hist_bins)).collect::<Result<Vec<_>, _>>()?;
            let opts = FitOptions { stride, ..FitOptions::from_config(&cfg) };
            let started = Instant::now();
            let (model, report) = engine::fit(&videos, &cfg, &opts)?;
            eprintln!(
                "trained in {:.3} s: {} rounds, slack {:.3e}",
                started.elapsed().as_secs_f64(),
                report.rounds,
                report.xi
            );
            io::write_model(
                &out_model,
                &ModelFile {
                    spaces: LabelSpaces::default(),
                    config: cfg,
                    weights: model.weights,
                    action: model.action,
                },
            )?;
        }
        Command::Infer { input, model, out, lambda, overlay } => {
            let file = load_model(&model)?;
            let mut cfg = load_config(file.config.clone(), cfg_file)?;
            if let Some(l) = lambda {
                cfg.lambda = l;
            }
            if cfg.hist_bins != file.config.hist_bins {
                return Err(Error::Dimension(format!(
                    "model was trained with {} histogram bins, configuration uses {}",
                    file.config.hist_bins, cfg.hist_bins
                ))
                .into());
            }
            let am = file.activity_model();
            let frames = io::read_records(&input, cfg.hist_bins)?;
            let structured = !frames.is_empty() && frames.iter().all(|f| f.records.iter().all(|r| r.pred.is_some()));
            let started = Instant::now();
            let states = if structured {
                infer_with_structure(&frames, &am, &cfg)?
            } else {
                track_stream(&frames, Some(&am), &cfg)?
            };
            throughput(states.len(), started);
            write_outputs(&out, overlay.as_deref(), &states)?;
        }
        Command::Eval { pred, gt, report } => {
            let cfg = load_config(Config::default(), cfg_file)?;
            let p = io::read_records(&pred, cfg.hist_bins)?;
            let g = gt.as_deref().map(|path| io::read_records(path, cfg.hist_bins)).transpose()?;
            let records = eval_records(&p, g.as_deref(), &pred)?;
            let rep = eval::evaluate(&records)?;
            eprintln!(
                "collective {:.3}, group {:.3}, atomic {:.3}, id switches {}",
                rep.activity.collective.overall,
                rep.activity.group.overall,
                rep.activity.atomic.overall,
                rep.tracking.switches
            );
            io::write_report(&report, &rep)?;
        }
    }
    Ok(())
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
