//! Study configuration, validation and execution behind the `wptlab` binary.
//!
//! A config is a JSON object with a `study` name, an optional `seed`,
//! `output` directory, `solver` and `model` blocks, and one parameter block
//! named after the study.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::{self, Fading};
use crate::channel::{self, ChannelJson, ChannelResponse, MultipathProfile, PathPhases, ToneGrid};
use crate::combining;
use crate::error::WptError;
use crate::hpa::HpaModel;
use crate::irs;
use crate::learning::{self, EhSurrogate, Harvester, ModulationConfig};
use crate::mec::{self, MecScenario};
use crate::numerics::SolverConfig;
use crate::rate_energy::{self, GaussianClass, ReFamily, ReceiverKind};
use crate::rectenna::{EhTaylorModel, MomentConvention};
use crate::sensing::{self, SensingScenario};
use crate::signal::InputDistribution;
use crate::waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Waveform,
    Irs,
    Combining,
    ReRegion,
    Modulation,
    Mec,
    Sensing,
    Diversity,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Waveform => "waveform",
            StudyKind::Irs => "irs",
            StudyKind::Combining => "combining",
            StudyKind::ReRegion => "re_region",
            StudyKind::Modulation => "modulation",
            StudyKind::Mec => "mec",
            StudyKind::Sensing => "sensing",
            StudyKind::Diversity => "diversity",
        }
    }
}

/// How the waveform study builds its channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    /// i.i.d. CN(0,1) per tone and antenna.
    Rayleigh,
    /// Tapped delay line with one random phase per path.
    Multipath { paths: usize, max_delay: f64 },
    /// Explicit per-tone matrices; the grid comes from the channel.
    Explicit { channel: ChannelJson },
}

fn one() -> usize {
    1
}

fn default_delta_f() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformStudy {
    pub n_tones: usize,
    #[serde(default = "default_delta_f")]
    pub delta_f: f64,
    /// Transmit power in watts.
    pub power: f64,
    #[serde(default)]
    pub path_loss_db: f64,
    #[serde(default = "one")]
    pub antennas: usize,
    pub channel: ChannelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsStudy {
    pub l: usize,
    pub group_sizes: Vec<usize>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombiningStudy {
    pub antennas: usize,
    pub rx_antennas: Vec<usize>,
    pub trials: usize,
    pub power: f64,
    #[serde(default)]
    pub path_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverBlock {
    pub points: usize,
    pub info: InputDistribution,
    pub energy: InputDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MulticarrierBlock {
    pub n_tones: usize,
    #[serde(default = "default_delta_f")]
    pub delta_f: f64,
    pub targets: usize,
    #[serde(default)]
    pub class: GaussianClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReRegionStudy {
    pub noise_var: f64,
    /// Channel amplitude `|h|`.
    #[serde(default = "unit_gain")]
    pub gain: f64,
    #[serde(default)]
    pub families: Vec<ReFamily>,
    #[serde(default)]
    pub receivers: Option<ReceiverBlock>,
    #[serde(default)]
    pub multicarrier: Option<MulticarrierBlock>,
    /// Transmit power for the multi-carrier block.
    #[serde(default)]
    pub power: Option<f64>,
}

fn unit_gain() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateBlock {
    pub samples: usize,
    pub epochs: usize,
    pub lr: f64,
    pub p_in_min: f64,
    pub p_in_max: f64,
}

fn default_batch() -> usize {
    256
}

fn default_iters() -> usize {
    3000
}

fn default_lr() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationStudy {
    pub s: usize,
    pub power: f64,
    pub noise_var: f64,
    pub lambdas: Vec<f64>,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub hpa: Option<HpaModel>,
    #[serde(default)]
    pub surrogate: Option<SurrogateBlock>,
}

/// Random scenarios around `template`, with `p_dc` and `gain` log-uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MecBatch {
    pub count: usize,
    pub template: MecScenario,
    pub p_dc_range: [f64; 2],
    pub gain_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MecStudy {
    #[serde(default)]
    pub scenarios: Vec<MecScenario>,
    #[serde(default)]
    pub batch: Option<MecBatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingStudy {
    pub scenario: SensingScenario,
    #[serde(default)]
    pub optimize_compression: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiversityStudy {
    pub antennas: usize,
    pub fading_trials: usize,
    pub phase_slots: usize,
    pub power: f64,
    #[serde(default)]
    pub fading: Fading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub model: EhTaylorModel,
    #[serde(default)]
    pub waveform: Option<WaveformStudy>,
    #[serde(default)]
    pub irs: Option<IrsStudy>,
    #[serde(default)]
    pub combining: Option<CombiningStudy>,
    #[serde(default)]
    pub re_region: Option<ReRegionStudy>,
    #[serde(default)]
    pub modulation: Option<ModulationStudy>,
    #[serde(default)]
    pub mec: Option<MecStudy>,
    #[serde(default)]
    pub sensing: Option<SensingStudy>,
    #[serde(default)]
    pub diversity: Option<DiversityStudy>,
}

/// A config problem anchored to a position in the JSON text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

/// Failure of a `run`, mapped to the process exit code by [`RunError::exit_code`].
#[derive(Debug)]
pub enum RunError {
    Config(Vec<ConfigError>),
    Solver { study: &'static str, source: WptError },
    Output(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver { .. } => 3,
            RunError::Output(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(errs) => {
                let lines: Vec<String> = errs.iter().map(|e| format!("config error at {e}")).collect();
                write!(f, "{}", lines.join("\n"))
            }
            RunError::Solver { study, source } => write!(f, "study `{study}` failed: {source}"),
            RunError::Output(m) => write!(f, "cannot write results: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Position of the `nth` occurrence of `"key"` in `text`, 1-based.
fn locate(text: &str, key: &str, nth: usize) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    if let Some((idx, _)) = text.match_indices(&needle).nth(nth) {
        let before = &text[..idx];
        let line = before.matches('\n').count() + 1;
        let column = idx - before.rfind('\n').map_or(0, |i| i + 1) + 1;
        return (line, column);
    }
    (1, 1)
}

fn at(text: &str, key: &str, nth: usize, message: String) -> ConfigError {
    let (line, column) = locate(text, key, nth);
    ConfigError { message, line, column }
}

fn from_param(text: &str, path: &str, nth: usize, e: WptError) -> ConfigError {
    let key = match &e {
        WptError::InvalidParameter { field, .. } => field.rsplit('.').next().unwrap_or(field).split('[').next().unwrap_or(field).to_string(),
        _ => path.rsplit('.').next().unwrap_or(path).to_string(),
    };
    let field = match &e {
        WptError::InvalidParameter { field, .. } => format!("{path}.{field}"),
        _ => path.to_string(),
    };
    at(text, &key, nth, format!("invariant violated at `{field}`: {e}"))
}

fn positive(text: &str, errs: &mut Vec<ConfigError>, path: &str, key: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errs.push(at(text, key, 0, format!("`{path}.{key}` must be positive and finite, got {v}")));
    }
}

fn at_least(text: &str, errs: &mut Vec<ConfigError>, path: &str, key: &str, v: usize, min: usize) {
    if v < min {
        errs.push(at(text, key, 0, format!("`{path}.{key}` must be >= {min}, got {v}")));
    }
}

/// Parse and check a config without running it. Returns every diagnostic found.
pub fn parse_config(text: &str) -> std::result::Result<StudyConfig, Vec<ConfigError>> {
    let cfg: StudyConfig = serde_json::from_str(text).map_err(|e| vec![ConfigError { message: e.to_string(), line: e.line(), column: e.column() }])?;
    let errs = check(&cfg, text);
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(errs)
    }
}

fn missing_block(text: &str, name: &str) -> ConfigError {
    at(text, "study", 0, format!("missing field `{name}`: study \"{name}\" needs a `{name}` parameter block"))
}

fn check(cfg: &StudyConfig, text: &str) -> Vec<ConfigError> {
    let mut errs = Vec::new();
    if let Err(e) = cfg.solver.validate() {
        errs.push(from_param(text, "solver", 0, e));
    }
    if let Err(e) = cfg.model.validate() {
        errs.push(from_param(text, "model", 0, e));
    }
    let name = cfg.study.name();
    match cfg.study {
        StudyKind::Waveform => match &cfg.waveform {
            None => errs.push(missing_block(text, name)),
            Some(w) => {
                at_least(text, &mut errs, name, "n_tones", w.n_tones, 1);
                at_least(text, &mut errs, name, "antennas", w.antennas, 1);
                positive(text, &mut errs, name, "power", w.power);
                positive(text, &mut errs, name, "delta_f", w.delta_f);
                if let ChannelSpec::Multipath { paths, max_delay } = w.channel {
                    at_least(text, &mut errs, name, "paths", paths, 1);
                    if !(max_delay >= 0.0) || max_delay >= 1.0 / w.delta_f {
                        errs.push(at(text, "max_delay", 0, format!("`waveform.channel.max_delay` must lie in [0, 1/delta_f), got {max_delay}")));
                    }
                }
                if let ChannelSpec::Explicit { channel } = &w.channel {
                    if let Err(e) = ChannelResponse::from_json(channel) {
                        errs.push(at(text, "channel", 0, format!("invariant violated at `waveform.channel`: {e}")));
                    }
                }
            }
        },
        StudyKind::Irs => match &cfg.irs {
            None => errs.push(missing_block(text, name)),
            Some(s) => {
                at_least(text, &mut errs, name, "l", s.l, 1);
                at_least(text, &mut errs, name, "trials", s.trials, 1);
                for &g in &s.group_sizes {
                    if g == 0 || s.l % g != 0 {
                        errs.push(at(text, "group_sizes", 0, format!("invariant violated at `irs.group_sizes`: L = {} is not divisible by {g}", s.l)));
                    }
                }
            }
        },
        StudyKind::Combining => match &cfg.combining {
            None => errs.push(missing_block(text, name)),
            Some(s) => {
                at_least(text, &mut errs, name, "antennas", s.antennas, 1);
                at_least(text, &mut errs, name, "trials", s.trials, 1);
                positive(text, &mut errs, name, "power", s.power);
                if s.rx_antennas.is_empty() || s.rx_antennas.contains(&0) {
                    errs.push(at(text, "rx_antennas", 0, "`combining.rx_antennas` must be a non-empty list of counts >= 1".into()));
                }
            }
        },
        StudyKind::ReRegion => match &cfg.re_region {
            None => errs.push(missing_block(text, name)),
            Some(s) => {
                positive(text, &mut errs, name, "noise_var", s.noise_var);
                positive(text, &mut errs, name, "gain", s.gain);
                for (i, f) in s.families.iter().enumerate() {
                    if let Err(e) = f.members().and_then(|m| m.iter().try_for_each(|d| d.validate())) {
                        errs.push(at(text, "families", 0, format!("invariant violated at `re_region.families[{i}]`: {e}")));
                    }
                }
                if let Some(r) = &s.receivers {
                    at_least(text, &mut errs, "re_region.receivers", "points", r.points, 2);
                    for (key, d) in [("info", &r.info), ("energy", &r.energy)] {
                        if let Err(e) = d.validate() {
                            errs.push(at(text, key, 0, format!("invariant violated at `re_region.receivers.{key}`: {e}")));
                        }
                    }
                }
                if let Some(m) = &s.multicarrier {
                    at_least(text, &mut errs, "re_region.multicarrier", "n_tones", m.n_tones, 2);
                    at_least(text, &mut errs, "re_region.multicarrier", "targets", m.targets, 2);
                    match s.power {
                        Some(p) => positive(text, &mut errs, name, "power", p),
                        None => errs.push(at(text, "multicarrier", 0, "missing field `power`: `re_region.multicarrier` needs `re_region.power`".into())),
                    }
                }
                if s.families.is_empty() && s.receivers.is_none() && s.multicarrier.is_none() {
                    errs.push(at(text, "re_region", 0, "`re_region` needs at least one of `families`, `receivers`, `multicarrier`".into()));
                }
            }
        },
        StudyKind::Modulation => match &cfg.modulation {
            None => errs.push(missing_block(text, name)),
            Some(m) => {
                if m.lambdas.is_empty() {
                    errs.push(at(text, "lambdas", 0, "`modulation.lambdas` must be non-empty".into()));
                }
                for l in &m.lambdas {
                    if let Err(e) = modulation_config(m, *l, 0).validate() {
                        errs.push(from_param(text, "modulation", 0, e));
                        break;
                    }
                }
                if let Some(s) = &m.surrogate {
                    at_least(text, &mut errs, "modulation.surrogate", "samples", s.samples, 10);
                    positive(text, &mut errs, "modulation.surrogate", "p_in_min", s.p_in_min);
                    if !(s.p_in_max > s.p_in_min) {
                        errs.push(at(text, "p_in_max", 0, "`modulation.surrogate.p_in_max` must exceed `p_in_min`".into()));
                    }
                }
            }
        },
        StudyKind::Mec => match &cfg.mec {
            None => errs.push(missing_block(text, name)),
            Some(m) => {
                for (i, sc) in m.scenarios.iter().enumerate() {
                    if let Err(e) = sc.validate() {
                        errs.push(from_param(text, &format!("mec.scenarios[{i}]"), i, e));
                    }
                }
                if let Some(b) = &m.batch {
                    if let Err(e) = b.template.validate() {
                        let nth = m.scenarios.len();
                        errs.push(from_param(text, "mec.batch.template", nth, e));
                    }
                    for (key, r) in [("p_dc_range", b.p_dc_range), ("gain_range", b.gain_range)] {
                        if !(r[0] > 0.0 && r[1] >= r[0]) {
                            errs.push(at(text, key, 0, format!("`mec.batch.{key}` must satisfy 0 < lo <= hi")));
                        }
                    }
                }
                if m.scenarios.is_empty() && m.batch.is_none() {
                    errs.push(at(text, "mec", 0, "`mec` needs `scenarios` or `batch`".into()));
                }
            }
        },
        StudyKind::Sensing => match &cfg.sensing {
            None => errs.push(missing_block(text, name)),
            Some(s) => {
                if let Err(e) = s.scenario.validate() {
                    let nth = match &e {
                        WptError::InvalidParameter { field, .. } => field.split_once('[').and_then(|(_, r)| r.split(']').next()?.parse().ok()).unwrap_or(0),
                        _ => 0,
                    };
                    errs.push(from_param(text, "sensing.scenario", nth, e));
                }
            }
        },
        StudyKind::Diversity => match &cfg.diversity {
            None => errs.push(missing_block(text, name)),
            Some(d) => {
                at_least(text, &mut errs, name, "antennas", d.antennas, 2);
                at_least(text, &mut errs, name, "fading_trials", d.fading_trials, 1);
                at_least(text, &mut errs, name, "phase_slots", d.phase_slots, 1);
                positive(text, &mut errs, name, "power", d.power);
            }
        },
    }
    errs
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

/// What a successful run wrote.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub study: &'static str,
    pub out_dir: PathBuf,
    pub outputs: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    study: &'static str,
    seed: u64,
    config: &'a serde_json::Value,
    versions: serde_json::Value,
    outputs: &'a [String],
    threads: usize,
    wall_time_s: f64,
}

struct Sink {
    dir: PathBuf,
    written: Vec<String>,
}

impl Sink {
    fn create(&mut self, name: &str) -> std::result::Result<BufWriter<File>, RunError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(f))
    }
}

fn solver(study: &'static str) -> impl Fn(WptError) -> RunError {
    move |source| RunError::Solver { study, source }
}

fn output(e: WptError) -> RunError {
    RunError::Output(e.to_string())
}

/// Read, check and validate a config file, returning `"ok"` or diagnostics.
pub fn validate_path(path: &Path) -> std::result::Result<StudyConfig, Vec<ConfigError>> {
    let text = fs::read_to_string(path).map_err(|e| vec![ConfigError { message: format!("cannot read {}: {e}", path.display()), line: 0, column: 0 }])?;
    parse_config(&text)
}

/// Run the study described by the config at `path`.
pub fn run_path(path: &Path, opts: &RunOptions) -> std::result::Result<RunSummary, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Config(vec![ConfigError { message: format!("cannot read {}: {e}", path.display()), line: 0, column: 0 }]))?;
    run_text(&text, opts)
}

/// Run the study described by `text` inside a pool of `opts.jobs` threads.
pub fn run_text(text: &str, opts: &RunOptions) -> std::result::Result<RunSummary, RunError> {
    let mut cfg = parse_config(text).map_err(RunError::Config)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    cfg.solver.seed = cfg.seed;
    let dir = opts.out_dir.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("wptlab-out"));
    fs::create_dir_all(&dir).map_err(|e| RunError::Output(format!("{}: {e}", dir.display())))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| RunError::Output(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let start = Instant::now();
    let mut sink = Sink { dir: dir.clone(), written: Vec::new() };
    pool.install(|| execute(&cfg, &mut sink))?;
    let wall = start.elapsed().as_secs_f64();
    let echo = serde_json::to_value(&cfg).map_err(|e| RunError::Output(e.to_string()))?;
    let outputs = sink.written.clone();
    let manifest = Manifest {
        study: cfg.study.name(),
        seed: cfg.seed,
        config: &echo,
        versions: serde_json::json!({ "wptlab": env!("CARGO_PKG_VERSION") }),
        outputs: &outputs,
        threads,
        wall_time_s: wall,
    };
    let f = sink.create("manifest.json")?;
    serde_json::to_writer_pretty(f, &manifest).map_err(|e| RunError::Output(e.to_string()))?;
    log::info!("{} finished in {wall:.3} s, outputs in {}", cfg.study.name(), dir.display());
    Ok(RunSummary { study: cfg.study.name(), out_dir: dir, outputs: sink.written })
}

fn execute(cfg: &StudyConfig, sink: &mut Sink) -> std::result::Result<(), RunError> {
    match cfg.study {
        StudyKind::Waveform => run_waveform(cfg, cfg.waveform.as_ref().expect("checked"), sink),
        StudyKind::Irs => run_irs(cfg, cfg.irs.as_ref().expect("checked"), sink),
        StudyKind::Combining => run_combining(cfg, cfg.combining.as_ref().expect("checked"), sink),
        StudyKind::ReRegion => run_re_region(cfg, cfg.re_region.as_ref().expect("checked"), sink),
        StudyKind::Modulation => run_modulation(cfg, cfg.modulation.as_ref().expect("checked"), sink),
        StudyKind::Mec => run_mec(cfg, cfg.mec.as_ref().expect("checked"), sink),
        StudyKind::Sensing => run_sensing(cfg, cfg.sensing.as_ref().expect("checked"), sink),
        StudyKind::Diversity => run_diversity(cfg, cfg.diversity.as_ref().expect("checked"), sink),
    }
}

fn attenuation(db: f64) -> Complex64 {
    Complex64::new(10f64.powf(-db / 20.0), 0.0)
}

fn waveform_channel(cfg: &StudyConfig, w: &WaveformStudy) -> crate::Result<ChannelResponse> {
    let grid = ToneGrid::with_tones(w.n_tones, w.delta_f);
    let ch = match &w.channel {
        ChannelSpec::Rayleigh => channel::rayleigh_iid(w.antennas, 1, &grid, cfg.seed)?,
        ChannelSpec::Multipath { paths, max_delay } => {
            let mut profile = MultipathProfile::random(*paths, *max_delay, 1, 1, 1, cfg.seed);
            if let PathPhases::Full(p) = &profile.phases {
                profile.phases = PathPhases::PerPath(p[..*paths].to_vec());
            }
            let one = channel::response_from_multipath(&profile, &grid, 1, 1)?;
            if w.antennas == 1 {
                one
            } else {
                let mut per_antenna = Vec::with_capacity(w.antennas);
                for m in 0..w.antennas {
                    let mut p = MultipathProfile::random(*paths, *max_delay, 1, 1, 1, cfg.seed.wrapping_add(m as u64));
                    if let PathPhases::Full(ph) = &p.phases {
                        p.phases = PathPhases::PerPath(ph[..*paths].to_vec());
                    }
                    per_antenna.push(channel::response_from_multipath(&p, &grid, 1, 1)?.siso_gains()?);
                }
                let rows: Vec<Vec<Complex64>> = (0..w.n_tones).map(|n| per_antenna.iter().map(|g| g[n]).collect()).collect();
                ChannelResponse::new(grid, rows.into_iter().map(|r| nalgebra::DMatrix::from_row_slice(1, w.antennas, &r)).collect())?
            }
        }
        ChannelSpec::Explicit { channel } => ChannelResponse::from_json(channel)?,
    };
    Ok(ch.scaled(attenuation(w.path_loss_db)))
}

fn run_waveform(cfg: &StudyConfig, w: &WaveformStudy, sink: &mut Sink) -> std::result::Result<(), RunError> {
    let err = solver("waveform");
    let model = &cfg.model;
    let ch = waveform_channel(cfg, w).map_err(&err)?;
    let (spec, strategies) = if ch.n_tx() == 1 {
        let cmp = waveform::compare_strategies(&ch, model, w.power, &cfg.solver).map_err(&err)?;
        let spec = waveform::optimize_allocation(&ch, model, w.power, &cfg.solver).map_err(&err)?;
        let rows = vec![
            ("uniform", cmp.uniform),
            ("smf_beta1", cmp.smf1),
            ("smf_beta3", cmp.smf3),
            ("single_tone", cmp.single_tone),
            ("optimized", cmp.optimized),
        ];
        (spec, rows)
    } else {
        let spec = beamforming::joint_bf_waveform(&ch, model, w.power, &cfg.solver).map_err(&err)?;
        let v = crate::rectenna::harvest(model, &spec.received(&ch, 0).map_err(&err)?).map_err(&err)?.v_out;
        (spec, vec![("joint_bf_waveform", v)])
    };
    let mut wr = csv::Writer::from_writer(sink.create("waveform_tones.csv")?);
    wr.write_record(["tone", "frequency_hz", "channel_gain", "amplitude_sq_watts", "phase_rad"]).map_err(|e| output(e.into()))?;
    for n in 0..ch.n_tones() {
        let gain: f64 = ch.row(n, 0).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let amp2: f64 = spec.x.iter().map(|row| row[n].norm_sqr()).sum();
        wr.write_record([n.to_string(), ch.grid.frequency(n).to_string(), gain.to_string(), amp2.to_string(), spec.x[0][n].arg().to_string()])
            .map_err(|e| output(e.into()))?;
    }
    wr.flush().map_err(|e| output(e.into()))?;
    let mut wr = csv::Writer::from_writer(sink.create("waveform_strategies.csv")?);
    wr.write_record(["strategy", "v_out_volts", "p_dc_watts"]).map_err(|e| output(e.into()))?;
    for (name, v) in strategies {
        wr.write_record([name.to_string(), v.to_string(), model.p_dc(v).to_string()]).map_err(|e| output(e.into()))?;
    }
    wr.flush().map_err(|e| output(e.into()))?;
    Ok(())
}

fn run_irs(cfg: &StudyConfig, s: &IrsStudy, sink: &mut Sink) -> std::result::Result<(), RunError> {
    let study = irs::gain_study(s.l, &s.group_sizes, s.trials, cfg.seed).map_err(solver("irs"))?;
    let mut wr = csv::Writer::from_writer(sink.create("irs_gains.csv")?);
    wr.write_record(["l", "group_size", "trials", "gain_over_single_ratio"]).map_err(|e| output(e.into()))?;
    for (g, v) in study.group_sizes.iter().zip(&study.gains) {
        wr.write_record([s.l.to_string(), g.to_string(), s.trials.to_string(), v.to_string()]).map_err(|e| output(e.into()))?;
    }
    wr.flush().map_err(|e| output(e.into()))?;
    Ok(())
}

fn run_combining(cfg: &StudyConfig, s: &CombiningStudy, sink: &mut Sink) -> std::result::Result<(), RunError> {
    let err = solver("combining");
    let model = cfg.model;
    let grid = ToneGrid::with_tones(1, 1e6);
    let jobs: Vec<(usize, usize)> = s.rx_antennas.iter().flat_map(|&q| (0..s.trials).map(move |t| (q, t))).collect();
    let rows: Vec<crate::Result<[f64; 3]>> = jobs
        .par_iter()
        .map(|&(q, t)| {
            let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add((q as u64) << 32 | t as u64);
            let ch = channel::rayleigh_iid(s.antennas, q, &grid, seed)?.scaled(attenuation(s.path_loss_db));
            let (_, dc) = combining::optimize_dc_combining(&model, &ch, s.power, &cfg.solver)?;
            let rf = combining::optimize_rf_combining(&model, &ch, s.power, &cfg.solver)?;
            let (_, _, un) = combining::unconstrained_rf_combining(&model, &ch, s.power)?;
            let z = |p_rf: f64| combining::rf_combining_p_dc(&model, p_rf.sqrt(), MomentConvention::Zeta);
            Ok([dc.p_dc, z(rf.report.p_rf), z(un.p_rf)])
        })
        .collect();
    let mut wr = csv::Writer::from_writer(sink.create("combining.csv")?);
    wr.write_record(["rx_antennas", "trial", "p_dc_dc_combining_watts", "p_dc_rf_combining_watts", "p_dc_rf_unconstrained_watts"])
        .map_err(|e| output(e.into()))?;
    for ((q, t), r) in jobs.iter().zip(rows) {
        let r = r.map_err(&err)?;
        wr.write_record([q.to_string(), t.to_string(), r[0].to_string(), r[1].to_string(), r[2].to_string()]).map_err(|e| output(e.into()))?;
    }
    wr.flush().map_err(|e| output(e.into()))?;
    Ok(())
}

fn run_re_region(cfg: &StudyConfig, s: &ReRegionStudy, sink: &mut Sink) -> std::result::Result<(), RunError> {
    let err = solver("re_region");
    let model = &cfg.model;
    let h = Complex64::new(s.gain, 0.0);
    let mut points = Vec::new();
    for f in &s.families {
        points.extend(rate_energy::re_sweep_ideal(model, f, h, s.noise_var).map_err(&err)?);
    }
    if let Some(r) = &s.receivers {
        for kind in [ReceiverKind::Ts, ReceiverKind::Ps] {
            points.extend(rate_energy::re_sweep_receiver(model, &r.info, &r.energy, h, s.noise_var, kind, r.points).map_err(&err)?);
        }
    }
    if !points.is_empty() {
        rate_energy::write_frontier_csv(sink.create("re_points.csv")?, &points).map_err(output)?;
        let ideal: Vec<_> = points.iter().filter(|p| matches!(p.receiver, rate_energy::Receiver::Ideal)).cloned().collect();
        if !ideal.is_empty() {
            rate_energy::write_frontier_csv(sink.create("re_frontier.csv")?, &rate_energy::pareto_frontier(&ideal)).map_err(output)?;
        }
    }
    if let Some(m) = &s.multicarrier {
        let p = s.power.expect("checked");
        let grid = ToneGrid::with_tones(m.n_tones, m.delta_f);
        let ch = channel::rayleigh_iid(1, 1, &grid, cfg.seed).map_err(&err)?.scaled(h);
        let e_max = rate_energy::multicarrier_max_energy(model, &ch, p, &cfg.solver).map_err(&err)?;
        let targets: Vec<f64> = (0..m.targets).map(|k| e_max * k as f64 / (m.targets - 1) as f64).collect();
        let mc = rate_energy::re_multicarrier_gaussian(model, &ch, s.noise_var, p, &targets, m.class, &cfg.solver).map_err(&err)?;
        rate_energy::write_multicarrier_csv(sink.create("re_multicarrier.csv")?, &mc).map_err(output)?;
    }
    Ok(())
}

fn modulation_config(m: &ModulationStudy, lambda: f64, seed: u64) -> ModulationConfig {
    ModulationConfig {
        s: m.s,
        power: m.power,
        noise_var: m.noise_var,
        lambda,
        batch: m.batch,
        iters: m.iters,
        lr: m.lr,
        seed,
        hpa: m.hpa,
    }
}

fn run_modulation(cfg: &StudyConfig, m: &ModulationStudy, sink: &mut Sink) -> std::result::Result<(), RunError> {
    let err = solver("modulation");
    let harvester = match &m.surrogate {
        None => Harvester::Taylor(cfg.model),
        Some(s) => {
            let data = learning::taylor_training_data(&cfg.model, s.samples, s.p_in_min, s.p_in_max, cfg.seed);
            learning::write_samples_csv(sink.create("surrogate_samples.csv")?, &data).map_err(output)?;
            let net: EhSurrogate = learning::fit_eh_surrogate(&data, s.epochs, s.lr, cfg.seed).map_err(&err)?;
            Harvester::Surrogate(net)
        }
    };
    let runs: Vec<crate::Result<learning::LearnedConstellation>> =
        m.lambdas.par_iter().map(|&l| learning::train_modulation(&harvester, &modulation_config(m, l, cfg.seed))).collect();
    let mut summary = csv::Writer::from_writer(sink.create("modulation_summary.csv")?);
    summary.write_record(["run", "lambda_watts", "rate_bits", "p_dc_watts", "symbol_error_rate"]).map_err(|e| output(e.into()))?;
    let mut trace = csv::Writer::from_writer(sink.create("modulation_trace.csv")?);
    trace.write_record(["run", "iteration", "loss"]).map_err(|e| output(e.into()))?;
    for (i, r) in runs.into_iter().enumerate() {
        let c = r.map_err(&err)?;
        let ser = learning::symbol_error_rate(&c.transmitted, c.noise_var, 100_000, cfg.seed);
        summary
            .write_record([i.to_string(), c.lambda.to_string(), c.rate.to_string(), c.p_dc.to_string(), ser.to_string()])
            .map_err(|e| output(e.into()))?;
        for (k, l) in c.trace.iter().enumerate() {
            trace.write_record([i.to_string(), k.to_string(), l.to_string()]).map_err(|e| output(e.into()))?;
        }
        learning::write_constellation_csv(sink.create(&format!("constellation_{i}.csv"))?, &c.points).map_err(output)?;
    }
    summary.flush().map_err(|e| output(e.into()))?;
    trace.flush().map_err(|e| output(e.into()))?;
    Ok(())
}

/// Scenarios of a MEC study: the explicit list followed by the random batch.
pub fn mec_scenarios(m: &MecStudy, seed: u64) -> Vec<MecScenario> {
    use rand::Rng;
    let mut out = m.scenarios.clone();
    if let Some(b) = &m.batch {
        let mut rng = SolverConfig::with_seed(seed).rng(11);
        let log_uniform = |rng: &mut rand_chacha::ChaCha8Rng, r: [f64; 2]| (r[0].ln() + rng.gen::<f64>() * (r[1].ln() - r[0].ln())).exp();
        for _ in 0..b.count {
            let mut sc = b.template.clone();
            sc.p_dc = log_uniform(&mut rng, b.p_dc_range);
            sc.gain = log_uniform(&mut rng, b.gain_range);
            out.push(sc);
        }
    }
    out
}

fn run_mec(cfg: &StudyConfig, m: &MecStudy, sink: &mut Sink) -> std::result::Result<(), RunError> {
    let scenarios = mec_scenarios(m, cfg.seed);
    let policies: Vec<crate::Result<mec::MecPolicy>> = scenarios.par_iter().map(|sc| mec::select_mode(sc, &cfg.solver)).collect();
    let policies: Vec<mec::MecPolicy> = policies.into_iter().collect::<crate::Result<_>>().map_err(solver("mec"))?;
    mec::write_policies_csv(sink.create("mec_policies.csv")?, &policies).map_err(output)?;
    Ok(())
}

fn run_sensing(cfg: &StudyConfig, s: &SensingStudy, sink: &mut Sink) -> std::result::Result<(), RunError> {
    let err = solver("sensing");
    let policy = if s.optimize_compression {
        sensing::optimize_with_compression(&s.scenario, &cfg.solver).map_err(&err)?.1
    } else {
        sensing::optimize(&s.scenario, &cfg.solver).map_err(&err)?
    };
    sensing::write_policy_csv(sink.create("sensing_policy.csv")?, &policy).map_err(output)?;
    Ok(())
}

fn run_diversity(cfg: &StudyConfig, d: &DiversityStudy, sink: &mut Sink) -> std::result::Result<(), RunError> {
    let r = beamforming::transmit_diversity_eval(&cfg.model, d.antennas, d.fading_trials, d.phase_slots, d.power, cfg.seed, d.fading)
        .map_err(solver("diversity"))?;
    let mut wr = csv::Writer::from_writer(sink.create("diversity_trials.csv")?);
    wr.write_record(["trial", "m2_td_watts", "m2_single_watts", "v_out_td_volts", "v_out_single_volts"]).map_err(|e| output(e.into()))?;
    for t in 0..r.v_td.len() {
        wr.write_record([t.to_string(), r.m2_td[t].to_string(), r.m2_single[t].to_string(), r.v_td[t].to_string(), r.v_single[t].to_string()])
            .map_err(|e| output(e.into()))?;
    }
    wr.flush().map_err(|e| output(e.into()))?;
    let mut wr = csv::Writer::from_writer(sink.create("diversity_summary.csv")?);
    wr.write_record(["mean_v_out_td_volts", "mean_v_out_single_volts", "mean_p_dc_td_watts", "mean_p_dc_single_watts"]).map_err(|e| output(e.into()))?;
    wr.write_record([r.mean_v_out_td.to_string(), r.mean_v_out_single.to_string(), r.mean_p_dc_td.to_string(), r.mean_p_dc_single.to_string()])
        .map_err(|e| output(e.into()))?;
    wr.flush().map_err(|e| output(e.into()))?;
    Ok(())
}
