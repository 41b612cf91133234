//! Run configuration: a strict `key = value` file format with `#` comments.
//!
//! Unknown keys, malformed values, and out-of-range settings are rejected
//! with the offending key and line number. Every field of the model
//! (periphery, binaural stage, staircase) can be overridden; omitted keys
//! keep the model defaults. The resolved configuration is echoed into every
//! run manifest in the same format, so a manifest can be replayed as a
//! config file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ipdsim::binaural::BinauralParams;
use ipdsim::observer::StaircaseConfig;
use ipdsim::periphery::PeripheryParams;
use ipdsim::stimgen::InterauralMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Fig3,
    Correlation,
    GroupDelay,
    Trahiotis,
    Coherence,
    StaircaseDemo,
    StimulusExport,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::Correlation => "correlation",
            ExperimentKind::GroupDelay => "group_delay",
            ExperimentKind::Trahiotis => "trahiotis",
            ExperimentKind::Coherence => "coherence",
            ExperimentKind::StaircaseDemo => "staircase_demo",
            ExperimentKind::StimulusExport => "stimulus_export",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig3" => Ok(ExperimentKind::Fig3),
            "correlation" => Ok(ExperimentKind::Correlation),
            "group_delay" => Ok(ExperimentKind::GroupDelay),
            "trahiotis" => Ok(ExperimentKind::Trahiotis),
            "coherence" => Ok(ExperimentKind::Coherence),
            "staircase_demo" => Ok(ExperimentKind::StaircaseDemo),
            "stimulus_export" => Ok(ExperimentKind::StimulusExport),
            other => Err(format!(
                "unknown experiment {:?} (expected fig3, correlation, group_delay, \
                 trahiotis, coherence, staircase_demo, or stimulus_export)",
                other
            )),
        }
    }
}

/// Error in a configuration file, carrying the line it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {}: {}", line, self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err_at(line: usize, message: String) -> ConfigError {
    ConfigError {
        line: Some(line),
        message,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Delayed,
    Uncorrelated,
    Correlated,
}

/// Fully resolved run configuration. Field defaults are the model defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    pub n_runs: usize,
    pub master_seed: u64,
    pub periphery: PeripheryParams,
    pub binaural: BinauralParams,
    pub staircase: StaircaseConfig,
    /// Masker bandwidth for the single-condition experiments
    /// (correlation, group_delay, coherence detail, demo, export).
    pub bandwidth_hz: f64,
    pub mode: ModeKind,
    pub delay_ms: f64,
    pub rho: f64,
    pub group_delay_ms: f64,
    pub tone_level_db: f64,
    pub trials_per_point: usize,
    pub rho_grid: Vec<f64>,
    pub reference_csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            output_dir: PathBuf::from("out"),
            n_runs: 100,
            master_seed: 1,
            periphery: PeripheryParams::default(),
            binaural: BinauralParams::default(),
            staircase: StaircaseConfig::default(),
            bandwidth_hz: 1000.0,
            mode: ModeKind::Delayed,
            delay_ms: 0.0,
            rho: 1.0,
            group_delay_ms: 0.0,
            tone_level_db: 65.0,
            trials_per_point: 2000,
            rho_grid: vec![0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99, 1.0],
            reference_csv: None,
        }
    }

    /// The interaural mode selected by `mode` and its detail keys.
    pub fn interaural_mode(&self) -> InterauralMode {
        match self.mode {
            ModeKind::Delayed => InterauralMode::Delayed {
                delay_s: self.delay_ms * 1e-3,
            },
            ModeKind::Uncorrelated => InterauralMode::Uncorrelated,
            ModeKind::Correlated => InterauralMode::Correlated {
                rho: self.rho,
                group_delay_s: self.group_delay_ms * 1e-3,
            },
        }
    }

    /// Echo of the configuration as a parseable config file.
    pub fn to_config_text(&self) -> String {
        let mut text = String::new();
        text.push_str(&format!("experiment = {}\n", self.experiment.name()));
        text.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        text.push_str(&format!("n_runs = {}\n", self.n_runs));
        text.push_str(&format!("master_seed = {}\n", self.master_seed));
        let p = &self.periphery;
        text.push_str(&format!("center_hz = {}\n", p.center_hz));
        text.push_str(&format!("gt_order = {}\n", p.gt_order));
        text.push_str(&format!("gt_erb_hz = {}\n", p.gt_erb_hz));
        text.push_str(&format!("compression = {}\n", p.compression));
        text.push_str(&format!("lp_order = {}\n", p.lp_order));
        text.push_str(&format!("lp_cutoff_hz = {}\n", p.lp_cutoff_hz));
        text.push_str(&format!("tfs_order = {}\n", p.tfs_order));
        text.push_str(&format!("tfs_bandwidth_hz = {}\n", p.tfs_bandwidth_hz));
        text.push_str(&format!("sigma_ipd = {}\n", self.binaural.sigma_ipd));
        text.push_str(&format!("sigma_d = {}\n", self.binaural.sigma_d));
        text.push_str(&format!(
            "clamp_epsilon = {}\n",
            self.binaural.clamp_epsilon
        ));
        let s = &self.staircase;
        text.push_str(&format!("start_level_db = {}\n", s.start_level_db));
        text.push_str(&format!("initial_step_db = {}\n", s.initial_step_db));
        let schedule: Vec<String> = s
            .step_schedule
            .iter()
            .map(|(count, step)| format!("{}:{}", count, step))
            .collect();
        text.push_str(&format!("step_schedule = {}\n", schedule.join(", ")));
        text.push_str(&format!("down_count = {}\n", s.down_count));
        text.push_str(&format!("up_count = {}\n", s.up_count));
        text.push_str(&format!("total_reversals = {}\n", s.total_reversals));
        text.push_str(&format!("reversals_averaged = {}\n", s.reversals_averaged));
        text.push_str(&format!("bandwidth_hz = {}\n", self.bandwidth_hz));
        let mode = match self.mode {
            ModeKind::Delayed => "delayed",
            ModeKind::Uncorrelated => "uncorrelated",
            ModeKind::Correlated => "correlated",
        };
        text.push_str(&format!("mode = {}\n", mode));
        text.push_str(&format!("delay_ms = {}\n", self.delay_ms));
        text.push_str(&format!("rho = {}\n", self.rho));
        text.push_str(&format!("group_delay_ms = {}\n", self.group_delay_ms));
        text.push_str(&format!("tone_level_db = {}\n", self.tone_level_db));
        text.push_str(&format!("trials_per_point = {}\n", self.trials_per_point));
        let grid: Vec<String> = self.rho_grid.iter().map(|r| r.to_string()).collect();
        text.push_str(&format!("rho_grid = {}\n", grid.join(",")));
        if let Some(path) = &self.reference_csv {
            text.push_str(&format!("reference_csv = {}\n", path.display()));
        }
        text
    }
}

/// Config-key reference for `--help`: every key with its default value.
pub fn config_keys_help() -> String {
    let d = RunConfig::defaults(ExperimentKind::Fig3);
    let schedule: Vec<String> = d
        .staircase
        .step_schedule
        .iter()
        .map(|(count, step)| format!("{}:{}", count, step))
        .collect();
    let grid: Vec<String> = d.rho_grid.iter().map(|r| r.to_string()).collect();
    format!(
        "Config file keys (key = value, # comments; omitted keys keep these defaults):\n\
         \n\
         Run control:\n\
         \x20 output_dir          output directory                        [{}]\n\
         \x20 n_runs              adaptive tracks per condition           [{}]\n\
         \x20 master_seed         root of all per-unit seeds              [{}]\n\
         \n\
         Periphery:\n\
         \x20 center_hz           analyzed channel center frequency       [{}]\n\
         \x20 gt_order            input gammatone order                   [{}]\n\
         \x20 gt_erb_hz           input gammatone bandwidth (ERB)         [{}]\n\
         \x20 compression         haircell compression exponent           [{}]\n\
         \x20 lp_order            haircell lowpass order                  [{}]\n\
         \x20 lp_cutoff_hz        haircell lowpass cutoff                 [{}]\n\
         \x20 tfs_order           fine-structure gammatone order          [{}]\n\
         \x20 tfs_bandwidth_hz    fine-structure bandwidth (ERB)          [{}]\n\
         \n\
         Binaural stage:\n\
         \x20 sigma_ipd           per-sample IPD jitter, radians          [{}]\n\
         \x20 sigma_d             decision-variable noise                 [{}]\n\
         \x20 clamp_epsilon       atanh clamp margin                      [{}]\n\
         \n\
         Staircase:\n\
         \x20 start_level_db      first-trial tone level                  [{}]\n\
         \x20 initial_step_db     step before any reduction               [{}]\n\
         \x20 step_schedule       reversal_count:step_db list             [{}]\n\
         \x20 down_count          correct responses per decrease          [{}]\n\
         \x20 up_count            incorrect responses per increase        [{}]\n\
         \x20 total_reversals     reversals until termination             [{}]\n\
         \x20 reversals_averaged  final reversals in the threshold        [{}]\n\
         \n\
         Stimulus (single-condition experiments):\n\
         \x20 bandwidth_hz        masker bandwidth                        [{}]\n\
         \x20 mode                delayed | uncorrelated | correlated     [delayed]\n\
         \x20 delay_ms            interaural delay (mode = delayed)       [{}]\n\
         \x20 rho                 correlation (mode = correlated)         [{}]\n\
         \x20 group_delay_ms      envelope delay (mode = correlated)      [{}]\n\
         \x20 tone_level_db       tone level for stimulus_export          [{}]\n\
         \n\
         Experiment detail:\n\
         \x20 trials_per_point    samples per correlation (correlation)   [{}]\n\
         \x20 rho_grid            comma-separated correlations            [{}]\n\
         \x20 reference_csv       threshold table to compare against      [unset]",
        d.output_dir.display(),
        d.n_runs,
        d.master_seed,
        d.periphery.center_hz,
        d.periphery.gt_order,
        d.periphery.gt_erb_hz,
        d.periphery.compression,
        d.periphery.lp_order,
        d.periphery.lp_cutoff_hz,
        d.periphery.tfs_order,
        d.periphery.tfs_bandwidth_hz,
        d.binaural.sigma_ipd,
        d.binaural.sigma_d,
        d.binaural.clamp_epsilon,
        d.staircase.start_level_db,
        d.staircase.initial_step_db,
        schedule.join(", "),
        d.staircase.down_count,
        d.staircase.up_count,
        d.staircase.total_reversals,
        d.staircase.reversals_averaged,
        d.bandwidth_hz,
        d.delay_ms,
        d.rho,
        d.group_delay_ms,
        d.tone_level_db,
        d.trials_per_point,
        grid.join(","),
    )
}

fn parse_number<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| err_at(line, format!("invalid value {:?} for key {}", value, key)))
}

fn parse_positive_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let x: f64 = parse_number(line, key, value)?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(err_at(line, format!("{} must be finite and positive", key)));
    }
    Ok(x)
}

fn parse_order(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    let n: usize = parse_number(line, key, value)?;
    if n == 0 {
        return Err(err_at(line, format!("{} must be at least 1", key)));
    }
    Ok(n)
}

fn parse_step_schedule(line: usize, value: &str) -> Result<Vec<(usize, f64)>, ConfigError> {
    let mut schedule = Vec::new();
    for item in value.split(',') {
        let item = item.trim();
        let (count, step) = item.split_once(':').ok_or_else(|| {
            err_at(
                line,
                format!(
                    "step_schedule entry {:?} must be reversal_count:step_db",
                    item
                ),
            )
        })?;
        schedule.push((
            parse_order(line, "step_schedule reversal count", count.trim())?,
            parse_positive_f64(line, "step_schedule step", step.trim())?,
        ));
    }
    Ok(schedule)
}

/// Parses a config file. Every key may appear at most once; `experiment`
/// is mandatory.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err_at(line_no, format!("expected key = value, got {:?}", line)))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(err_at(line_no, format!("empty value for key {}", key)));
        }
        if let Some((first, _, _)) = pairs.iter().find(|(_, k, _)| *k == key) {
            return Err(err_at(
                line_no,
                format!("duplicate key {} (first set on line {})", key, first),
            ));
        }
        pairs.push((line_no, key, value));
    }

    let experiment = match pairs.iter().find(|(_, k, _)| k == "experiment") {
        Some((line, _, value)) => value
            .parse::<ExperimentKind>()
            .map_err(|e| err_at(*line, e))?,
        None => {
            return Err(ConfigError {
                line: None,
                message: "missing required key experiment".to_string(),
            })
        }
    };
    let mut config = RunConfig::defaults(experiment);

    for (line, key, value) in &pairs {
        let line = *line;
        match key.as_str() {
            "experiment" => {}
            "output_dir" => config.output_dir = PathBuf::from(value),
            "n_runs" => {
                config.n_runs = parse_number(line, key, value)?;
                if config.n_runs == 0 {
                    return Err(err_at(line, "n_runs must be at least 1".to_string()));
                }
            }
            "master_seed" => config.master_seed = parse_number(line, key, value)?,
            "center_hz" => config.periphery.center_hz = parse_positive_f64(line, key, value)?,
            "gt_order" => config.periphery.gt_order = parse_order(line, key, value)?,
            "gt_erb_hz" => config.periphery.gt_erb_hz = parse_positive_f64(line, key, value)?,
            "compression" => {
                config.periphery.compression = parse_positive_f64(line, key, value)?;
            }
            "lp_order" => config.periphery.lp_order = parse_order(line, key, value)?,
            "lp_cutoff_hz" => {
                config.periphery.lp_cutoff_hz = parse_positive_f64(line, key, value)?;
            }
            "tfs_order" => config.periphery.tfs_order = parse_order(line, key, value)?,
            "tfs_bandwidth_hz" => {
                config.periphery.tfs_bandwidth_hz = parse_positive_f64(line, key, value)?;
            }
            "sigma_ipd" => {
                config.binaural.sigma_ipd = parse_number(line, key, value)?;
                if !(config.binaural.sigma_ipd >= 0.0) || !config.binaural.sigma_ipd.is_finite() {
                    return Err(err_at(
                        line,
                        "sigma_ipd must be finite and >= 0".to_string(),
                    ));
                }
            }
            "sigma_d" => {
                config.binaural.sigma_d = parse_number(line, key, value)?;
                if !(config.binaural.sigma_d >= 0.0) || !config.binaural.sigma_d.is_finite() {
                    return Err(err_at(line, "sigma_d must be finite and >= 0".to_string()));
                }
            }
            "clamp_epsilon" => {
                config.binaural.clamp_epsilon = parse_number(line, key, value)?;
            }
            "start_level_db" => {
                config.staircase.start_level_db = parse_number(line, key, value)?;
                if !config.staircase.start_level_db.is_finite() {
                    return Err(err_at(line, "start_level_db must be finite".to_string()));
                }
            }
            "initial_step_db" => {
                config.staircase.initial_step_db = parse_positive_f64(line, key, value)?;
            }
            "step_schedule" => {
                config.staircase.step_schedule = parse_step_schedule(line, value)?;
            }
            "down_count" => config.staircase.down_count = parse_order(line, key, value)?,
            "up_count" => config.staircase.up_count = parse_order(line, key, value)?,
            "total_reversals" => {
                config.staircase.total_reversals = parse_order(line, key, value)?;
            }
            "reversals_averaged" => {
                config.staircase.reversals_averaged = parse_order(line, key, value)?;
            }
            "bandwidth_hz" => {
                config.bandwidth_hz = parse_positive_f64(line, key, value)?;
            }
            "mode" => {
                config.mode = match value.as_str() {
                    "delayed" => ModeKind::Delayed,
                    "uncorrelated" => ModeKind::Uncorrelated,
                    "correlated" => ModeKind::Correlated,
                    other => {
                        return Err(err_at(
                            line,
                            format!(
                                "unknown mode {:?} (expected delayed, uncorrelated, or correlated)",
                                other
                            ),
                        ))
                    }
                };
            }
            "delay_ms" => {
                config.delay_ms = parse_number(line, key, value)?;
                if !(config.delay_ms >= 0.0) {
                    return Err(err_at(line, "delay_ms must be >= 0".to_string()));
                }
            }
            "rho" => {
                config.rho = parse_number(line, key, value)?;
                if !(-1.0..=1.0).contains(&config.rho) {
                    return Err(err_at(line, "rho must lie in [-1, 1]".to_string()));
                }
            }
            "group_delay_ms" => {
                config.group_delay_ms = parse_number(line, key, value)?;
                if !(config.group_delay_ms >= 0.0) {
                    return Err(err_at(line, "group_delay_ms must be >= 0".to_string()));
                }
            }
            "tone_level_db" => {
                config.tone_level_db = parse_number(line, key, value)?;
                if !config.tone_level_db.is_finite() {
                    return Err(err_at(line, "tone_level_db must be finite".to_string()));
                }
            }
            "trials_per_point" => {
                config.trials_per_point = parse_number(line, key, value)?;
                if config.trials_per_point < 2 {
                    return Err(err_at(
                        line,
                        "trials_per_point must be at least 2".to_string(),
                    ));
                }
            }
            "rho_grid" => {
                let mut grid = Vec::new();
                for item in value.split(',') {
                    let rho: f64 = parse_number(line, key, item.trim())?;
                    if !(-1.0..=1.0).contains(&rho) {
                        return Err(err_at(
                            line,
                            format!("rho_grid entry {} outside [-1, 1]", rho),
                        ));
                    }
                    grid.push(rho);
                }
                if grid.len() < 2 {
                    return Err(err_at(
                        line,
                        "rho_grid needs at least two correlations".to_string(),
                    ));
                }
                config.rho_grid = grid;
            }
            "reference_csv" => config.reference_csv = Some(PathBuf::from(value)),
            other => {
                return Err(err_at(line, format!("unknown key {:?}", other)));
            }
        }
    }

    // Cross-field rules (schedule ordering, clamp range, averaging window)
    // live with the model types; their messages name the offending field.
    config.binaural.validate().map_err(|e| ConfigError {
        line: None,
        message: e.to_string(),
    })?;
    config.staircase.validate().map_err(|e| ConfigError {
        line: None,
        message: e.to_string(),
    })?;
    Ok(config)
}

/// Command-line overrides applied on top of the parsed file.
pub fn apply_overrides(
    config: &mut RunConfig,
    out: Option<PathBuf>,
    seed: Option<u64>,
    runs: Option<usize>,
) -> Result<(), ConfigError> {
    if let Some(out) = out {
        config.output_dir = out;
    }
    if let Some(seed) = seed {
        config.master_seed = seed;
    }
    if let Some(runs) = runs {
        if runs == 0 {
            return Err(ConfigError {
                line: None,
                message: "--runs must be at least 1".to_string(),
            });
        }
        config.n_runs = runs;
    }
    Ok(())
}
