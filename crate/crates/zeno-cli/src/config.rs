//! Experiment configuration: a small sectioned key = value format with
//! strict validation.
//!
//! Grammar (one setting per line):
//!
//! ```text
//! # comment                 (also ; comment)
//! [params]                  # section header
//! omega2 = 0.0122718        # key = value
//! ```
//!
//! Sections and keys:
//!
//! - `[params]` — `omega2`, `omega3`, `a3` (rates, ≥ 0)
//! - `[schedule]` — `tau_p`, `dt`, `n_pulses`, `tau_tr`,
//!   `weak_on_during_pulse` (true/false), `alignment` (end/start),
//!   `t_pi` (mutually exclusive with `dt`: the gap is derived as
//!   T_π/n − τ_p and the schedule is pinned to tile the π pulse)
//! - `[run]` — `experiment` (itano_table, single_atom_periods,
//!   trajectory_paths, eigen_check, bloch_check), `trajectories`,
//!   `master_seed`, `output_path`, `output_format` (csv/json),
//!   `margin`, `step`
//!
//! Unknown sections or keys and duplicate keys are hard errors. Omitted
//! keys fall back to documented defaults (see [`parse_config`]).

use std::collections::HashMap;
use std::path::PathBuf;

use crate::error::CliError;
use zeno::{AtomParams, PulseAlignment, PulseSchedule};

/// Default weak drive: one π rotation over the default π-pulse length.
pub const DEFAULT_OMEGA2: f64 = std::f64::consts::PI / DEFAULT_T_PI;
pub const DEFAULT_OMEGA3: f64 = 50.0;
pub const DEFAULT_A3: f64 = 20.0;
pub const DEFAULT_T_PI: f64 = 256.0;
pub const DEFAULT_TAU_P: f64 = 2.4;
pub const DEFAULT_N_PULSES: usize = 8;
pub const DEFAULT_TRAJECTORIES: usize = 1000;
pub const DEFAULT_MASTER_SEED: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    ItanoTable,
    SingleAtomPeriods,
    TrajectoryPaths,
    EigenCheck,
    BlochCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ItanoTable => "itano_table",
            Experiment::SingleAtomPeriods => "single_atom_periods",
            Experiment::TrajectoryPaths => "trajectory_paths",
            Experiment::EigenCheck => "eigen_check",
            Experiment::BlochCheck => "bloch_check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// A fully validated experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub params: AtomParams,
    pub schedule: PulseSchedule,
    pub experiment: Experiment,
    pub trajectories: usize,
    pub master_seed: u64,
    /// Explicit output file, if the document named one; otherwise the
    /// driver derives `<experiment>.<ext>` after subcommand overrides.
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
    /// Regime-gate margin used by analytic evaluators (0 disables gates).
    pub margin: f64,
    /// Master-equation integrator step.
    pub step: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        parse_config("").expect("empty document must yield the default config")
    }
}

impl ExperimentConfig {
    /// The file the table goes to: the configured path, or
    /// `<experiment>.<ext>` when the document left it open.
    pub fn resolved_output_path(&self) -> PathBuf {
        self.output_path.clone().unwrap_or_else(|| {
            PathBuf::from(format!(
                "{}.{}",
                self.experiment.name(),
                self.output_format.extension()
            ))
        })
    }

    /// Short hex digest of everything that determines output *content*
    /// (output path and thread count are excluded on purpose: they must not
    /// change a single byte of the rows).
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let s = &self.schedule;
        let canonical = format!(
            "omega2={:?};omega3={:?};a3={:?};tau_p={:?};dt={:?};n_pulses={};tau_tr={:?};\
             weak_on_during_pulse={};alignment={:?};t_pi={:?};experiment={};trajectories={};\
             master_seed={};format={:?};margin={:?};step={:?}",
            self.params.omega2,
            self.params.omega3,
            self.params.a3,
            s.tau_p,
            s.dt,
            s.n_pulses,
            s.tau_tr,
            s.weak_on_during_pulse,
            s.alignment,
            s.pi_pulse_total,
            self.experiment.name(),
            self.trajectories,
            self.master_seed,
            self.output_format,
            self.margin,
            self.step,
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// One parsed `key = value` occurrence.
struct RawValue {
    value: String,
    line: usize,
    col: usize,
}

/// Parses and validates a configuration document, applying defaults for
/// everything absent: Ω₂ = π/256, Ω₃ = 50, A₃ = 20; τ_p = 2.4, T_π = 256
/// tiled by 8 pulses; τ_tr = 40/A₃ for free-form schedules and 0 for tiled
/// ones; experiment itano_table, 1000 trajectories, seed 1, CSV output to
/// `<experiment>.<ext>`, margin 10, step = 0.02/max-rate.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    const SECTIONS: &[(&str, &[&str])] = &[
        ("params", &["omega2", "omega3", "a3"]),
        (
            "schedule",
            &["tau_p", "dt", "n_pulses", "tau_tr", "weak_on_during_pulse", "alignment", "t_pi"],
        ),
        (
            "run",
            &[
                "experiment",
                "trajectories",
                "master_seed",
                "output_path",
                "output_format",
                "margin",
                "step",
            ],
        ),
    ];
    let mut values: HashMap<(String, String), RawValue> = HashMap::new();
    let mut section: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let col_of = |needle: &str| raw_line.find(needle).map_or(1, |p| p + 1);
        if let Some(inner) = line.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                return Err(CliError::parse(line_no, col_of("["), "unterminated section header"));
            };
            let name = name.trim().to_string();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(CliError::parse(
                    line_no,
                    col_of("["),
                    format!("unknown section [{name}]"),
                ));
            }
            section = Some(name);
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(CliError::parse(line_no, 1, "expected `key = value` or a section header"));
        };
        let key = line[..eq].trim().to_string();
        let value = line[eq + 1..].trim();
        // Strip a trailing comment from the value.
        let value = value.split(['#', ';']).next().unwrap_or("").trim().to_string();
        let Some(section) = section.clone() else {
            return Err(CliError::parse(
                line_no,
                1,
                format!("key `{key}` appears before any [section] header"),
            ));
        };
        let known = SECTIONS
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, keys)| keys.contains(&key.as_str()))
            .unwrap_or(false);
        if !known {
            return Err(CliError::parse(
                line_no,
                col_of(&key),
                format!("unknown key `{key}` in section [{section}]"),
            ));
        }
        if value.is_empty() {
            return Err(CliError::parse(line_no, col_of("="), format!("key `{key}` has no value")));
        }
        let col = col_of(&key);
        if values
            .insert((section.clone(), key.clone()), RawValue { value, line: line_no, col })
            .is_some()
        {
            return Err(CliError::parse(line_no, col, format!("duplicate key `{key}` in [{section}]")));
        }
    }
    build_config(values)
}

fn build_config(mut values: HashMap<(String, String), RawValue>) -> Result<ExperimentConfig, CliError> {
    let mut take = |section: &str, key: &str| values.remove(&(section.into(), key.into()));
    fn parse_as<T: std::str::FromStr>(raw: &RawValue, key: &str, kind: &str) -> Result<T, CliError> {
        raw.value.parse().map_err(|_| {
            CliError::parse(raw.line, raw.col, format!("`{key}` expects {kind}, got `{}`", raw.value))
        })
    }

    let omega2 = match take("params", "omega2") {
        Some(v) => parse_as::<f64>(&v, "omega2", "a number")?,
        None => DEFAULT_OMEGA2,
    };
    let omega3 = match take("params", "omega3") {
        Some(v) => parse_as::<f64>(&v, "omega3", "a number")?,
        None => DEFAULT_OMEGA3,
    };
    let a3 = match take("params", "a3") {
        Some(v) => parse_as::<f64>(&v, "a3", "a number")?,
        None => DEFAULT_A3,
    };
    let params = AtomParams::new(omega2, omega3, a3).map_err(CliError::validation)?;

    let tau_p = match take("schedule", "tau_p") {
        Some(v) => parse_as::<f64>(&v, "tau_p", "a number")?,
        None => DEFAULT_TAU_P,
    };
    let n_pulses = match take("schedule", "n_pulses") {
        Some(v) => parse_as::<usize>(&v, "n_pulses", "a non-negative integer")?,
        None => DEFAULT_N_PULSES,
    };
    let dt_raw = take("schedule", "dt");
    let t_pi_raw = take("schedule", "t_pi");
    if let (Some(_), Some(t)) = (&dt_raw, &t_pi_raw) {
        return Err(CliError::parse(
            t.line,
            t.col,
            "`dt` and `t_pi` are mutually exclusive: `t_pi` derives the gap as t_pi/n_pulses − tau_p",
        ));
    }
    let tau_tr_raw = take("schedule", "tau_tr");
    let weak_on_during_pulse = match take("schedule", "weak_on_during_pulse") {
        Some(v) => parse_as::<bool>(&v, "weak_on_during_pulse", "true or false")?,
        None => true,
    };
    let alignment = match take("schedule", "alignment") {
        Some(v) => match v.value.as_str() {
            "end" => PulseAlignment::IntervalEnd,
            "start" => PulseAlignment::IntervalStart,
            other => {
                return Err(CliError::parse(
                    v.line,
                    v.col,
                    format!("`alignment` expects `end` or `start`, got `{other}`"),
                ))
            }
        },
        None => PulseAlignment::IntervalEnd,
    };
    let schedule = match (dt_raw, t_pi_raw) {
        (Some(dt), None) => {
            let dt = parse_as::<f64>(&dt, "dt", "a number")?;
            let tau_tr = match tau_tr_raw {
                Some(v) => parse_as::<f64>(&v, "tau_tr", "a number")?,
                None if a3 > 0.0 => 40.0 / a3,
                None => 0.0,
            };
            let mut s =
                PulseSchedule::new(tau_p, dt, n_pulses, tau_tr, weak_on_during_pulse)
                    .map_err(CliError::validation)?;
            s.alignment = alignment;
            s
        }
        (None, t_pi_raw) => {
            let t_pi = match t_pi_raw {
                Some(v) => parse_as::<f64>(&v, "t_pi", "a number")?,
                None => DEFAULT_T_PI,
            };
            let mut s =
                PulseSchedule::itano(n_pulses, t_pi, tau_p).map_err(CliError::validation)?;
            s.weak_on_during_pulse = weak_on_during_pulse;
            s.alignment = alignment;
            if let Some(v) = tau_tr_raw {
                s.tau_tr = parse_as::<f64>(&v, "tau_tr", "a number")?;
            }
            s.validate().map_err(CliError::validation)?;
            s
        }
        (Some(_), Some(_)) => unreachable!("rejected above"),
    };

    let experiment = match take("run", "experiment") {
        Some(v) => match v.value.as_str() {
            "itano_table" => Experiment::ItanoTable,
            "single_atom_periods" => Experiment::SingleAtomPeriods,
            "trajectory_paths" => Experiment::TrajectoryPaths,
            "eigen_check" => Experiment::EigenCheck,
            "bloch_check" => Experiment::BlochCheck,
            other => {
                return Err(CliError::parse(
                    v.line,
                    v.col,
                    format!("unrecognized experiment `{other}`"),
                ))
            }
        },
        None => Experiment::ItanoTable,
    };
    let trajectories = match take("run", "trajectories") {
        Some(v) => parse_as::<usize>(&v, "trajectories", "a positive integer")?,
        None => DEFAULT_TRAJECTORIES,
    };
    if trajectories == 0 {
        return Err(CliError::validation_msg("trajectories must be at least 1"));
    }
    let master_seed = match take("run", "master_seed") {
        Some(v) => parse_as::<u64>(&v, "master_seed", "a non-negative integer")?,
        None => DEFAULT_MASTER_SEED,
    };
    let output_format = match take("run", "output_format") {
        Some(v) => match v.value.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(CliError::parse(
                    v.line,
                    v.col,
                    format!("`output_format` expects `csv` or `json`, got `{other}`"),
                ))
            }
        },
        None => OutputFormat::Csv,
    };
    let output_path = take("run", "output_path").map(|v| PathBuf::from(v.value));
    let margin = match take("run", "margin") {
        Some(v) => parse_as::<f64>(&v, "margin", "a number")?,
        None => zeno::DEFAULT_MARGIN,
    };
    if !(margin >= 0.0) || !margin.is_finite() {
        return Err(CliError::validation_msg(format!("margin must be ≥ 0, got {margin}")));
    }
    let step = match take("run", "step") {
        Some(v) => parse_as::<f64>(&v, "step", "a number")?,
        None => zeno::default_step(&params),
    };
    if !(step > 0.0) || !step.is_finite() {
        return Err(CliError::validation_msg(format!("step must be positive, got {step}")));
    }

    debug_assert!(values.is_empty(), "all recognized keys must be consumed");
    Ok(ExperimentConfig {
        params,
        schedule,
        experiment,
        trajectories,
        master_seed,
        output_path,
        output_format,
        margin,
        step,
    })
}
