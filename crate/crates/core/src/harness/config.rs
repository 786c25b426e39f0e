//! Flat `key = value` experiment configuration with `[section]` headers.
//! No nesting; every key has a default, a file can set any subset, and
//! `--override section.key=value` pairs are applied on top.

use std::path::PathBuf;

use crate::bounds::{sample_size_process, sample_size_state_global, sample_size_state_local, DesignFamily};
use crate::designs::{mub_design, pauli_local_design, sic_design_d2, MeasurementDesign};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    State,
    Process,
    VerifyDesigns,
    Bound,
    Sweep,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::State => "state",
            Mode::Process => "process",
            Mode::VerifyDesigns => "verify-designs",
            Mode::Bound => "bound",
            Mode::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> Option<Mode> {
        match s {
            "state" => Some(Mode::State),
            "process" => Some(Mode::Process),
            "verify-designs" => Some(Mode::VerifyDesigns),
            "bound" => Some(Mode::Bound),
            "sweep" => Some(Mode::Sweep),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DesignFamilyName {
    Mub,
    Sic,
    Pauli,
}

impl DesignFamilyName {
    pub fn as_str(&self) -> &'static str {
        match self {
            DesignFamilyName::Mub => "mub",
            DesignFamilyName::Sic => "sic",
            DesignFamilyName::Pauli => "pauli",
        }
    }
}

/// Initial-state selector for strategies that carry one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateInit {
    Uniform,
    Basis(usize),
    Random,
}

impl StateInit {
    pub fn as_str(&self) -> String {
        match self {
            StateInit::Uniform => "uniform".to_string(),
            StateInit::Basis(k) => format!("basis:{k}"),
            StateInit::Random => "random".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DesignSpec {
    pub family: DesignFamilyName,
    pub dim: usize,
    pub qubits: usize,
}

#[derive(Clone, Debug)]
pub struct SourceSpec {
    pub strategy: String,
    pub state: StateInit,
    pub omega: f64,
    pub step: f64,
    pub window: usize,
    pub p: f64,
    pub rate: f64,
    pub gain: f64,
}

#[derive(Clone, Debug)]
pub struct RoundsSpec {
    /// Explicit round count; 0 means "derive from the sample-size formula".
    pub n: u64,
    pub rank: usize,
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub mode: Mode,
    mode_explicit: bool,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub export_outcomes: bool,
    pub design: DesignSpec,
    pub source: SourceSpec,
    pub rounds: RoundsSpec,
    pub choi_tol: f64,
    pub choi_max_iter: usize,
    pub sweep_n_list: Vec<u64>,
    pub sweep_trials: usize,
    pub verify_trials: usize,
    pub verify_tol: f64,
}

impl ExperimentConfig {
    pub fn default_for(mode: Mode) -> Self {
        Self {
            mode,
            mode_explicit: false,
            trials: 100,
            seed: 1,
            out: None,
            export_outcomes: false,
            design: DesignSpec { family: DesignFamilyName::Mub, dim: 2, qubits: 1 },
            source: SourceSpec {
                strategy: "iid".to_string(),
                state: StateInit::Uniform,
                omega: 0.001,
                step: 0.02,
                window: 16,
                p: 0.8,
                rate: 0.0,
                gain: 0.3,
            },
            rounds: RoundsSpec { n: 0, rank: 1, epsilon: 0.2, delta: 0.05 },
            choi_tol: 1e-9,
            choi_max_iter: 10_000,
            sweep_n_list: vec![1_000, 3_000, 10_000, 30_000, 100_000],
            sweep_trials: 30,
            verify_trials: 100,
            verify_tol: 1e-9,
        }
    }

    /// Parses a config file and pins the mode to the invoking subcommand;
    /// a conflicting explicit `mode` key in the file is an error.
    pub fn load(path: Option<&std::path::Path>, mode: Mode) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Self::parse_str(&text, mode)?
            }
            None => Self::default_for(mode),
        };
        if cfg.mode_explicit && cfg.mode != mode {
            return Err(Error::Config {
                field: "experiment.mode".into(),
                message: format!(
                    "config file says '{}' but the subcommand runs '{}'",
                    cfg.mode.as_str(),
                    mode.as_str()
                ),
            });
        }
        cfg.mode = mode;
        Ok(cfg)
    }

    pub fn parse_str(text: &str, mode: Mode) -> Result<Self> {
        let mut cfg = Self::default_for(mode);
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                field: format!("line {}", lineno + 1),
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            cfg.set(&section, key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec.split_once('=').ok_or_else(|| Error::Config {
            field: "override".into(),
            message: format!("expected 'section.key=value', got '{spec}'"),
        })?;
        let (section, key) = path.trim().split_once('.').ok_or_else(|| Error::Config {
            field: "override".into(),
            message: format!("expected 'section.key=value', got '{spec}'"),
        })?;
        self.set(section, key, value.trim())
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let field = format!("{section}.{key}");
        let bad = |message: String| Error::Config { field: field.clone(), message };
        let parse_u64 = |v: &str| v.parse::<u64>().map_err(|_| bad(format!("expected integer, got '{v}'")));
        let parse_usize =
            |v: &str| v.parse::<usize>().map_err(|_| bad(format!("expected integer, got '{v}'")));
        let parse_f64 =
            |v: &str| v.parse::<f64>().map_err(|_| bad(format!("expected number, got '{v}'")));
        let parse_bool = |v: &str| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(bad(format!("expected true/false, got '{v}'"))),
        };

        match (section, key) {
            ("experiment", "mode") => {
                self.mode = Mode::parse(value)
                    .ok_or_else(|| bad(format!("unknown mode '{value}'")))?;
                self.mode_explicit = true;
            }
            ("experiment", "trials") => self.trials = parse_usize(value)?,
            ("experiment", "seed") => self.seed = parse_u64(value)?,
            ("experiment", "out") => {
                self.out = if value.is_empty() { None } else { Some(PathBuf::from(value)) }
            }
            ("experiment", "export_outcomes") => self.export_outcomes = parse_bool(value)?,

            ("design", "family") => {
                self.design.family = match value {
                    "mub" => DesignFamilyName::Mub,
                    "sic" => DesignFamilyName::Sic,
                    "pauli" => DesignFamilyName::Pauli,
                    _ => return Err(bad(format!("unknown design family '{value}'"))),
                }
            }
            ("design", "dim") => self.design.dim = parse_usize(value)?,
            ("design", "qubits") => self.design.qubits = parse_usize(value)?,

            ("source", "strategy") => self.source.strategy = value.to_string(),
            ("source", "state") => {
                self.source.state = if value == "uniform" {
                    StateInit::Uniform
                } else if value == "random" {
                    StateInit::Random
                } else if let Some(k) = value.strip_prefix("basis:") {
                    StateInit::Basis(parse_usize(k)?)
                } else {
                    return Err(bad(format!(
                        "expected uniform | basis:<k> | random, got '{value}'"
                    )));
                }
            }
            ("source", "omega") => self.source.omega = parse_f64(value)?,
            ("source", "step") => self.source.step = parse_f64(value)?,
            ("source", "window") => self.source.window = parse_usize(value)?,
            ("source", "p") => self.source.p = parse_f64(value)?,
            ("source", "rate") => self.source.rate = parse_f64(value)?,
            ("source", "gain") => self.source.gain = parse_f64(value)?,

            ("rounds", "n") => self.rounds.n = parse_u64(value)?,
            ("rounds", "rank") => self.rounds.rank = parse_usize(value)?,
            ("rounds", "epsilon") => self.rounds.epsilon = parse_f64(value)?,
            ("rounds", "delta") => self.rounds.delta = parse_f64(value)?,

            ("projection", "choi_tol") => self.choi_tol = parse_f64(value)?,
            ("projection", "choi_max_iter") => self.choi_max_iter = parse_usize(value)?,

            ("sweep", "n_list") => {
                let mut list = Vec::new();
                for part in value.split(',') {
                    list.push(parse_u64(part.trim())?);
                }
                if list.is_empty() || list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(bad("expected a strictly ascending integer list".into()));
                }
                self.sweep_n_list = list;
            }
            ("sweep", "trials_per_point") => self.sweep_trials = parse_usize(value)?,

            ("verify", "trials") => self.verify_trials = parse_usize(value)?,
            ("verify", "tol") => self.verify_tol = parse_f64(value)?,

            _ => return Err(bad("unknown key".into())),
        }
        Ok(())
    }

    const STATE_STRATEGIES: [&'static str; 5] =
        ["iid", "drift", "random-walk", "feedback", "adversarial"];
    const PROCESS_STRATEGIES: [&'static str; 4] =
        ["iid", "drift-depolarizing", "drift-unitary", "feedback"];

    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, message: String| Error::Config { field: field.into(), message };
        if self.trials == 0 {
            return Err(err("experiment.trials", "must be at least 1".into()));
        }
        match self.design.family {
            DesignFamilyName::Sic if self.design.dim != 2 => {
                return Err(err("design.dim", "the SIC design is defined for dim 2".into()));
            }
            DesignFamilyName::Pauli if !(1..=4).contains(&self.design.qubits) => {
                return Err(err("design.qubits", "local Pauli designs support 1..=4 qubits".into()));
            }
            _ => {}
        }
        if !self.rounds.epsilon.is_finite() || self.rounds.epsilon <= 0.0 {
            return Err(err("rounds.epsilon", "must be positive".into()));
        }
        if !(self.rounds.delta > 0.0 && self.rounds.delta < 1.0) {
            return Err(err("rounds.delta", "must be in (0, 1)".into()));
        }
        let dim = self.dim();
        if self.rounds.rank < 1 || self.rounds.rank > dim * dim {
            return Err(err("rounds.rank", format!("must be in 1..={}", dim * dim)));
        }
        match self.mode {
            Mode::State | Mode::Sweep => {
                if !Self::STATE_STRATEGIES.contains(&self.source.strategy.as_str()) {
                    return Err(err(
                        "source.strategy",
                        format!(
                            "unknown state strategy '{}'; expected one of {:?}",
                            self.source.strategy,
                            Self::STATE_STRATEGIES
                        ),
                    ));
                }
                if let StateInit::Basis(k) = self.source.state {
                    if k >= dim {
                        return Err(err("source.state", format!("basis index {k} out of range for dim {dim}")));
                    }
                }
                if self.rounds.rank > dim {
                    return Err(err("rounds.rank", format!("must be in 1..={dim} for state mode")));
                }
            }
            Mode::Process => {
                if !Self::PROCESS_STRATEGIES.contains(&self.source.strategy.as_str()) {
                    return Err(err(
                        "source.strategy",
                        format!(
                            "unknown process strategy '{}'; expected one of {:?}",
                            self.source.strategy,
                            Self::PROCESS_STRATEGIES
                        ),
                    ));
                }
                if !(0.0..=1.0).contains(&self.source.p) {
                    return Err(err("source.p", "channel parameter must be in [0, 1]".into()));
                }
            }
            Mode::VerifyDesigns | Mode::Bound => {}
        }
        Ok(())
    }

    /// System dimension implied by the design spec.
    pub fn dim(&self) -> usize {
        match self.design.family {
            DesignFamilyName::Mub => self.design.dim,
            DesignFamilyName::Sic => 2,
            DesignFamilyName::Pauli => 1 << self.design.qubits,
        }
    }

    pub fn build_design(&self) -> Result<MeasurementDesign> {
        match self.design.family {
            DesignFamilyName::Mub => mub_design(self.design.dim),
            DesignFamilyName::Sic => Ok(sic_design_d2()),
            DesignFamilyName::Pauli => pauli_local_design(self.design.qubits),
        }
    }

    /// Explicit round count, or the sample-size formula matching the mode
    /// and design family.
    pub fn resolve_rounds(&self) -> Result<u64> {
        if self.rounds.n > 0 {
            return Ok(self.rounds.n);
        }
        let r = &self.rounds;
        let size = match self.mode {
            Mode::Process => match self.design.family {
                DesignFamilyName::Pauli => {
                    sample_size_process(self.design.qubits, r.epsilon, r.delta, DesignFamily::Local)?
                }
                _ => sample_size_process(self.dim(), r.epsilon, r.delta, DesignFamily::Global)?,
            },
            _ => match self.design.family {
                DesignFamilyName::Pauli => {
                    sample_size_state_local(self.design.qubits, r.rank, r.epsilon, r.delta)?
                }
                _ => sample_size_state_global(self.dim(), r.rank, r.epsilon, r.delta)?,
            },
        };
        Ok(size.rounds)
    }

    /// Full configuration echo for provenance, in stable order.
    pub fn echo_lines(&self) -> Vec<String> {
        let out = self
            .out
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let n_list: Vec<String> = self.sweep_n_list.iter().map(|n| n.to_string()).collect();
        vec![
            format!("config.experiment.mode = {}", self.mode.as_str()),
            format!("config.experiment.trials = {}", self.trials),
            format!("config.experiment.seed = {}", self.seed),
            format!("config.experiment.out = {out}"),
            format!("config.experiment.export_outcomes = {}", self.export_outcomes),
            format!("config.design.family = {}", self.design.family.as_str()),
            format!("config.design.dim = {}", self.design.dim),
            format!("config.design.qubits = {}", self.design.qubits),
            format!("config.source.strategy = {}", self.source.strategy),
            format!("config.source.state = {}", self.source.state.as_str()),
            format!("config.source.omega = {}", self.source.omega),
            format!("config.source.step = {}", self.source.step),
            format!("config.source.window = {}", self.source.window),
            format!("config.source.p = {}", self.source.p),
            format!("config.source.rate = {}", self.source.rate),
            format!("config.source.gain = {}", self.source.gain),
            format!("config.rounds.n = {}", self.rounds.n),
            format!("config.rounds.rank = {}", self.rounds.rank),
            format!("config.rounds.epsilon = {}", self.rounds.epsilon),
            format!("config.rounds.delta = {}", self.rounds.delta),
            format!("config.projection.choi_tol = {:e}", self.choi_tol),
            format!("config.projection.choi_max_iter = {}", self.choi_max_iter),
            format!("config.sweep.n_list = {}", n_list.join(",")),
            format!("config.sweep.trials_per_point = {}", self.sweep_trials),
            format!("config.verify.trials = {}", self.verify_trials),
            format!("config.verify.tol = {:e}", self.verify_tol),
        ]
    }
}
