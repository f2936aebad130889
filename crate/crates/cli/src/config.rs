//! Run configuration: a sectioned TOML file, overridden by the environment
//! (output directory only) and then by command-line flags.
//!
//! Every key is optional. Omitted keys take the defaults of the chosen
//! experiment, listed on each field; model defaults are
//! `J = 1, δ0 = 1, Δ0 = 20, L = 9, φ0 = 0`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thouless_core::evolve::{Method, PropagatorConfig};
use thouless_core::model::{DisorderSpec, PhaseSchedule, RiceMeleParams};
use thouless_core::protocol::{ExperimentKind, ExperimentSpec, InitialSites};

/// Overrides `[output] dir`; flags still win.
pub const OUTPUT_DIR_ENV: &str = "THOULESS_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Chern,
    PumpSingle,
    PumpFock,
    ScanDisorder,
    Hom,
    FullProtocol,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Chern => "chern",
            Experiment::PumpSingle => "pump-single",
            Experiment::PumpFock => "pump-fock",
            Experiment::ScanDisorder => "scan-disorder",
            Experiment::Hom => "hom",
            Experiment::FullProtocol => "full-protocol",
        }
    }

    pub fn kind(self) -> ExperimentKind {
        match self {
            Experiment::Chern => ExperimentKind::ChernCheck,
            Experiment::PumpSingle => ExperimentKind::SinglePump,
            Experiment::PumpFock => ExperimentKind::FockPump,
            Experiment::ScanDisorder => ExperimentKind::DisorderScan,
            Experiment::Hom => ExperimentKind::Hom,
            Experiment::FullProtocol => ExperimentKind::FullProtocol,
        }
    }

    fn interferes(self) -> bool {
        matches!(self, Experiment::Hom | Experiment::FullProtocol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleChoice {
    Linear,
    GapAdaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DisorderChoice {
    None,
    Uniform,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    MidpointExponential,
    Rk4,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every disorder draw. Default 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
    pub output: OutputSection,
    pub model: ModelSection,
    pub schedule: ScheduleSection,
    pub disorder: DisorderSection,
    pub run: RunSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Default `output`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Default all of `csv`, `json`, `svg`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<Format>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// `J`, default 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tunneling: Option<f64>,
    /// `δ0`, default 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimerization: Option<f64>,
    /// `Δ0`, default 20.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    /// `L`, default 9 (18 sites).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    /// `φ0`, default 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    /// Default `gap_adaptive` for `hom` and `full-protocol`, else `linear`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ScheduleChoice>,
    /// Default 0.08.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Default 0.03.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisorderSection {
    /// Default `uniform` for `scan-disorder`, `hom` and `full-protocol`,
    /// else `none`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<DisorderChoice>,
    /// Default 0.5 for `hom` and `full-protocol`, else 4.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Default 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Default 1 for `hom` and `full-protocol`, else 4.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Default 1 for `pump-single`, else 100.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Initial sites, one or two entries. Defaults: `[7]` (`pump-single`),
    /// `[7, 7]` (`pump-fock`, `scan-disorder`), `[9, 10]` (`hom`),
    /// `[7, 12]` (`full-protocol`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<usize>>,
    /// Pump cycles per transport stage, default 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    /// Default 20000.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_cycle: Option<usize>,
    /// Observation points per stage, default 400.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<usize>,
    /// Default `midpoint_exponential`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodChoice>,
    /// Norm-drift and unitarity bound, default 1e-8.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Disorder amplitudes for `scan-disorder`, default `[0, 0.5, 1, 2, 3, 4]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    /// Brillouin-zone grid for `chern`, default 101.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Worker threads, default the available parallelism.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Everything an experiment run needs, with all defaults applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub experiment: Experiment,
    pub spec: ExperimentSpec,
    pub amplitudes: Vec<f64>,
    pub grid: usize,
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
    pub threads: Option<usize>,
    /// The fully populated configuration, echoed into the manifest.
    pub effective: RunConfig,
}

impl Resolved {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are always representable in TOML")
    }

    /// Applies experiment defaults to every omitted key.
    pub fn resolve(&self, experiment: Experiment) -> Result<Resolved, ConfigError> {
        let interferes = experiment.interferes();
        let m = &self.model;
        let params = RiceMeleParams {
            tunneling: m.tunneling.unwrap_or(1.0),
            dimerization: m.dimerization.unwrap_or(1.0),
            offset: m.offset.unwrap_or(20.0),
            cells: m.cells.unwrap_or(9),
            phi0: m.phi0.unwrap_or(0.0),
        };
        params.validate().map_err(|e| ConfigError(e.to_string()))?;

        let s = &self.schedule;
        let schedule_kind = s.kind.unwrap_or(if interferes {
            ScheduleChoice::GapAdaptive
        } else {
            ScheduleChoice::Linear
        });
        let omega = s.omega.unwrap_or(0.08);
        let epsilon = s.epsilon.unwrap_or(0.03);
        let schedule = match schedule_kind {
            ScheduleChoice::Linear => PhaseSchedule::linear(omega, params.phi0),
            ScheduleChoice::GapAdaptive => PhaseSchedule::gap_adaptive(epsilon, params.phi0),
        };

        let base_seed = self.base_seed.unwrap_or(1);
        let d = &self.disorder;
        let disorder_kind = d.kind.unwrap_or(match experiment {
            Experiment::ScanDisorder | Experiment::Hom | Experiment::FullProtocol => DisorderChoice::Uniform,
            _ => DisorderChoice::None,
        });
        let eta = d.eta.unwrap_or(if interferes { 0.5 } else { 4.0 });
        let mu = d.mu.unwrap_or(0.0);
        let sigma = d.sigma.unwrap_or(if interferes { 1.0 } else { 4.0 });
        let disorder = match disorder_kind {
            DisorderChoice::None => DisorderSpec {
                base_seed,
                ..DisorderSpec::none()
            },
            DisorderChoice::Uniform => DisorderSpec::uniform(eta, base_seed),
            DisorderChoice::Normal => DisorderSpec::normal(mu, sigma, base_seed),
        };

        let r = &self.run;
        let default_start: &[usize] = match experiment {
            Experiment::PumpSingle | Experiment::Chern => &[7],
            Experiment::PumpFock | Experiment::ScanDisorder => &[7, 7],
            Experiment::Hom => &[9, 10],
            Experiment::FullProtocol => &[7, 12],
        };
        let start = r.start.clone().unwrap_or_else(|| default_start.to_vec());
        let initial = match (experiment, start.as_slice()) {
            (Experiment::PumpSingle, [a]) => InitialSites::Single(*a),
            (Experiment::PumpSingle, _) => {
                return Err(ConfigError("pump-single takes exactly one start site".into()));
            }
            (_, [a]) => InitialSites::Pair(*a, *a),
            (_, [a, b]) => InitialSites::Pair(*a, *b),
            _ => return Err(ConfigError(format!("start needs one or two sites, got {start:?}"))),
        };
        let method = r.method.unwrap_or(MethodChoice::MidpointExponential);
        let propagator = PropagatorConfig {
            steps_per_cycle: r.steps_per_cycle.unwrap_or(20_000),
            method: match method {
                MethodChoice::MidpointExponential => Method::MidpointExponential,
                MethodChoice::Rk4 => Method::Rk4,
            },
            tolerance: r.tolerance.unwrap_or(1e-8),
            records: r.records.unwrap_or(400),
        };
        let samples = r
            .samples
            .unwrap_or(if experiment == Experiment::PumpSingle { 1 } else { 100 });
        let cycles = r.cycles.unwrap_or(1);
        let spec = ExperimentSpec {
            kind: experiment.kind(),
            params,
            schedule,
            disorder,
            n_samples: samples,
            initial,
            cycles,
            propagator,
        };
        if experiment != Experiment::Chern {
            spec.validate().map_err(|e| ConfigError(e.to_string()))?;
        }

        let amplitudes = r
            .amplitudes
            .clone()
            .unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0]);
        if amplitudes.is_empty() || amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(ConfigError(format!(
                "amplitudes must be a non-empty list of non-negative numbers, got {amplitudes:?}"
            )));
        }
        let grid = r.grid.unwrap_or(101);
        if grid < 16 {
            return Err(ConfigError(format!("grid must be at least 16, got {grid}")));
        }
        if r.threads == Some(0) {
            return Err(ConfigError("threads must be positive".into()));
        }
        let formats = self
            .output
            .formats
            .clone()
            .unwrap_or_else(|| vec![Format::Csv, Format::Json, Format::Svg]);
        let output_dir = self.output.dir.clone().unwrap_or_else(|| PathBuf::from("output"));

        let effective = RunConfig {
            base_seed: Some(base_seed),
            output: OutputSection {
                dir: Some(output_dir.clone()),
                formats: Some(formats.clone()),
            },
            model: ModelSection {
                tunneling: Some(params.tunneling),
                dimerization: Some(params.dimerization),
                offset: Some(params.offset),
                cells: Some(params.cells),
                phi0: Some(params.phi0),
            },
            schedule: ScheduleSection {
                kind: Some(schedule_kind),
                omega: Some(omega),
                epsilon: Some(epsilon),
            },
            disorder: DisorderSection {
                kind: Some(disorder_kind),
                eta: Some(eta),
                mu: Some(mu),
                sigma: Some(sigma),
            },
            run: RunSection {
                samples: Some(samples),
                start: Some(start),
                cycles: Some(cycles),
                steps_per_cycle: Some(propagator.steps_per_cycle),
                records: Some(propagator.records),
                method: Some(method),
                tolerance: Some(propagator.tolerance),
                amplitudes: Some(amplitudes.clone()),
                grid: Some(grid),
                threads: r.threads,
            },
        };
        Ok(Resolved {
            experiment,
            spec,
            amplitudes,
            grid,
            output_dir,
            formats,
            threads: r.threads,
            effective,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use thouless_core::model::{DisorderKind, ScheduleKind};

    #[test]
    fn empty_config_gives_documented_defaults() {
        let r = RunConfig::parse("").unwrap().resolve(Experiment::PumpFock).unwrap();
        assert_eq!(r.spec.params, RiceMeleParams::default());
        assert_eq!(r.spec.schedule, PhaseSchedule::linear(0.08, 0.0));
        assert_eq!(r.spec.initial, InitialSites::Pair(7, 7));
        assert_eq!(r.spec.n_samples, 100);
        assert_eq!(r.spec.disorder.kind, DisorderKind::None);
        assert_eq!(r.spec.propagator, PropagatorConfig::default());

        let hom = RunConfig::default().resolve(Experiment::Hom).unwrap();
        assert_eq!(hom.spec.schedule.kind, ScheduleKind::GapAdaptive { epsilon: 0.03 });
        assert_eq!(hom.spec.disorder.kind, DisorderKind::Uniform { eta: 0.5 });
        assert_eq!(hom.spec.initial, InitialSites::Pair(9, 10));
        let full = RunConfig::default().resolve(Experiment::FullProtocol).unwrap();
        assert_eq!(full.spec.initial, InitialSites::Pair(7, 12));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[model]\nofset = 3.0\n").is_err());
        assert!(RunConfig::parse("seed = 3\n").is_err());
        assert!(RunConfig::parse("[extra]\n").is_err());
        assert!(RunConfig::parse("[disorder]\nkind = \"cauchy\"\n").is_err());
    }

    #[test]
    fn round_trip_preserves_config() {
        let text = r#"
base_seed = 42

[output]
dir = "runs/fig4"
formats = ["csv", "svg"]

[model]
offset = 15.0
cells = 7

[schedule]
kind = "gap_adaptive"
epsilon = 0.02

[disorder]
kind = "normal"
mu = 0.1
sigma = 1.5

[run]
samples = 12
start = [5, 6]
amplitudes = [0.0, 2.0]
method = "rk4"
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        let effective = cfg.resolve(Experiment::Hom).unwrap().effective;
        assert_eq!(RunConfig::parse(&effective.to_toml()).unwrap(), effective);
        assert_eq!(effective.resolve(Experiment::Hom).unwrap().effective, effective);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let bad = |text: &str, e: Experiment| RunConfig::parse(text).unwrap().resolve(e).is_err();
        assert!(bad("[model]\ncells = 0\n", Experiment::PumpFock));
        assert!(bad("[run]\nstart = [7, 19]\n", Experiment::PumpFock));
        assert!(bad("[run]\nstart = [7, 8]\n", Experiment::PumpSingle));
        assert!(bad("[run]\nstart = [1, 2, 3]\n", Experiment::Hom));
        assert!(bad("[run]\nsamples = 0\n", Experiment::Hom));
        assert!(bad("[schedule]\nkind = \"linear\"\n", Experiment::FullProtocol));
        assert!(bad("[run]\namplitudes = [-1.0]\n", Experiment::ScanDisorder));
        assert!(bad("[run]\ngrid = 4\n", Experiment::Chern));
        assert!(bad("[run]\nsteps_per_cycle = 10\n", Experiment::PumpFock));
        assert!(bad(
            "[disorder]\nkind = \"uniform\"\neta = -2.0\n",
            Experiment::PumpFock
        ));
    }
}
