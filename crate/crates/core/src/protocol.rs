//! Staged experiments and disorder-ensemble statistics.
//!
//! Every sample draws one static disorder realization from
//! `(base_seed, sample index)` and keeps it for all of its stages. Samples
//! run on the current rayon pool and are reduced in index order, so serial
//! and parallel runs give identical statistics.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{evolve_single, evolve_two_boson, quench, PropagatorConfig, TimeSpan};
use crate::fock2::{correlation, make_state, ObservableRecord, TwoBosonState, CELL_LENGTH};
use crate::model::{DisorderRealization, DisorderSpec, PhaseSchedule, RiceMeleParams, ScheduleKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SinglePump,
    FockPump,
    DisorderScan,
    Hom,
    FullProtocol,
    ChernCheck,
}

/// Initial occupation, 1-based sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSites {
    Single(usize),
    Pair(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub params: RiceMeleParams,
    pub schedule: PhaseSchedule,
    pub disorder: DisorderSpec,
    pub n_samples: usize,
    pub initial: InitialSites,
    /// Pump cycles per transport stage.
    pub cycles: usize,
    pub propagator: PropagatorConfig,
}

impl ExperimentSpec {
    /// Fock-state pumping from `|7,7⟩` with the linear `ω = 0.08` schedule.
    pub fn fock_pump(disorder: DisorderSpec, n_samples: usize) -> Self {
        Self {
            kind: ExperimentKind::FockPump,
            params: RiceMeleParams::default(),
            schedule: PhaseSchedule::linear(0.08, 0.0),
            disorder,
            n_samples,
            initial: InitialSites::Pair(7, 7),
            cycles: 1,
            propagator: PropagatorConfig::default(),
        }
    }

    /// Interference of `|9,10⟩` under the gap-adaptive `ε = 0.03` schedule.
    pub fn hom(disorder: DisorderSpec, n_samples: usize) -> Self {
        Self {
            kind: ExperimentKind::Hom,
            schedule: PhaseSchedule::gap_adaptive(0.03, 0.0),
            initial: InitialSites::Pair(9, 10),
            ..Self::fock_pump(disorder, n_samples)
        }
    }

    /// Three-stage protocol from `|7,12⟩` under the gap-adaptive schedule.
    pub fn full_protocol(disorder: DisorderSpec, n_samples: usize) -> Self {
        Self {
            kind: ExperimentKind::FullProtocol,
            initial: InitialSites::Pair(7, 12),
            ..Self::hom(disorder, n_samples)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.schedule.validate()?;
        self.disorder.validate()?;
        self.propagator.validate()?;
        if self.n_samples == 0 {
            return Err(Error::InvalidExperiment("need at least one sample".into()));
        }
        if self.cycles == 0 {
            return Err(Error::InvalidExperiment("need at least one pump cycle".into()));
        }
        let n = self.params.n_sites();
        let sites = match self.initial {
            InitialSites::Single(a) => vec![a],
            InitialSites::Pair(a, b) => vec![a, b],
        };
        if let Some(&bad) = sites.iter().find(|&&s| s == 0 || s > n) {
            return Err(Error::SiteOutOfRange { site: bad, n_sites: n });
        }
        let needs_pair = !matches!(self.kind, ExperimentKind::SinglePump | ExperimentKind::ChernCheck);
        if needs_pair && matches!(self.initial, InitialSites::Single(_)) {
            return Err(Error::InvalidExperiment(format!(
                "{:?} needs a two-boson initial state",
                self.kind
            )));
        }
        let adaptive = matches!(self.schedule.kind, ScheduleKind::GapAdaptive { .. });
        if matches!(self.kind, ExperimentKind::FullProtocol | ExperimentKind::Hom) && !adaptive {
            return Err(Error::InvalidExperiment(format!(
                "{:?} requires the gap-adaptive schedule",
                self.kind
            )));
        }
        Ok(())
    }

    fn pair_state(&self) -> Result<TwoBosonState> {
        match self.initial {
            InitialSites::Pair(a, b) => make_state(self.params.n_sites(), a, b),
            InitialSites::Single(a) => make_state(self.params.n_sites(), a, a),
        }
    }

    fn schedule_from(&self, phi0: f64) -> PhaseSchedule {
        self.schedule.with_phi0(phi0)
    }
}

/// Where an initially site-localized particle ends up after `cycles` pumps
/// starting at `phi0`: sites on the higher-energy sublattice follow the upper
/// band (`ν2 = +1`), the others the lower band (`ν1 = -1`).
pub fn pumped_site(params: &RiceMeleParams, site: usize, phi0: f64, cycles: usize) -> Option<usize> {
    let odd_is_upper = params.staggered_offset(phi0) > 0.0;
    let upper = (site % 2 == 1) == odd_is_upper;
    let shift = 2 * cycles as isize * if upper { 1 } else { -1 };
    let target = site as isize + shift;
    (target >= 1 && target <= params.n_sites() as isize).then_some(target as usize)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Ensemble statistics at one recorded time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub t: f64,
    pub phi: f64,
    pub density: Vec<Summary>,
    pub com: Summary,
    /// `ΔP/d` relative to the first record.
    pub shift: Summary,
    pub gamma_max: Summary,
    pub nity: Summary,
    pub fidelity: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleFinal {
    pub index: usize,
    pub seed: u64,
    pub shift: f64,
    pub gamma_max: f64,
    pub nity: f64,
    pub fidelity: Option<f64>,
}

/// Ensemble-mean correlation matrix at a stage boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSnapshot {
    pub label: String,
    pub t: f64,
    pub gamma: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub kind: ExperimentKind,
    pub n_sites: usize,
    pub n_samples: usize,
    pub points: Vec<TimePoint>,
    pub finals: Vec<SampleFinal>,
    pub snapshots: Vec<CorrelationSnapshot>,
    pub seeds: Vec<u64>,
    /// Stage boundary times, starting at 0.
    pub stage_times: Vec<f64>,
    pub max_norm_drift: f64,
    pub max_unitarity_error: f64,
}

impl EnsembleStats {
    pub fn last(&self) -> &TimePoint {
        self.points.last().expect("ensembles record at least two points")
    }

    pub fn final_summary(&self, pick: impl Fn(&SampleFinal) -> Option<f64>) -> Summary {
        Summary::of(self.finals.iter().filter_map(pick))
    }
}

/// One sample's trajectory and diagnostics.
struct SampleRun {
    records: Vec<ObservableRecord>,
    snapshots: Vec<(String, f64, DMatrix<f64>)>,
    stage_times: Vec<f64>,
    seed: u64,
    drift: f64,
    unitarity: f64,
}

fn run_ensemble<F>(spec: &ExperimentSpec, run_one: F) -> Result<EnsembleStats>
where
    F: Fn(&DisorderRealization) -> Result<SampleRun> + Sync,
{
    spec.validate()?;
    let n = spec.params.n_sites();
    let runs: Vec<SampleRun> = (0..spec.n_samples)
        .into_par_iter()
        .map(|index| {
            let disorder = spec.disorder.sample(n, index);
            run_one(&disorder).map_err(|e| Error::SampleFailed {
                index,
                seed: disorder.seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(reduce(spec, &runs))
}

fn reduce(spec: &ExperimentSpec, runs: &[SampleRun]) -> EnsembleStats {
    let n = spec.params.n_sites();
    let first = &runs[0];
    let points = (0..first.records.len())
        .map(|i| {
            let at = |f: &dyn Fn(&SampleRun) -> f64| Summary::of(runs.iter().map(f));
            let shift = |r: &SampleRun| (r.records[i].com - r.records[0].com) / CELL_LENGTH;
            let fidelity = first.records[i]
                .fidelity
                .map(|_| at(&|r| r.records[i].fidelity.unwrap_or(f64::NAN)));
            TimePoint {
                t: first.records[i].t,
                phi: first.records[i].phi,
                density: (0..n).map(|j| at(&|r| r.records[i].density[j])).collect(),
                com: at(&|r| r.records[i].com),
                shift: at(&shift),
                gamma_max: at(&|r| r.records[i].gamma_max),
                nity: at(&|r| r.records[i].nity),
                fidelity,
            }
        })
        .collect();
    let finals = runs
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let last = r.records.last().expect("non-empty trajectory");
            SampleFinal {
                index,
                seed: r.seed,
                shift: (last.com - r.records[0].com) / CELL_LENGTH,
                gamma_max: last.gamma_max,
                nity: last.nity,
                fidelity: last.fidelity,
            }
        })
        .collect();
    let snapshots = first
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, (label, t, _))| {
            let mut mean = DMatrix::zeros(n, n);
            for r in runs {
                mean += &r.snapshots[k].2;
            }
            CorrelationSnapshot {
                label: label.clone(),
                t: *t,
                gamma: mean / runs.len() as f64,
            }
        })
        .collect();
    EnsembleStats {
        kind: spec.kind,
        n_sites: n,
        n_samples: runs.len(),
        points,
        finals,
        snapshots,
        seeds: runs.iter().map(|r| r.seed).collect(),
        stage_times: first.stage_times.clone(),
        max_norm_drift: runs.iter().map(|r| r.drift).fold(0.0, f64::max),
        max_unitarity_error: runs.iter().map(|r| r.unitarity).fold(0.0, f64::max),
    }
}

fn site_vector(n: usize, site: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(n);
    v[site - 1] = Complex64::new(1.0, 0.0);
    v
}

/// A single particle pumped for `cycles` periods from one site.
pub fn run_single_pump(spec: &ExperimentSpec) -> Result<EnsembleStats> {
    let site = match spec.initial {
        InitialSites::Single(a) | InitialSites::Pair(a, _) => a,
    };
    let schedule = spec.schedule_from(spec.params.phi0);
    let period = schedule.period(&spec.params)?;
    run_ensemble(spec, |disorder| {
        let psi0 = site_vector(spec.params.n_sites(), site);
        let span = TimeSpan::new(0.0, spec.cycles as f64 * period);
        let run = evolve_single(&spec.params, &schedule, disorder, &psi0, span, &spec.propagator)?;
        Ok(SampleRun {
            records: run.trajectory,
            snapshots: Vec::new(),
            stage_times: vec![0.0, span.end],
            seed: disorder.seed,
            drift: run.max_norm_drift,
            unitarity: run.unitarity_error,
        })
    })
}

/// Fock-state pumping; fidelity is measured against the ideally pumped state.
pub fn run_fock_pump(spec: &ExperimentSpec) -> Result<EnsembleStats> {
    spec.validate()?;
    let state0 = spec.pair_state()?;
    let phi0 = spec.params.phi0;
    let (a, b) = match spec.initial {
        InitialSites::Pair(a, b) => (a, b),
        InitialSites::Single(a) => (a, a),
    };
    let target = match (
        pumped_site(&spec.params, a, phi0, spec.cycles),
        pumped_site(&spec.params, b, phi0, spec.cycles),
    ) {
        (Some(x), Some(y)) => Some(make_state(spec.params.n_sites(), x, y)?),
        _ => None,
    };
    let schedule = spec.schedule_from(phi0);
    let period = schedule.period(&spec.params)?;
    run_ensemble(spec, |disorder| {
        let span = TimeSpan::new(0.0, spec.cycles as f64 * period);
        let run = evolve_two_boson(
            &spec.params,
            &schedule,
            disorder,
            &state0,
            span,
            &spec.propagator,
            target.as_ref(),
        )?;
        Ok(SampleRun {
            records: run.trajectory,
            snapshots: vec![
                ("start".into(), 0.0, correlation(&state0).gamma),
                ("end".into(), span.end, correlation(&run.final_state).gamma),
            ],
            stage_times: vec![0.0, span.end],
            seed: disorder.seed,
            drift: run.max_norm_drift,
            unitarity: run.unitarity_error,
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub amplitude: f64,
    pub fidelity: Summary,
    pub shift: Summary,
    pub gamma_max: Summary,
}

/// One Fock-pump ensemble per disorder amplitude (`η` or `σ`).
pub fn run_disorder_scan(spec: &ExperimentSpec, amplitudes: &[f64]) -> Result<Vec<ScanRow>> {
    if let Some(a) = amplitudes.iter().find(|a| a.is_nan() || **a < 0.0) {
        return Err(Error::InvalidExperiment(format!(
            "disorder amplitude must be non-negative, got {a}"
        )));
    }
    amplitudes
        .iter()
        .map(|&amplitude| {
            let point = ExperimentSpec {
                kind: ExperimentKind::FockPump,
                disorder: spec.disorder.with_amplitude(amplitude),
                ..spec.clone()
            };
            let stats = run_fock_pump(&point)?;
            Ok(ScanRow {
                amplitude,
                fidelity: stats.final_summary(|f| f.fidelity),
                shift: stats.final_summary(|f| Some(f.shift)),
                gamma_max: stats.final_summary(|f| Some(f.gamma_max)),
            })
        })
        .collect()
}

/// Phase offset set by the quench before the interference stage.
pub const QUENCH_PHASE: f64 = FRAC_PI_2;

/// Timing of the staged protocol for `cycles` pumps per transport stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageClock {
    pub period: f64,
    /// Interference duration: the phase advances `π/2` from the quench phase.
    pub tau: f64,
    pub cycles: usize,
    /// Period of the last stage, starting at phase `π`.
    pub final_period: f64,
}

impl StageClock {
    pub fn new(params: &RiceMeleParams, schedule: &PhaseSchedule, cycles: usize) -> Result<Self> {
        Ok(Self {
            period: schedule.with_phi0(params.phi0).period(params)?,
            tau: schedule.with_phi0(QUENCH_PHASE).time_to_advance(params, FRAC_PI_2)?,
            cycles,
            final_period: schedule.with_phi0(QUENCH_PHASE + FRAC_PI_2).period(params)?,
        })
    }

    /// `{0, nT_p, nT_p + τ, nT_p + τ + nT_p'}`.
    pub fn boundaries(&self) -> [f64; 4] {
        let n = self.cycles as f64;
        let a = n * self.period;
        let b = a + self.tau;
        [0.0, a, b, b + n * self.final_period]
    }
}

/// Interference stage alone: the input enters at `t = nT_p` right after the
/// quench and evolves for `τ`.
pub fn run_hom(spec: &ExperimentSpec) -> Result<EnsembleStats> {
    spec.validate()?;
    let state0 = spec.pair_state()?;
    let clock = StageClock::new(&spec.params, &spec.schedule, spec.cycles)?;
    let [_, start, end, _] = clock.boundaries();
    let params = quench(&spec.params, QUENCH_PHASE);
    let schedule = spec.schedule_from(params.phi0);
    run_ensemble(spec, |disorder| {
        let run = evolve_two_boson(
            &params,
            &schedule,
            disorder,
            &state0,
            TimeSpan::new(0.0, clock.tau),
            &spec.propagator,
            None,
        )?;
        let mut records = run.trajectory;
        for r in &mut records {
            r.t += start;
        }
        Ok(SampleRun {
            records,
            snapshots: vec![
                ("input".into(), start, correlation(&state0).gamma),
                ("output".into(), end, correlation(&run.final_state).gamma),
            ],
            stage_times: vec![start, end],
            seed: disorder.seed,
            drift: run.max_norm_drift,
            unitarity: run.unitarity_error,
        })
    })
}

/// Pump, quench and interfere, pump again, all under one disorder
/// realization per sample. Records of consecutive stages share their
/// boundary time; the quench changes the phase there but not the state.
pub fn run_full_protocol(spec: &ExperimentSpec) -> Result<EnsembleStats> {
    spec.validate()?;
    let state0 = spec.pair_state()?;
    let clock = StageClock::new(&spec.params, &spec.schedule, spec.cycles)?;
    let bounds = clock.boundaries();
    let n = spec.cycles as f64;
    let pump_params = spec.params;
    let pump_schedule = spec.schedule_from(pump_params.phi0);
    let hom_params = quench(&spec.params, QUENCH_PHASE);
    let hom_schedule = spec.schedule_from(QUENCH_PHASE);
    // The last stage continues the phase from π without a further quench.
    let dist_params = quench(&spec.params, QUENCH_PHASE + FRAC_PI_2);
    let dist_schedule = spec.schedule_from(dist_params.phi0);

    run_ensemble(spec, |disorder| {
        let stages = [
            (&pump_params, &pump_schedule, n * clock.period),
            (&hom_params, &hom_schedule, clock.tau),
            (&dist_params, &dist_schedule, n * clock.final_period),
        ];
        let mut state = state0.clone();
        let mut records = Vec::new();
        let mut snapshots = vec![("t=0".to_string(), 0.0, correlation(&state).gamma)];
        let mut drift: f64 = 0.0;
        let mut unitarity: f64 = 0.0;
        let labels = ["t=nTp", "t=nTp+tau", "t=2nTp+tau"];
        for (k, (params, schedule, duration)) in stages.into_iter().enumerate() {
            let run = evolve_two_boson(
                params,
                schedule,
                disorder,
                &state,
                TimeSpan::new(0.0, duration),
                &spec.propagator,
                None,
            )?;
            records.extend(run.trajectory.into_iter().map(|mut r| {
                r.t += bounds[k];
                r
            }));
            state = run.final_state;
            snapshots.push((labels[k].to_string(), bounds[k + 1], correlation(&state).gamma));
            drift = drift.max(run.max_norm_drift);
            unitarity = unitarity.max(run.unitarity_error);
        }
        Ok(SampleRun {
            records,
            snapshots,
            stage_times: bounds.to_vec(),
            seed: disorder.seed,
            drift,
            unitarity,
        })
    })
}

/// Single- and two-particle checks of the pump-driven beam splitter on the
/// cell `(left, left + 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterReport {
    pub left_site: usize,
    pub tau: f64,
    /// `(|a_left|, |a_right|)` for input `|left⟩`.
    pub from_left: (f64, f64),
    /// `(|a_left|, |a_right|)` for input `|left + 1⟩`.
    pub from_right: (f64, f64),
    /// Weight left on `left` for input `(|left⟩ + |left+1⟩)/√2`.
    pub symmetric_to_left: f64,
    /// Weight left on `left + 1` for input `(|left⟩ - |left+1⟩)/√2`.
    pub antisymmetric_to_right: f64,
    /// `Γ_{left,left+1}` after interfering `|left, left+1⟩`: the coincidence dip.
    pub coincidence: f64,
    pub nity: f64,
    /// `|⟨left, left+1|ψ⟩|` after a half sweep `φ: 0 → π` without quench.
    pub no_quench_fidelity: f64,
}

impl BeamSplitterReport {
    pub fn balanced(&self, tolerance: f64) -> bool {
        [self.from_left.0, self.from_left.1, self.from_right.0, self.from_right.1]
            .iter()
            .all(|a| (a - FRAC_1_SQRT_2).abs() <= tolerance)
    }
}

pub fn beam_splitter_check(
    params: &RiceMeleParams,
    schedule: &PhaseSchedule,
    disorder: Option<&DisorderRealization>,
    left_site: usize,
    config: &PropagatorConfig,
) -> Result<BeamSplitterReport> {
    let n = params.n_sites();
    if left_site == 0 || left_site + 1 > n {
        return Err(Error::SiteOutOfRange {
            site: left_site,
            n_sites: n,
        });
    }
    let clean = DisorderRealization::clean(n);
    let disorder = disorder.unwrap_or(&clean);
    let quenched = quench(params, QUENCH_PHASE);
    let bs_schedule = schedule.with_phi0(QUENCH_PHASE);
    let tau = bs_schedule.time_to_advance(&quenched, FRAC_PI_2)?;
    let span = TimeSpan::new(0.0, tau);
    let (l, r) = (left_site - 1, left_site);

    let single = |psi0: DVector<Complex64>| -> Result<DVector<Complex64>> {
        Ok(evolve_single(&quenched, &bs_schedule, disorder, &psi0, span, config)?.final_state)
    };
    let out_left = single(site_vector(n, left_site))?;
    let out_right = single(site_vector(n, left_site + 1))?;
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let out_sym = single((site_vector(n, left_site) + site_vector(n, left_site + 1)) * s)?;
    let out_anti = single((site_vector(n, left_site) - site_vector(n, left_site + 1)) * s)?;

    let pair = make_state(n, left_site, left_site + 1)?;
    let interfered = evolve_two_boson(&quenched, &bs_schedule, disorder, &pair, span, config, None)?.final_state;
    let gamma = correlation(&interfered);

    let unquenched = schedule.with_phi0(params.phi0);
    let half = unquenched.time_to_advance(params, PI)?;
    let swept = evolve_two_boson(
        params,
        &unquenched,
        disorder,
        &pair,
        TimeSpan::new(0.0, half),
        config,
        Some(&pair),
    )?;

    Ok(BeamSplitterReport {
        left_site,
        tau,
        from_left: (out_left[l].norm(), out_left[r].norm()),
        from_right: (out_right[l].norm(), out_right[r].norm()),
        symmetric_to_left: out_sym[l].norm_sqr(),
        antisymmetric_to_right: out_anti[r].norm_sqr(),
        coincidence: gamma.gamma[(l, r)],
        nity: crate::fock2::noonity(&gamma),
        no_quench_fidelity: swept.trajectory.last().and_then(|rec| rec.fidelity).unwrap_or(0.0),
    })
}
