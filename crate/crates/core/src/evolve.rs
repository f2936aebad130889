//! Time-dependent propagation of one particle or two non-interacting bosons.
//!
//! Two-boson states are propagated inside the symmetric subspace through
//! their pair matrix `Ψ`: a single-particle step `U` acts as
//! `Ψ → U Ψ Uᵀ`, the restriction of `U ⊗ U` to symmetric states.
//! [`permanent_oracle`] rebuilds the same output from the accumulated
//! single-particle propagator by `2 × 2` permanents.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock2::{ObservableRecord, TwoBosonState};
use crate::model::{fill_hamiltonian, DisorderRealization, PhaseDriver, PhaseSchedule, RiceMeleParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact exponential of the midpoint Hamiltonian (second-order Magnus).
    MidpointExponential,
    /// Classical fourth-order Runge-Kutta; not norm-preserving.
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    /// Target number of steps per pump period; sets `dt = T_p / steps_per_cycle`.
    pub steps_per_cycle: usize,
    pub method: Method,
    /// Bound on norm drift and propagator non-unitarity.
    pub tolerance: f64,
    /// Evenly spaced observation points per evolution, both ends included.
    pub records: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            steps_per_cycle: 20_000,
            method: Method::MidpointExponential,
            tolerance: 1e-8,
            records: 400,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_cycle < 1000 {
            return Err(Error::InvalidExperiment(format!(
                "steps_per_cycle must be at least 1000, got {}",
                self.steps_per_cycle
            )));
        }
        if self.records < 2 {
            return Err(Error::InvalidExperiment("need at least 2 records per evolution".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidExperiment("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Same configuration with the step size halved.
    pub fn refined(self) -> Self {
        Self {
            steps_per_cycle: 2 * self.steps_per_cycle,
            ..self
        }
    }
}

/// Schedule-local interval `[start, end]`; `t = 0` is where the schedule's
/// phase equals its `phi0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start: f64,
    pub end: f64,
}

impl TimeSpan {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult<S> {
    pub final_state: S,
    pub trajectory: Vec<ObservableRecord>,
    /// Accumulated single-particle propagator over the span.
    pub propagator: DMatrix<Complex64>,
    pub steps: usize,
    pub dt: f64,
    /// Largest `| ‖ψ‖ - 1 |` seen at the observation points.
    pub max_norm_drift: f64,
    /// `max |U†U - I|` of the returned propagator.
    pub unitarity_error: f64,
}

pub type SingleState = DVector<Complex64>;

pub fn evolve_single(
    params: &RiceMeleParams,
    schedule: &PhaseSchedule,
    disorder: &DisorderRealization,
    psi0: &SingleState,
    span: TimeSpan,
    config: &PropagatorConfig,
) -> Result<EvolutionResult<SingleState>> {
    let n = params.n_sites();
    if psi0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: psi0.len(),
        });
    }
    let state = DMatrix::from_column_slice(n, 1, psi0.as_slice());
    let run = integrate(
        params,
        schedule,
        disorder,
        state,
        Lift::Single,
        span,
        config,
        &|t, phi, s| Ok(ObservableRecord::of_single(t, phi, s.as_slice())),
    )?;
    Ok(EvolutionResult {
        final_state: DVector::from_column_slice(run.state.as_slice()),
        trajectory: run.records,
        propagator: run.propagator,
        steps: run.steps,
        dt: run.dt,
        max_norm_drift: run.max_norm_drift,
        unitarity_error: run.unitarity_error,
    })
}

/// Evolves `state0`; `target`, when given, fills each record's fidelity.
#[allow(clippy::too_many_arguments)]
pub fn evolve_two_boson(
    params: &RiceMeleParams,
    schedule: &PhaseSchedule,
    disorder: &DisorderRealization,
    state0: &TwoBosonState,
    span: TimeSpan,
    config: &PropagatorConfig,
    target: Option<&TwoBosonState>,
) -> Result<EvolutionResult<TwoBosonState>> {
    let n = params.n_sites();
    if state0.n_sites() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: state0.n_sites(),
        });
    }
    let run = integrate(
        params,
        schedule,
        disorder,
        state0.to_pair_matrix(),
        Lift::Pair,
        span,
        config,
        &|t, phi, psi| ObservableRecord::of_pair(t, phi, &TwoBosonState::from_pair_matrix(psi), target),
    )?;
    // The pair-matrix round trip is exact only up to rounding; observe the
    // caller's state itself at the start so chained stages agree bit for bit.
    let mut records = run.records;
    records[0] = ObservableRecord::of_pair(records[0].t, records[0].phi, state0, target)?;
    let final_state = if run.steps == 0 {
        let first = records[0].clone();
        records.fill(first);
        state0.clone()
    } else {
        TwoBosonState::from_pair_matrix(&run.state)
    };
    Ok(EvolutionResult {
        final_state,
        trajectory: records,
        propagator: run.propagator,
        steps: run.steps,
        dt: run.dt,
        max_norm_drift: run.max_norm_drift,
        unitarity_error: run.unitarity_error,
    })
}

/// How a single-particle operator acts on the stored state matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Lift {
    /// Column vector `ψ`: `U ψ`.
    Single,
    /// Symmetric pair matrix `Ψ`: `U Ψ Uᵀ`.
    Pair,
}

struct RawRun {
    state: DMatrix<Complex64>,
    records: Vec<ObservableRecord>,
    propagator: DMatrix<Complex64>,
    steps: usize,
    dt: f64,
    max_norm_drift: f64,
    unitarity_error: f64,
}

type Observe<'a> = dyn Fn(f64, f64, &DMatrix<Complex64>) -> Result<ObservableRecord> + 'a;

#[allow(clippy::too_many_arguments)]
fn integrate(
    params: &RiceMeleParams,
    schedule: &PhaseSchedule,
    disorder: &DisorderRealization,
    mut state: DMatrix<Complex64>,
    lift: Lift,
    span: TimeSpan,
    config: &PropagatorConfig,
    observe: &Observe<'_>,
) -> Result<RawRun> {
    config.validate()?;
    params.validate()?;
    let n = params.n_sites();
    if disorder.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: disorder.len(),
        });
    }
    if !(span.start >= 0.0 && span.end >= span.start) {
        return Err(Error::InvalidSchedule(format!(
            "bad time span [{}, {}]",
            span.start, span.end
        )));
    }
    let norm0 = state.norm();
    if (norm0 - 1.0).abs() > config.tolerance {
        return Err(Error::InvalidExperiment(format!(
            "initial state not normalized (norm {norm0})"
        )));
    }

    let driver = schedule.driver(params, span.end)?;
    let intervals = config.records - 1;
    let duration = span.duration();
    let (steps, dt) = if duration == 0.0 {
        (0, 0.0)
    } else {
        let target_dt = schedule.period(params)? / config.steps_per_cycle as f64;
        let per_record = ((duration / target_dt) / intervals as f64).ceil().max(1.0) as usize;
        let steps = per_record * intervals;
        (steps, duration / steps as f64)
    };

    let mut kernel = Kernel::new(n);
    let mut propagator = DMatrix::<Complex64>::identity(n, n);
    let mut records = Vec::with_capacity(config.records);
    let mut max_drift: f64 = 0.0;

    let record = |k: usize, state: &DMatrix<Complex64>, records: &mut Vec<ObservableRecord>, max_drift: &mut f64| {
        let t = span.start + k as f64 * dt;
        let drift = (state.norm() - 1.0).abs();
        *max_drift = max_drift.max(drift);
        if drift > config.tolerance {
            return Err(Error::IntegrationFailure {
                t,
                drift,
                tolerance: config.tolerance,
                steps,
                dt,
            });
        }
        records.push(observe(t, driver.phase(t), state)?);
        Ok(())
    };

    if steps == 0 {
        for _ in 0..config.records {
            record(0, &state, &mut records, &mut max_drift)?;
        }
    } else {
        let stride = steps / intervals;
        record(0, &state, &mut records, &mut max_drift)?;
        for k in 0..steps {
            let t = span.start + k as f64 * dt;
            match config.method {
                Method::MidpointExponential => {
                    kernel.midpoint_step(params, &driver, &disorder.energies, t, dt);
                    kernel.apply(lift, &mut state);
                    kernel.accumulate(&mut propagator);
                }
                Method::Rk4 => {
                    kernel.rk4_step(params, &driver, &disorder.energies, t, dt, lift, &mut state);
                    kernel.rk4_step(
                        params,
                        &driver,
                        &disorder.energies,
                        t,
                        dt,
                        Lift::Single,
                        &mut propagator,
                    );
                }
            }
            if (k + 1) % stride == 0 {
                record(k + 1, &state, &mut records, &mut max_drift)?;
            }
        }
    }

    let unitarity_error = unitarity_error(&propagator);
    if unitarity_error > config.tolerance {
        return Err(Error::NonUnitary {
            deviation: unitarity_error,
        });
    }
    Ok(RawRun {
        state,
        records,
        propagator,
        steps,
        dt,
        max_norm_drift: max_drift,
        unitarity_error,
    })
}

/// Preallocated buffers for one step.
struct Kernel {
    h: DMatrix<f64>,
    step: DMatrix<Complex64>,
    weighted: DMatrix<Complex64>,
    tmp: DMatrix<Complex64>,
}

impl Kernel {
    fn new(n: usize) -> Self {
        Self {
            h: DMatrix::zeros(n, n),
            step: DMatrix::zeros(n, n),
            weighted: DMatrix::zeros(n, n),
            tmp: DMatrix::zeros(n, n),
        }
    }

    /// `step = exp(-i H(φ(t + dt/2)) dt)` from the real symmetric eigenbasis.
    fn midpoint_step(&mut self, params: &RiceMeleParams, driver: &PhaseDriver, energies: &[f64], t: f64, dt: f64) {
        fill_hamiltonian(params, driver.phase(t + 0.5 * dt), energies, &mut self.h);
        let eig = SymmetricEigen::new(self.h.clone());
        let n = self.h.nrows();
        let v = &eig.eigenvectors;
        for k in 0..n {
            let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * dt);
            for a in 0..n {
                self.weighted[(a, k)] = phase * v[(a, k)];
            }
        }
        for b in 0..n {
            for a in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.weighted[(a, k)] * v[(b, k)];
                }
                self.step[(a, b)] = acc;
            }
        }
    }

    fn apply(&mut self, lift: Lift, state: &mut DMatrix<Complex64>) {
        match lift {
            Lift::Single => {
                self.step.mul_to(state, &mut self.tmp.columns_mut(0, state.ncols()));
                state.copy_from(&self.tmp.columns(0, state.ncols()));
            }
            Lift::Pair => {
                self.step.mul_to(state, &mut self.tmp);
                self.tmp.mul_to(&self.step.transpose(), state);
            }
        }
    }

    fn accumulate(&mut self, propagator: &mut DMatrix<Complex64>) {
        self.step.mul_to(propagator, &mut self.tmp);
        propagator.copy_from(&self.tmp);
    }

    /// `dX/dt = -i G(X)` with `G = H X` (single) or `H X + X H` (pair).
    fn generator(
        &mut self,
        params: &RiceMeleParams,
        phi: f64,
        energies: &[f64],
        lift: Lift,
        x: &DMatrix<Complex64>,
    ) -> DMatrix<Complex64> {
        fill_hamiltonian(params, phi, energies, &mut self.h);
        let hc = self.h.map(|v| Complex64::new(v, 0.0));
        let mut g = &hc * x;
        if lift == Lift::Pair {
            g += x * &hc;
        }
        g * MINUS_I
    }

    #[allow(clippy::too_many_arguments)]
    fn rk4_step(
        &mut self,
        params: &RiceMeleParams,
        driver: &PhaseDriver,
        energies: &[f64],
        t: f64,
        dt: f64,
        lift: Lift,
        x: &mut DMatrix<Complex64>,
    ) {
        let half = Complex64::new(0.5 * dt, 0.0);
        let full = Complex64::new(dt, 0.0);
        let (p0, pm, p1) = (driver.phase(t), driver.phase(t + 0.5 * dt), driver.phase(t + dt));
        let k1 = self.generator(params, p0, energies, lift, x);
        let k2 = self.generator(params, pm, energies, lift, &(&*x + &k1 * half));
        let k3 = self.generator(params, pm, energies, lift, &(&*x + &k2 * half));
        let k4 = self.generator(params, p1, energies, lift, &(&*x + &k3 * full));
        *x += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0);
    }
}

/// `max |U†U - I|`.
pub fn unitarity_error(u: &DMatrix<Complex64>) -> f64 {
    let gram = u.adjoint() * u;
    let n = u.nrows();
    (&gram - DMatrix::<Complex64>::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Two-boson output of a single-particle propagator by permanents:
/// `⟨k,l|U⊗U|i,j⟩ = perm(U[{k,l},{i,j}]) / sqrt((1+δ_kl)(1+δ_ij))`.
pub fn permanent_oracle(propagator: &DMatrix<Complex64>, state0: &TwoBosonState) -> Result<TwoBosonState> {
    let n = state0.n_sites();
    if propagator.nrows() != n || propagator.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: propagator.nrows(),
        });
    }
    let deviation = unitarity_error(propagator);
    if deviation > 1e-8 {
        return Err(Error::NonUnitary { deviation });
    }
    let basis = state0.basis;
    let inputs: Vec<((usize, usize), Complex64)> = basis
        .pairs()
        .zip(state0.amplitudes.iter().copied())
        .filter(|(_, c)| *c != ZERO)
        .collect();
    let u = propagator;
    let amplitudes = basis
        .pairs()
        .map(|(k, l)| {
            inputs
                .iter()
                .map(|&((i, j), c)| {
                    let perm = u[(k, i)] * u[(l, j)] + u[(k, j)] * u[(l, i)];
                    let norm = (if k == l { 2.0f64 } else { 1.0 }) * (if i == j { 2.0 } else { 1.0 });
                    c * perm / norm.sqrt()
                })
                .sum()
        })
        .collect();
    TwoBosonState::from_amplitudes(basis, amplitudes)
}

/// Sudden change of the modulation phase offset; states are untouched.
pub fn quench(params: &RiceMeleParams, new_phi0: f64) -> RiceMeleParams {
    RiceMeleParams {
        phi0: new_phi0,
        ..*params
    }
}

/// `exp(-i H t)` for a static real symmetric `H`.
pub fn static_propagator(h: &DMatrix<f64>, t: f64) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(h.clone());
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * t)));
    &v * d * v.adjoint()
}
