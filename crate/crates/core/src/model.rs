//! Real-space Rice-Mele chain with static on-site disorder, and the phase
//! schedules that drive the pump.
//!
//! Sites are numbered `1..=2L` in the public API; cell `l` owns sites `2l-1`
//! (sublattice A, offset `+Δ`) and `2l` (sublattice B, offset `-Δ`). Matrices
//! and vectors are 0-based, so site `j` lives at row `j - 1`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bloch::clean_gap;
use crate::error::{Error, Result};

/// Static parameters of the modulated chain. Energies in units of `tunneling`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiceMeleParams {
    /// Mean tunneling `J`.
    pub tunneling: f64,
    /// Tunneling modulation amplitude `δ0`.
    pub dimerization: f64,
    /// Staggered offset amplitude `Δ0`.
    pub offset: f64,
    /// Number of unit cells `L`; the chain has `2L` sites.
    pub cells: usize,
    /// Initial modulation phase `φ0`.
    pub phi0: f64,
}

impl Default for RiceMeleParams {
    fn default() -> Self {
        Self {
            tunneling: 1.0,
            dimerization: 1.0,
            offset: 20.0,
            cells: 9,
            phi0: 0.0,
        }
    }
}

impl RiceMeleParams {
    pub fn new(tunneling: f64, dimerization: f64, offset: f64, cells: usize, phi0: f64) -> Result<Self> {
        let params = Self {
            tunneling,
            dimerization,
            offset,
            cells,
            phi0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.tunneling, self.dimerization, self.offset, self.phi0]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.tunneling <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "tunneling must be positive, got {}",
                self.tunneling
            )));
        }
        if self.cells < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 cells, got {}",
                self.cells
            )));
        }
        if self.dimerization == 0.0 || self.offset == 0.0 {
            return Err(Error::InvalidParams(
                "dimerization and offset amplitudes must both be nonzero (gap closes otherwise)".into(),
            ));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        2 * self.cells
    }

    /// Intra-cell tunneling `J1 = J + δ0 sin φ`.
    pub fn intra_hopping(&self, phi: f64) -> f64 {
        self.tunneling + self.dimerization * phi.sin()
    }

    /// Inter-cell tunneling `J2 = J - δ0 sin φ`.
    pub fn inter_hopping(&self, phi: f64) -> f64 {
        self.tunneling - self.dimerization * phi.sin()
    }

    /// Staggered offset `Δ = Δ0 cos φ`.
    pub fn staggered_offset(&self, phi: f64) -> f64 {
        self.offset * phi.cos()
    }
}

/// How the modulation phase advances in time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `φ(t) = ω t + φ0`.
    Linear { omega: f64 },
    /// `dφ/dt = ε G(φ)` with `G` the clean Bloch gap.
    GapAdaptive { epsilon: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub kind: ScheduleKind,
    pub phi0: f64,
}

/// Phase increment per RK4 step is at most `2π / ODE_STEPS_PER_CYCLE`.
pub const ODE_STEPS_PER_CYCLE: usize = 10_000;

impl PhaseSchedule {
    pub fn linear(omega: f64, phi0: f64) -> Self {
        Self {
            kind: ScheduleKind::Linear { omega },
            phi0,
        }
    }

    pub fn gap_adaptive(epsilon: f64, phi0: f64) -> Self {
        Self {
            kind: ScheduleKind::GapAdaptive { epsilon },
            phi0,
        }
    }

    pub fn with_phi0(self, phi0: f64) -> Self {
        Self { phi0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let rate = match self.kind {
            ScheduleKind::Linear { omega } => omega,
            ScheduleKind::GapAdaptive { epsilon } => epsilon,
        };
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "sweep rate must be positive, got {rate}"
            )));
        }
        if !self.phi0.is_finite() {
            return Err(Error::InvalidSchedule("non-finite initial phase".into()));
        }
        Ok(())
    }

    /// `φ(t)` for `t ≥ 0`.
    pub fn phase_at(&self, params: &RiceMeleParams, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidSchedule(format!("time must be non-negative, got {t}")));
        }
        Ok(self.driver(params, t)?.phase(t))
    }

    /// Time needed for the phase to advance by `delta_phi` from `φ0`.
    pub fn time_to_advance(&self, params: &RiceMeleParams, delta_phi: f64) -> Result<f64> {
        self.validate()?;
        if delta_phi.is_nan() || delta_phi < 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "phase advance must be non-negative, got {delta_phi}"
            )));
        }
        match self.kind {
            ScheduleKind::Linear { omega } => Ok(delta_phi / omega),
            ScheduleKind::GapAdaptive { epsilon } => {
                let ode = GapOde::new(params, epsilon);
                Ok(ode.time_to_reach(self.phi0, self.phi0 + delta_phi))
            }
        }
    }

    /// Pump period: the time for one full `2π` advance.
    pub fn period(&self, params: &RiceMeleParams) -> Result<f64> {
        self.time_to_advance(params, TAU)
    }

    /// Precomputes `φ(t)` on `[0, t_end]` for repeated evaluation.
    pub fn driver(&self, params: &RiceMeleParams, t_end: f64) -> Result<PhaseDriver> {
        self.validate()?;
        Ok(match self.kind {
            ScheduleKind::Linear { omega } => PhaseDriver::Linear { omega, phi0: self.phi0 },
            ScheduleKind::GapAdaptive { epsilon } => {
                let ode = GapOde::new(params, epsilon);
                let n = (t_end / ode.step).ceil() as usize + 1;
                let mut phases = Vec::with_capacity(n + 1);
                let mut rates = Vec::with_capacity(n + 1);
                let mut phi = self.phi0;
                phases.push(phi);
                rates.push(ode.rate(phi));
                for _ in 0..n {
                    phi = ode.rk4(phi, ode.step);
                    phases.push(phi);
                    rates.push(ode.rate(phi));
                }
                PhaseDriver::Tabulated {
                    step: ode.step,
                    phases,
                    rates,
                }
            }
        })
    }
}

/// `dφ/dt = ε G(φ)` integrated with classical fixed-step RK4.
struct GapOde {
    params: RiceMeleParams,
    epsilon: f64,
    step: f64,
}

impl GapOde {
    fn new(params: &RiceMeleParams, epsilon: f64) -> Self {
        // G(φ) <= 2 sqrt(Δ0² + 4δ0²) bounds the phase rate, so every 2π
        // advance takes at least ODE_STEPS_PER_CYCLE steps.
        let bound = 2.0 * (params.offset.powi(2) + 4.0 * params.dimerization.powi(2)).sqrt();
        let step = TAU / (ODE_STEPS_PER_CYCLE as f64 * epsilon * bound);
        Self {
            params: *params,
            epsilon,
            step,
        }
    }

    fn rate(&self, phi: f64) -> f64 {
        self.epsilon * clean_gap(&self.params, phi)
    }

    fn rk4(&self, phi: f64, h: f64) -> f64 {
        let k1 = self.rate(phi);
        let k2 = self.rate(phi + 0.5 * h * k1);
        let k3 = self.rate(phi + 0.5 * h * k2);
        let k4 = self.rate(phi + h * k3);
        phi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    fn time_to_reach(&self, phi0: f64, target: f64) -> f64 {
        if target <= phi0 {
            return 0.0;
        }
        let mut t = 0.0;
        let mut phi = phi0;
        loop {
            let next = self.rk4(phi, self.step);
            if next >= target {
                break;
            }
            phi = next;
            t += self.step;
        }
        // Newton on the partial step length.
        let mut s = (target - phi) / self.rate(phi);
        for _ in 0..50 {
            let f = self.rk4(phi, s) - target;
            let ds = f / self.rate(self.rk4(phi, s));
            s -= ds;
            if ds.abs() <= 1e-15 * self.step.max(s.abs()) {
                break;
            }
        }
        t + s
    }
}

/// Evaluates `φ(t)` for a fixed schedule.
#[derive(Clone, Debug)]
pub enum PhaseDriver {
    Linear {
        omega: f64,
        phi0: f64,
    },
    /// Uniform RK4 nodes `t_i = i * step`, cubic Hermite between them.
    Tabulated {
        step: f64,
        phases: Vec<f64>,
        rates: Vec<f64>,
    },
}

impl PhaseDriver {
    pub fn phase(&self, t: f64) -> f64 {
        match self {
            PhaseDriver::Linear { omega, phi0 } => omega * t + phi0,
            PhaseDriver::Tabulated { step, phases, rates } => {
                let last = phases.len() - 1;
                let i = ((t / step).floor().max(0.0) as usize).min(last - 1);
                let s = (t - i as f64 * step) / step;
                let (p0, p1) = (phases[i], phases[i + 1]);
                let (m0, m1) = (rates[i] * step, rates[i + 1] * step);
                let s2 = s * s;
                let s3 = s2 * s;
                (2.0 * s3 - 3.0 * s2 + 1.0) * p0
                    + (s3 - 2.0 * s2 + s) * m0
                    + (-2.0 * s3 + 3.0 * s2) * p1
                    + (s3 - s2) * m1
            }
        }
    }
}

/// Distribution of the static on-site energies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisorderKind {
    None,
    /// `η r_j` with `r_j` uniform on `[-1, 1]`.
    Uniform {
        eta: f64,
    },
    /// `r_j ~ N(μ, σ²)`.
    Normal {
        mu: f64,
        sigma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    pub base_seed: u64,
}

impl DisorderSpec {
    pub fn none() -> Self {
        Self {
            kind: DisorderKind::None,
            base_seed: 0,
        }
    }

    pub fn uniform(eta: f64, base_seed: u64) -> Self {
        Self {
            kind: DisorderKind::Uniform { eta },
            base_seed,
        }
    }

    pub fn normal(mu: f64, sigma: f64, base_seed: u64) -> Self {
        Self {
            kind: DisorderKind::Normal { mu, sigma },
            base_seed,
        }
    }

    /// Same distribution family with its amplitude (`η` or `σ`) replaced.
    pub fn with_amplitude(self, amplitude: f64) -> Self {
        let kind = match self.kind {
            DisorderKind::None => DisorderKind::None,
            DisorderKind::Uniform { .. } => DisorderKind::Uniform { eta: amplitude },
            DisorderKind::Normal { mu, .. } => DisorderKind::Normal { mu, sigma: amplitude },
        };
        Self { kind, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            DisorderKind::None => true,
            DisorderKind::Uniform { eta } => eta.is_finite() && eta >= 0.0,
            DisorderKind::Normal { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidExperiment(format!(
                "bad disorder amplitude in {:?}",
                self.kind
            )))
        }
    }

    /// Seed of the per-sample stream.
    pub fn sample_seed(&self, sample_index: usize) -> u64 {
        splitmix64(splitmix64(self.base_seed) ^ sample_index as u64)
    }

    /// Draws the on-site energies of one ensemble member.
    pub fn sample(&self, n_sites: usize, sample_index: usize) -> DisorderRealization {
        let seed = self.sample_seed(sample_index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let energies = match self.kind {
            DisorderKind::None => vec![0.0; n_sites],
            DisorderKind::Uniform { eta } => (0..n_sites).map(|_| eta * rng.random_range(-1.0..=1.0)).collect(),
            DisorderKind::Normal { mu, sigma } => {
                let dist = Normal::new(mu, sigma).expect("sigma validated non-negative");
                (0..n_sites).map(|_| dist.sample(&mut rng)).collect()
            }
        };
        DisorderRealization { energies, seed }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Static on-site energies of one sample, fixed across all protocol stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub energies: Vec<f64>,
    pub seed: u64,
}

impl DisorderRealization {
    pub fn clean(n_sites: usize) -> Self {
        Self {
            energies: vec![0.0; n_sites],
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

/// Real-space single-particle Hamiltonian at one instant.
///
/// The chain Hamiltonian is real symmetric, so it is stored as such; it is
/// Hermitian as a complex matrix with zero imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleParticleHamiltonian {
    pub matrix: DMatrix<f64>,
    pub phi: f64,
}

impl SingleParticleHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn to_complex(&self) -> DMatrix<num_complex::Complex64> {
        self.matrix.map(|v| num_complex::Complex64::new(v, 0.0))
    }
}

/// Open-boundary chain Hamiltonian at phase `phi`.
pub fn build_hamiltonian(
    params: &RiceMeleParams,
    phi: f64,
    disorder: &DisorderRealization,
) -> Result<SingleParticleHamiltonian> {
    let n = params.n_sites();
    if disorder.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: disorder.len(),
        });
    }
    let mut matrix = DMatrix::zeros(n, n);
    fill_hamiltonian(params, phi, &disorder.energies, &mut matrix);
    Ok(SingleParticleHamiltonian { matrix, phi })
}

/// Writes `H(φ)` into a preallocated `n × n` buffer. Lengths are not checked.
pub(crate) fn fill_hamiltonian(params: &RiceMeleParams, phi: f64, energies: &[f64], out: &mut DMatrix<f64>) {
    let n = params.n_sites();
    let (j1, j2, delta) = (
        params.intra_hopping(phi),
        params.inter_hopping(phi),
        params.staggered_offset(phi),
    );
    out.fill(0.0);
    for i in 0..n {
        let stagger = if i % 2 == 0 { delta } else { -delta };
        out[(i, i)] = stagger + energies[i];
        if i + 1 < n {
            let hop = if i % 2 == 0 { -j1 } else { -j2 };
            out[(i, i + 1)] = hop;
            out[(i + 1, i)] = hop;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn params() -> RiceMeleParams {
        RiceMeleParams::default()
    }

    #[test]
    fn rejects_degenerate_params() {
        assert!(RiceMeleParams::new(1.0, 0.0, 20.0, 9, 0.0).is_err());
        assert!(RiceMeleParams::new(1.0, 1.0, 0.0, 9, 0.0).is_err());
        assert!(RiceMeleParams::new(0.0, 1.0, 20.0, 9, 0.0).is_err());
        assert!(RiceMeleParams::new(1.0, 1.0, 20.0, 1, 0.0).is_err());
        assert!(RiceMeleParams::new(1.0, 1.0, 20.0, 2, 0.0).is_ok());
    }

    #[test]
    fn phase_zero_has_uniform_hopping() {
        let p = params();
        let h = build_hamiltonian(&p, 0.0, &DisorderRealization::clean(18)).unwrap();
        for i in 0..18 {
            let expected = if i % 2 == 0 { 20.0 } else { -20.0 };
            assert_eq!(h.matrix[(i, i)], expected);
        }
        for i in 0..17 {
            assert_eq!(h.matrix[(i, i + 1)], -1.0);
        }
    }

    #[test]
    fn quarter_phase_has_no_offset() {
        let p = params();
        let h = build_hamiltonian(&p, FRAC_PI_2, &DisorderRealization::clean(18)).unwrap();
        for i in 0..18 {
            assert!(h.matrix[(i, i)].abs() < 1e-14);
        }
        assert_eq!(h.matrix[(0, 1)], -2.0);
        assert_eq!(h.matrix[(1, 2)], 0.0);
    }

    #[test]
    fn hand_built_four_site_reference() {
        let p = RiceMeleParams::new(1.0, 1.0, 20.0, 2, 0.0).unwrap();
        let spec = DisorderSpec::uniform(4.0, 17);
        let dis = spec.sample(4, 3);
        // Redraw the stream independently.
        let mut rng = ChaCha8Rng::seed_from_u64(spec.sample_seed(3));
        let r: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
        #[rustfmt::skip]
        let reference = DMatrix::from_row_slice(4, 4, &[
            20.0 + 4.0 * r[0], -1.0, 0.0, 0.0,
            -1.0, -20.0 + 4.0 * r[1], -1.0, 0.0,
            0.0, -1.0, 20.0 + 4.0 * r[2], -1.0,
            0.0, 0.0, -1.0, -20.0 + 4.0 * r[3],
        ]);
        let h = build_hamiltonian(&p, 0.0, &dis).unwrap();
        assert_eq!(h.matrix, reference);
    }

    #[test]
    fn disorder_length_is_checked() {
        let err = build_hamiltonian(&params(), 0.0, &DisorderRealization::clean(10)).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 18,
                found: 10
            }
        ));
    }

    #[test]
    fn linear_schedule_period() {
        let s = PhaseSchedule::linear(0.08, 0.0);
        let tp = s.period(&params()).unwrap();
        assert_eq!(tp, TAU / 0.08);
        assert!((s.phase_at(&params(), tp).unwrap() - TAU).abs() < 1e-12);
    }

    #[test]
    fn adaptive_schedule_starts_at_phi0() {
        let s = PhaseSchedule::gap_adaptive(0.03, 0.7);
        assert_eq!(s.phase_at(&params(), 0.0).unwrap(), 0.7);
    }

    #[test]
    fn rejects_bad_rates_and_times() {
        assert!(PhaseSchedule::linear(0.0, 0.0).phase_at(&params(), 1.0).is_err());
        assert!(PhaseSchedule::gap_adaptive(-0.1, 0.0).phase_at(&params(), 1.0).is_err());
        assert!(PhaseSchedule::linear(0.1, 0.0).phase_at(&params(), -1.0).is_err());
    }

    #[test]
    fn driver_matches_period_endpoint() {
        let p = params();
        let s = PhaseSchedule::gap_adaptive(0.03, 0.0);
        let tp = s.period(&p).unwrap();
        let d = s.driver(&p, tp).unwrap();
        assert!((d.phase(tp) - TAU).abs() < 1e-10);
        let quarter = s.time_to_advance(&p, FRAC_PI_2).unwrap();
        assert!((d.phase(quarter) - FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn no_disorder_is_zero() {
        let d = DisorderSpec::none().sample(18, 5);
        assert!(d.energies.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn disorder_moments() {
        let spec = DisorderSpec::uniform(4.0, 1);
        let draws = spec.sample(1_000_000, 0).energies;
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var / (16.0 / 3.0) - 1.0).abs() < 0.01, "var = {var}");
        assert!(draws.iter().all(|x| x.abs() <= 4.0));

        let spec = DisorderSpec::normal(0.0, 4.0, 1);
        let draws = spec.sample(1_000_000, 0).energies;
        let mean = draws.iter().sum::<f64>() / n;
        let std = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std / 4.0 - 1.0).abs() < 0.01, "std = {std}");
    }

    #[test]
    fn samples_are_distinct_and_reproducible() {
        let spec = DisorderSpec::uniform(1.0, 99);
        assert_eq!(spec.sample(18, 4), spec.sample(18, 4));
        assert_ne!(spec.sample(18, 4).energies, spec.sample(18, 5).energies);
        assert_ne!(
            spec.sample(18, 4).energies,
            DisorderSpec::uniform(1.0, 98).sample(18, 4).energies
        );
    }
}
