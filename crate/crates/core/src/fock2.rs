//! Two identical bosons on `M = 2L` sites.
//!
//! The symmetric basis `|j, j'⟩`, `j ≤ j'`, is ordered lexicographically.
//! Amplitudes `c_{jj'}` relate to the first-quantized pair matrix
//! `Ψ_{qr} = ⟨q|⟨r|ψ⟩` by `Ψ_{jj} = c_{jj}` and
//! `Ψ_{jj'} = Ψ_{j'j} = c_{jj'} / √2` for `j ≠ j'`, so both carry unit norm.
//! Sites are 1-based in the public API.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymBasis {
    n_sites: usize,
}

impl SymBasis {
    pub fn new(n_sites: usize) -> Self {
        Self { n_sites }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// `M (M + 1) / 2`.
    pub fn dim(&self) -> usize {
        self.n_sites * (self.n_sites + 1) / 2
    }

    /// Index of the 0-based pair `(a, b)` with `a ≤ b < M`.
    pub fn index0(&self, a: usize, b: usize) -> usize {
        debug_assert!(a <= b && b < self.n_sites);
        a * self.n_sites - a * a.saturating_sub(1) / 2 + (b - a)
    }

    /// Index of the 1-based sites `j, j2` in either order.
    pub fn index(&self, j: usize, j2: usize) -> Result<usize> {
        for s in [j, j2] {
            if s == 0 || s > self.n_sites {
                return Err(Error::SiteOutOfRange {
                    site: s,
                    n_sites: self.n_sites,
                });
            }
        }
        let (a, b) = if j <= j2 { (j - 1, j2 - 1) } else { (j2 - 1, j - 1) };
        Ok(self.index0(a, b))
    }

    /// 0-based pairs in basis order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_sites).flat_map(move |a| (a..self.n_sites).map(move |b| (a, b)))
    }
}

/// Normalized two-boson state in the symmetric basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoBosonState {
    pub amplitudes: Vec<Complex64>,
    pub basis: SymBasis,
}

/// `|j, j2⟩` on a chain of `n_sites`.
pub fn make_state(n_sites: usize, j: usize, j2: usize) -> Result<TwoBosonState> {
    let basis = SymBasis::new(n_sites);
    let idx = basis.index(j, j2)?;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
    amplitudes[idx] = Complex64::new(1.0, 0.0);
    Ok(TwoBosonState { amplitudes, basis })
}

impl TwoBosonState {
    pub fn from_amplitudes(basis: SymBasis, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { amplitudes, basis })
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        for a in &mut self.amplitudes {
            *a /= n;
        }
        self
    }

    /// `a |self⟩ + b |other⟩`, unnormalized.
    pub fn superpose(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        self.check_basis(other)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            amplitudes,
            basis: self.basis,
        })
    }

    /// `(|a,a⟩ - |b,b⟩) / √2`.
    pub fn noon(n_sites: usize, a: usize, b: usize) -> Result<Self> {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        make_state(n_sites, a, a)?.superpose(s, &make_state(n_sites, b, b)?, -s)
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_basis(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(x, y)| x.conj() * y)
            .sum())
    }

    fn check_basis(&self, other: &Self) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch {
                left: self.n_sites(),
                right: other.n_sites(),
            });
        }
        Ok(())
    }

    /// First-quantized symmetric pair matrix `Ψ`.
    pub fn to_pair_matrix(&self) -> DMatrix<Complex64> {
        let m = self.n_sites();
        let mut psi = DMatrix::zeros(m, m);
        self.write_pair_matrix(&mut psi);
        psi
    }

    pub(crate) fn write_pair_matrix(&self, psi: &mut DMatrix<Complex64>) {
        for ((a, b), c) in self.basis.pairs().zip(&self.amplitudes) {
            if a == b {
                psi[(a, a)] = *c;
            } else {
                let v = c * FRAC_1_SQRT_2;
                psi[(a, b)] = v;
                psi[(b, a)] = v;
            }
        }
    }

    /// Inverse of [`Self::to_pair_matrix`], symmetrizing the input.
    pub fn from_pair_matrix(psi: &DMatrix<Complex64>) -> Self {
        let basis = SymBasis::new(psi.nrows());
        let mut s = Self {
            amplitudes: vec![Complex64::new(0.0, 0.0); basis.dim()],
            basis,
        };
        s.read_pair_matrix(psi);
        s
    }

    pub(crate) fn read_pair_matrix(&mut self, psi: &DMatrix<Complex64>) {
        for ((a, b), c) in self.basis.pairs().zip(self.amplitudes.iter_mut()) {
            *c = if a == b {
                psi[(a, a)]
            } else {
                (psi[(a, b)] + psi[(b, a)]) * (0.5 * SQRT_2)
            };
        }
    }
}

/// `⟨n_j⟩`, index `j - 1`; sums to 2.
pub fn density(state: &TwoBosonState) -> Vec<f64> {
    let mut n = vec![0.0; state.n_sites()];
    for ((a, b), c) in state.basis.pairs().zip(&state.amplitudes) {
        let p = c.norm_sqr();
        if a == b {
            n[a] += 2.0 * p;
        } else {
            n[a] += p;
            n[b] += p;
        }
    }
    n
}

/// `⟨X⟩ = N^{-1} Σ_j j ⟨n_j⟩` over 1-based sites for `N` particles.
pub fn center_of_mass(density: &[f64], particles: f64) -> f64 {
    density.iter().enumerate().map(|(i, n)| (i + 1) as f64 * n).sum::<f64>() / particles
}

/// `Γ_{qr} = ⟨c†_q c†_r c_r c_q⟩`, symmetric with total weight 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub gamma: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn max_diagonal(&self) -> f64 {
        self.gamma.diagonal().iter().copied().fold(0.0, f64::max)
    }

    pub fn diagonal_sum(&self) -> f64 {
        self.gamma.trace()
    }

    pub fn off_diagonal_sum(&self) -> f64 {
        self.gamma.sum() - self.gamma.trace()
    }
}

pub fn correlation(state: &TwoBosonState) -> CorrelationMatrix {
    let m = state.n_sites();
    let mut gamma = DMatrix::zeros(m, m);
    for ((a, b), c) in state.basis.pairs().zip(&state.amplitudes) {
        let p = c.norm_sqr();
        if a == b {
            gamma[(a, a)] = 2.0 * p;
        } else {
            gamma[(a, b)] = p;
            gamma[(b, a)] = p;
        }
    }
    CorrelationMatrix { gamma }
}

/// `(Σ_q Γ_qq)² - Σ_{q,r} Γ_qr²`.
pub fn noonity(gamma: &CorrelationMatrix) -> f64 {
    let trace = gamma.gamma.trace();
    trace * trace - gamma.gamma.iter().map(|g| g * g).sum::<f64>()
}

/// `|⟨target|state⟩|`.
pub fn fidelity(state: &TwoBosonState, target: &TwoBosonState) -> Result<f64> {
    Ok(target.inner(state)?.norm())
}

/// Observables at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub phi: f64,
    pub density: Vec<f64>,
    pub com: f64,
    pub gamma_max: f64,
    pub nity: f64,
    pub fidelity: Option<f64>,
}

impl ObservableRecord {
    pub fn of_pair(t: f64, phi: f64, state: &TwoBosonState, target: Option<&TwoBosonState>) -> Result<Self> {
        let density = density(state);
        let gamma = correlation(state);
        Ok(Self {
            t,
            phi,
            com: center_of_mass(&density, 2.0),
            density,
            gamma_max: gamma.max_diagonal(),
            nity: noonity(&gamma),
            fidelity: target.map(|tg| fidelity(state, tg)).transpose()?,
        })
    }

    /// A single particle has no pair correlations, so `Γ ≡ 0`.
    pub fn of_single(t: f64, phi: f64, amplitudes: &[Complex64]) -> Self {
        let density: Vec<f64> = amplitudes.iter().map(|a| a.norm_sqr()).collect();
        Self {
            t,
            phi,
            com: center_of_mass(&density, 1.0),
            density,
            gamma_max: 0.0,
            nity: 0.0,
            fidelity: None,
        }
    }
}

/// `(⟨X⟩_end - ⟨X⟩_start) / d`.
pub fn com_shift(start: &ObservableRecord, end: &ObservableRecord, d: f64) -> f64 {
    (end.com - start.com) / d
}

/// Unit-cell length in site units.
pub const CELL_LENGTH: f64 = 2.0;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const M: usize = 18;

    fn random_state(rng: &mut ChaCha8Rng) -> TwoBosonState {
        let basis = SymBasis::new(M);
        let amps = (0..basis.dim())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        TwoBosonState::from_amplitudes(basis, amps).unwrap().normalized()
    }

    /// Brute-force Γ from the pair matrix, `Γ_qr = 2 |Ψ_qr|²`.
    fn gamma_from_pair_matrix(s: &TwoBosonState) -> DMatrix<f64> {
        s.to_pair_matrix().map(|z| 2.0 * z.norm_sqr())
    }

    #[test]
    fn index_map_round_trips() {
        let b = SymBasis::new(M);
        assert_eq!(b.dim(), 171);
        for (i, (a, c)) in b.pairs().enumerate() {
            assert_eq!(b.index0(a, c), i);
            assert_eq!(b.index(c + 1, a + 1).unwrap(), i);
        }
        assert!(b.index(0, 3).is_err());
        assert!(b.index(3, 19).is_err());
    }

    #[test]
    fn fock_state_observables() {
        let s = make_state(M, 7, 7).unwrap();
        assert_eq!(s.norm(), 1.0);
        let n = density(&s);
        assert_eq!(n[6], 2.0);
        assert_eq!(n.iter().sum::<f64>(), 2.0);
        let g = correlation(&s);
        assert_eq!(g.max_diagonal(), 2.0);
        assert_eq!(g.gamma.sum(), 2.0);
        assert_eq!(noonity(&g), 0.0);

        let s = make_state(M, 9, 9).unwrap();
        let g = correlation(&s);
        assert_eq!(g.gamma[(8, 8)], 2.0);
        assert_eq!(g.gamma.sum(), 2.0);
    }

    #[test]
    fn separated_pair_observables() {
        let s = make_state(M, 12, 7).unwrap();
        let n = density(&s);
        assert_eq!((n[6], n[11]), (1.0, 1.0));
        let g = correlation(&s);
        assert_eq!((g.gamma[(6, 11)], g.gamma[(11, 6)]), (1.0, 1.0));
        assert_eq!(g.diagonal_sum(), 0.0);
        assert_eq!(noonity(&g), -2.0);
        assert_eq!(noonity(&correlation(&make_state(M, 9, 10).unwrap())), -2.0);
    }

    #[test]
    fn noon_observables() {
        let s = TwoBosonState::noon(M, 9, 10).unwrap();
        let n = density(&s);
        assert!((n[8] - 1.0).abs() < 1e-15 && (n[9] - 1.0).abs() < 1e-15);
        let g = correlation(&s);
        assert!((g.gamma[(8, 8)] - 1.0).abs() < 1e-15);
        assert!((g.gamma[(9, 9)] - 1.0).abs() < 1e-15);
        assert_eq!(g.gamma[(8, 9)], 0.0);
        assert!((noonity(&g) - 2.0).abs() < 1e-14);
        // Global phase and branch relabeling.
        let swapped = TwoBosonState::noon(M, 10, 9).unwrap();
        assert!((noonity(&correlation(&swapped)) - 2.0).abs() < 1e-14);
        let phased = s
            .superpose(Complex64::from_polar(1.0, 0.7), &s, Complex64::new(0.0, 0.0))
            .unwrap();
        assert!((noonity(&correlation(&phased)) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn fidelity_cases() {
        let a = make_state(M, 4, 4).unwrap();
        let b = make_state(M, 5, 5).unwrap();
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        let noon = TwoBosonState::noon(M, 4, 5).unwrap();
        assert!((fidelity(&noon, &a).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
        let other = make_state(10, 4, 4).unwrap();
        assert!(matches!(fidelity(&a, &other), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn out_of_range_site() {
        assert!(matches!(make_state(M, 0, 3), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(make_state(M, 3, 19), Err(Error::SiteOutOfRange { .. })));
    }

    #[test]
    fn com_shift_of_pumped_fock_state() {
        let start = ObservableRecord::of_pair(0.0, 0.0, &make_state(M, 7, 7).unwrap(), None).unwrap();
        let end = ObservableRecord::of_pair(1.0, 0.0, &make_state(M, 9, 9).unwrap(), None).unwrap();
        assert_eq!(com_shift(&start, &end, CELL_LENGTH), 1.0);
        assert_eq!(com_shift(&start, &start, CELL_LENGTH), 0.0);
        let both = ObservableRecord::of_pair(0.0, 0.0, &make_state(M, 7, 12).unwrap(), None).unwrap();
        let after = ObservableRecord::of_pair(1.0, 0.0, &make_state(M, 9, 10).unwrap(), None).unwrap();
        assert_eq!(com_shift(&both, &after, CELL_LENGTH), 0.0);
    }

    #[test]
    fn random_states_satisfy_sum_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let s = random_state(&mut rng);
            let n = density(&s);
            assert!((n.iter().sum::<f64>() - 2.0).abs() < 1e-12);
            assert!(n.iter().all(|&x| x >= 0.0));
            let g = correlation(&s);
            assert!((g.gamma.sum() - 2.0).abs() < 1e-12);
            assert!((&g.gamma - g.gamma.transpose()).amax() == 0.0);
            assert!((&g.gamma - gamma_from_pair_matrix(&s)).amax() < 1e-14);
            let back = TwoBosonState::from_pair_matrix(&s.to_pair_matrix());
            assert!((fidelity(&back, &s).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    /// Empirical range check over 10⁵ random states: dense random states and
    /// states supported on two sites. Bunched superpositions over three or
    /// more sites can exceed 2, so this is not a bound on every state.
    #[test]
    fn noonity_empirical_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = SymBasis::new(M);
        for i in 0..100_000 {
            let s = if i % 2 == 0 {
                random_state(&mut rng)
            } else {
                let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
                let a = rng.random_range(0..M);
                let b = rng.random_range(0..M);
                for (x, y) in [(a, a), (b, b), (a.min(b), a.max(b))] {
                    amps[basis.index0(x, y)] +=
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
                match TwoBosonState::from_amplitudes(basis, amps) {
                    Ok(s) if s.norm() > 1e-6 => s.normalized(),
                    _ => continue,
                }
            };
            let nity = noonity(&correlation(&s));
            assert!((-2.0 - 1e-12..=2.0 + 1e-12).contains(&nity), "nity = {nity}");
        }
    }
}
