//! Momentum-space analysis of the clean chain.
//!
//! Momenta are dimensionless, `κ = k d ∈ (-π, π]`. With Bloch states
//! `ψ(l, s) = e^{iκ l} u_s(κ) / √L` over cells `l` and sublattices
//! `s ∈ {A, B}`, the real-space chain maps to
//!
//! ```text
//! H(κ, φ) = [[ Δ,                      -(J1 + J2 e^{-iκ}) ],
//!            [ -(J1 + J2 e^{+iκ}),     -Δ                 ]]
//! ```
//!
//! which is `2π`-periodic in `κ`. Chern numbers are link-variable integrals
//! over the `(κ, φ)` torus with `κ` as the first axis and the pump phase
//! as the second; with this orientation the upper band carries `+1`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DVector, Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RiceMeleParams;

pub const DEFAULT_GAP_GRID: usize = 2048;

/// Band index: `Lower` is band 1, `Upper` is band 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    Lower,
    Upper,
}

impl Band {
    pub fn index(self) -> usize {
        match self {
            Band::Lower => 1,
            Band::Upper => 2,
        }
    }

    pub fn from_index(n: usize) -> Option<Self> {
        match n {
            1 => Some(Band::Lower),
            2 => Some(Band::Upper),
            _ => None,
        }
    }
}

pub fn bloch_hamiltonian(params: &RiceMeleParams, kappa: f64, phi: f64) -> Matrix2<Complex64> {
    let delta = params.staggered_offset(phi);
    let (j1, j2) = (params.intra_hopping(phi), params.inter_hopping(phi));
    let off = -(Complex64::new(j1, 0.0) + j2 * Complex64::from_polar(1.0, -kappa));
    Matrix2::new(Complex64::new(delta, 0.0), off, off.conj(), Complex64::new(-delta, 0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandSolution {
    /// `(E1, E2)` with `E1 < E2`.
    pub energies: (f64, f64),
    /// Normalized eigenvectors `(lower, upper)`.
    pub states: (Vector2<Complex64>, Vector2<Complex64>),
}

impl BandSolution {
    pub fn state(&self, band: Band) -> &Vector2<Complex64> {
        match band {
            Band::Lower => &self.states.0,
            Band::Upper => &self.states.1,
        }
    }
}

/// Closed-form diagonalization of the traceless `2 × 2` Bloch matrix.
pub fn bands(params: &RiceMeleParams, kappa: f64, phi: f64) -> BandSolution {
    let h = bloch_hamiltonian(params, kappa, phi);
    let a = h[(0, 0)].re;
    let b = h[(0, 1)];
    let r = (a * a + b.norm_sqr()).sqrt();
    // Pick the branch whose components do not cancel.
    let (upper, lower) = if a >= 0.0 {
        (
            Vector2::new(Complex64::new(r + a, 0.0), b.conj()),
            Vector2::new(-b, Complex64::new(r + a, 0.0)),
        )
    } else {
        (
            Vector2::new(b, Complex64::new(r - a, 0.0)),
            Vector2::new(Complex64::new(r - a, 0.0), -b.conj()),
        )
    };
    BandSolution {
        energies: (-r, r),
        states: (lower.normalize(), upper.normalize()),
    }
}

/// Exact clean gap `min_κ (E2 - E1) = 2 sqrt(Δ² + (|J1| - |J2|)²)`.
pub fn clean_gap(params: &RiceMeleParams, phi: f64) -> f64 {
    let delta = params.staggered_offset(phi);
    let spread = params.intra_hopping(phi).abs() - params.inter_hopping(phi).abs();
    2.0 * (delta * delta + spread * spread).sqrt()
}

/// Gap minimized over the default momentum grid.
pub fn band_gap(params: &RiceMeleParams, phi: f64) -> f64 {
    band_gap_on_grid(params, phi, DEFAULT_GAP_GRID)
}

/// Gap minimized over `κ_m = -π + 2π (m + 1) / n`; even `n` includes `κ = 0, π`.
pub fn band_gap_on_grid(params: &RiceMeleParams, phi: f64, n: usize) -> f64 {
    (0..n)
        .map(|m| {
            let kappa = -PI + TAU * (m + 1) as f64 / n as f64;
            let e = bands(params, kappa, phi).energies;
            e.1 - e.0
        })
        .fold(f64::INFINITY, f64::min)
}

/// Direction in which the pump phase runs around the torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PumpOrientation {
    Forward,
    Reversed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernResult {
    pub nu1: i32,
    pub nu2: i32,
    pub grid: (usize, usize),
    /// Link-variable sums before rounding, `(band 1, band 2)`.
    pub raw: (f64, f64),
}

pub fn chern_numbers(params: &RiceMeleParams, nk: usize, nt: usize) -> Result<ChernResult> {
    chern_numbers_oriented(params, nk, nt, PumpOrientation::Forward)
}

pub fn chern_numbers_oriented(
    params: &RiceMeleParams,
    nk: usize,
    nt: usize,
    orientation: PumpOrientation,
) -> Result<ChernResult> {
    if nk < 16 || nt < 16 {
        return Err(Error::InvalidParams(format!(
            "Chern grid must be at least 16 x 16, got {nk} x {nt}"
        )));
    }
    let sign = match orientation {
        PumpOrientation::Forward => 1.0,
        PumpOrientation::Reversed => -1.0,
    };
    let solutions: Vec<Vec<BandSolution>> = (0..nk)
        .map(|i| {
            let kappa = -PI + TAU * i as f64 / nk as f64;
            (0..nt)
                .map(|j| bands(params, kappa, sign * TAU * j as f64 / nt as f64))
                .collect()
        })
        .collect();
    let mut raw = [0.0; 2];
    for (slot, band) in [Band::Lower, Band::Upper].into_iter().enumerate() {
        let states: Vec<Vec<Vector2<Complex64>>> = solutions
            .iter()
            .map(|row| row.iter().map(|s| *s.state(band)).collect())
            .collect();
        raw[slot] = chern_from_states(&states);
    }
    let round = |x: f64| -> Result<i32> {
        let r = x.round();
        if (x - r).abs() > 0.01 {
            Err(Error::GridTooCoarse { raw: x })
        } else {
            Ok(r as i32)
        }
    };
    Ok(ChernResult {
        nu1: round(raw[0])?,
        nu2: round(raw[1])?,
        grid: (nk, nt),
        raw: (raw[0], raw[1]),
    })
}

/// Link-variable Chern integral of one band sampled on a periodic grid,
/// `states[i][j]` at momentum `i` and phase `j`. Invariant under any
/// per-point phase of the states.
pub fn chern_from_states(states: &[Vec<Vector2<Complex64>>]) -> f64 {
    let nk = states.len();
    let nt = states[0].len();
    let link = |a: &Vector2<Complex64>, b: &Vector2<Complex64>| {
        let z = a.dotc(b);
        z / z.norm()
    };
    let mut total = 0.0;
    for i in 0..nk {
        let ip = (i + 1) % nk;
        for j in 0..nt {
            let jp = (j + 1) % nt;
            let loop_product = link(&states[i][j], &states[ip][j])
                * link(&states[ip][j], &states[ip][jp])
                * link(&states[ip][jp], &states[i][jp])
                * link(&states[i][jp], &states[i][j]);
            total += loop_product.arg();
        }
    }
    total / TAU
}

/// Lattice Wannier function of one band on the ring of `L` cells.
#[derive(Clone, Debug, PartialEq)]
pub struct WannierState {
    pub band: Band,
    /// Home cell, `1..=L`.
    pub cell: usize,
    /// Amplitudes on sites `1..=2L` (index `j - 1`).
    pub amplitudes: DVector<Complex64>,
}

/// Wannier state from the `L` allowed momenta `κ_m = 2π m / L`, in the
/// parallel-transport gauge with the winding phase spread evenly over the
/// links. The largest amplitude is made real and positive.
pub fn wannier_state(params: &RiceMeleParams, phi: f64, band: Band, cell: usize) -> Result<WannierState> {
    let cells = params.cells;
    if cell == 0 || cell > cells {
        return Err(Error::SiteOutOfRange {
            site: cell,
            n_sites: cells,
        });
    }
    let kappas: Vec<f64> = (0..cells).map(|m| TAU * m as f64 / cells as f64).collect();
    let mut us: Vec<Vector2<Complex64>> = kappas.iter().map(|&k| *bands(params, k, phi).state(band)).collect();
    for m in 1..cells {
        let overlap = us[m - 1].dotc(&us[m]);
        let fix = overlap.conj() / overlap.norm();
        us[m] *= fix;
    }
    let closing = us[cells - 1].dotc(&us[0]).arg();
    for (m, u) in us.iter_mut().enumerate() {
        *u *= Complex64::from_polar(1.0, closing * m as f64 / cells as f64);
    }

    let mut amplitudes = DVector::zeros(2 * cells);
    for l in 1..=cells {
        let shift = l as f64 - cell as f64;
        let mut acc = Vector2::zeros();
        for (k, u) in kappas.iter().zip(&us) {
            acc += u * Complex64::from_polar(1.0, k * shift);
        }
        acc /= Complex64::new(cells as f64, 0.0);
        amplitudes[2 * (l - 1)] = acc[0];
        amplitudes[2 * (l - 1) + 1] = acc[1];
    }
    let peak = amplitudes
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("non-empty chain");
    amplitudes *= peak.conj() / peak.norm();
    Ok(WannierState { band, cell, amplitudes })
}

/// `Σ_j j |a_j|²` over 1-based sites.
pub fn com_of_amplitudes(amplitudes: &DVector<Complex64>) -> f64 {
    amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| (i + 1) as f64 * a.norm_sqr())
        .sum()
}

pub fn com_of_wannier(w: &WannierState) -> f64 {
    com_of_amplitudes(&w.amplitudes)
}

/// Center of mass `N^{-1} Σ j ⟨n_j⟩` of two bosons in orthogonal Wannier
/// states, or a doubly occupied one.
pub fn com_of_wannier_pair(a: &WannierState, b: &WannierState) -> f64 {
    0.5 * (com_of_wannier(a) + com_of_wannier(b))
}

/// Inverse participation ratio `1 / Σ |a_j|⁴`, in sites.
pub fn participation_ratio(amplitudes: &DVector<Complex64>) -> f64 {
    1.0 / amplitudes.iter().map(|a| a.norm_sqr().powi(2)).sum::<f64>()
}
