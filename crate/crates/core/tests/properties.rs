use std::f64::consts::TAU;

use proptest::prelude::*;
use thouless_core::bloch::{band_gap_on_grid, clean_gap};
use thouless_core::model::{build_hamiltonian, DisorderSpec, PhaseSchedule, RiceMeleParams};

fn params() -> impl Strategy<Value = RiceMeleParams> {
    (0.2f64..3.0, 0.1f64..2.0, 0.5f64..25.0, 2usize..8)
        .prop_map(|(j, d, off, cells)| RiceMeleParams::new(j, d, off, cells, 0.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_symmetric_tridiagonal(p in params(), phi in -10.0f64..10.0, eta in 0.0f64..5.0, seed: u64) {
        let disorder = DisorderSpec::uniform(eta, seed).sample(p.n_sites(), 0);
        let h = build_hamiltonian(&p, phi, &disorder).unwrap().matrix;
        prop_assert!((&h - h.transpose()).amax() < 1e-14);
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if i.abs_diff(j) > 1 {
                    prop_assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn disorder_energies_respect_their_bounds(eta in 0.0f64..6.0, seed: u64, index in 0usize..1000) {
        let r = DisorderSpec::uniform(eta, seed).sample(18, index);
        prop_assert!(r.energies.iter().all(|e| e.abs() <= eta));
        prop_assert_eq!(&r, &DisorderSpec::uniform(eta, seed).sample(18, index));
    }

    #[test]
    fn clean_gap_is_the_band_minimum(p in params(), phi in 0.0f64..TAU) {
        // Even grids contain κ = π, where the gap is smallest.
        let sampled = band_gap_on_grid(&p, phi, 64);
        prop_assert!((sampled - clean_gap(&p, phi)).abs() < 1e-10 * (1.0 + sampled));
    }

    #[test]
    fn gap_adaptive_phase_is_strictly_increasing(
        p in params(), eps in 0.005f64..0.2, phi0 in -3.0f64..3.0, fractions in proptest::collection::vec(0.0f64..1.0, 2..12)
    ) {
        let schedule = PhaseSchedule::gap_adaptive(eps, phi0);
        let period = schedule.period(&p).unwrap();
        let mut times: Vec<f64> = fractions.iter().map(|f| f * period).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let phases: Vec<f64> = times.iter().map(|&t| schedule.phase_at(&p, t).unwrap()).collect();
        prop_assert!(phases.windows(2).all(|w| w[1] > w[0]));
        prop_assert!((schedule.phase_at(&p, period).unwrap() - phi0 - TAU).abs() < 1e-9);
    }
}
