//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails. Full-size ensembles (100 samples,
//! 20 000 steps per cycle); expect roughly twenty minutes on one core.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thouless_cli::output::{correlations_table, samples_table, stats_table};
use thouless_core::bloch::{band_gap, chern_numbers};
use thouless_core::evolve::{evolve_two_boson, permanent_oracle, PropagatorConfig, TimeSpan};
use thouless_core::fock2::{make_state, SymBasis, TwoBosonState};
use thouless_core::model::{DisorderSpec, PhaseSchedule, RiceMeleParams};
use thouless_core::protocol::{
    run_fock_pump, run_full_protocol, run_hom, EnsembleStats, ExperimentKind, ExperimentSpec, StageClock,
};

const SAMPLES: usize = 100;
const SEED: u64 = 1;
const HYGIENE: f64 = 1e-8;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Accumulates sub-checks of one criterion.
struct Checks {
    ok: bool,
    parts: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            ok: true,
            parts: Vec::new(),
        }
    }

    fn check(&mut self, pass: bool, text: String) {
        self.ok &= pass;
        self.parts.push(if pass { text } else { format!("{text} [FAIL]") });
    }

    fn done(self) -> Outcome {
        Outcome {
            pass: self.ok,
            detail: self.parts.join("; "),
        }
    }
}

/// Every ensemble the suite runs, kept for the hygiene criterion and reused
/// across criteria that share a configuration.
#[derive(Default)]
struct Runs {
    ensembles: BTreeMap<String, (EnsembleStats, Duration)>,
}

impl Runs {
    fn get(&mut self, key: &str, run: impl FnOnce() -> EnsembleStats) -> &EnsembleStats {
        &self
            .ensembles
            .entry(key.to_string())
            .or_insert_with(|| {
                eprintln!("  running {key} ...");
                let start = Instant::now();
                let stats = run();
                let elapsed = start.elapsed();
                eprintln!("  {key}: {:.1} s", elapsed.as_secs_f64());
                (stats, elapsed)
            })
            .0
    }

    fn elapsed(&self, key: &str) -> Duration {
        self.ensembles[key].1
    }

    fn fock(&mut self, label: &str, disorder: DisorderSpec, samples: usize) -> &EnsembleStats {
        self.get(&format!("fock {label}"), || {
            run_fock_pump(&ExperimentSpec::fock_pump(disorder, samples)).expect("fock pump")
        })
    }

    fn hom(&mut self, label: &str, disorder: DisorderSpec) -> &EnsembleStats {
        self.get(&format!("hom {label}"), || {
            run_hom(&ExperimentSpec::hom(disorder, SAMPLES)).expect("hom")
        })
    }
}

fn final_fidelity(stats: &EnsembleStats) -> f64 {
    stats.last().fidelity.as_ref().expect("fidelity recorded").mean
}

fn chern_quantization() -> Outcome {
    let start = Instant::now();
    let r = chern_numbers(&RiceMeleParams::default(), 101, 101).expect("chern");
    let elapsed = start.elapsed().as_secs_f64();
    let dev = (r.raw.0 - r.raw.0.round()).abs().max((r.raw.1 - r.raw.1.round()).abs());
    let mut c = Checks::new();
    c.check(
        (r.nu1, r.nu2) == (-1, 1),
        format!("(nu1, nu2) = ({}, {:+})", r.nu1, r.nu2),
    );
    c.check(dev < 1e-6, format!("raw deviation {dev:.1e}"));
    c.check(elapsed < 5.0, format!("{elapsed:.2} s"));
    c.done()
}

fn clean_dispersive_pump(runs: &mut Runs) -> Outcome {
    let s = runs.fock("clean", DisorderSpec::none(), 1);
    let last = s.last();
    let mut c = Checks::new();
    c.check(
        (last.shift.mean - 1.0).abs() <= 0.05,
        format!("ΔP/d = {:.4}", last.shift.mean),
    );
    c.check(last.gamma_max.mean <= 0.3, format!("Γmax = {:.4}", last.gamma_max.mean));
    c.done()
}

fn disordered_dispersionless_pump(runs: &mut Runs) -> Outcome {
    let mut c = Checks::new();
    for (label, disorder) in [
        ("eta=4", DisorderSpec::uniform(4.0, SEED)),
        ("sigma=4", DisorderSpec::normal(0.0, 4.0, SEED)),
    ] {
        let s = runs.fock(label, disorder, SAMPLES);
        let (f, shift, gmax) = (final_fidelity(s), s.last().shift.mean, s.last().gamma_max.mean);
        let secs = runs.elapsed(&format!("fock {label}")).as_secs_f64();
        c.check(f >= 0.9, format!("{label}: F = {f:.4}"));
        c.check((shift - 1.0).abs() <= 0.05, format!("ΔP/d = {shift:.4}"));
        c.check(gmax >= 1.8, format!("Γmax = {gmax:.4}"));
        c.check(secs < 600.0, format!("{secs:.0} s"));
    }
    c.done()
}

fn disorder_scan_plateau(runs: &mut Runs) -> Outcome {
    let amplitudes = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0];
    let mut rows = Vec::new();
    for &eta in &amplitudes {
        // η = 4 shares its ensemble with the dispersionless-pump criterion.
        let label = if eta == 4.0 {
            "eta=4".to_string()
        } else {
            format!("scan eta={eta}")
        };
        let s = runs.fock(&label, DisorderSpec::uniform(eta, SEED), SAMPLES);
        rows.push((eta, final_fidelity(s), s.last().shift.mean));
    }
    let mut c = Checks::new();
    let table: Vec<String> = rows.iter().map(|(eta, f, _)| format!("{eta}:{f:.3}")).collect();
    let rising: Vec<f64> = rows.iter().filter(|r| r.0 <= 2.0).map(|r| r.1).collect();
    c.check(
        rising.windows(2).all(|w| w[1] >= w[0]),
        format!("F(η) = [{}] monotone to η = 2", table.join(", ")),
    );
    for &(eta, f, _) in rows.iter().filter(|r| r.0 >= 2.0) {
        c.check(f >= 0.95, format!("F({eta}) = {f:.4}"));
    }
    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.2), hi.max(r.2))
    });
    c.check(lo >= 0.95 && hi <= 1.05, format!("ΔP/d ∈ [{lo:.4}, {hi:.4}]"));
    c.done()
}

fn hom_interference(runs: &mut Runs) -> Outcome {
    let mut c = Checks::new();
    let clock = {
        let spec = ExperimentSpec::hom(DisorderSpec::none(), 1);
        StageClock::new(&spec.params, &spec.schedule, spec.cycles).expect("clock")
    };
    let s = runs.hom("eta=0.5", DisorderSpec::uniform(0.5, SEED));
    let (first, last) = (s.points[0].nity.mean, s.last().nity.mean);
    let plateau = s
        .points
        .iter()
        .filter(|p| p.t - clock.period >= clock.tau / 2.0 - 1e-9)
        .map(|p| p.nity.mean)
        .fold(f64::INFINITY, f64::min);
    c.check((first + 2.0).abs() <= 0.01, format!("η=0.5: Nity(T_p) = {first:.4}"));
    c.check(last >= 1.9, format!("final {last:.4} ± {:.4}", s.last().nity.std));
    c.check(plateau >= 1.8, format!("min over t-T_p ≥ τ/2 = {plateau:.4}"));
    let nity = runs.hom("eta=1", DisorderSpec::uniform(1.0, SEED)).last().nity;
    c.check(
        (nity.mean - 1.8).abs() <= 0.15,
        format!("η=1: {:.4} ± {:.4}", nity.mean, nity.std),
    );
    let nity = runs.hom("sigma=1", DisorderSpec::normal(0.0, 1.0, SEED)).last().nity;
    c.check(
        (nity.mean - 1.4).abs() <= 0.25,
        format!("σ=1: {:.4} ± {:.4}", nity.mean, nity.std),
    );
    c.done()
}

fn full_protocol(runs: &mut Runs) -> Outcome {
    let s = runs.get("full eta=0.5", || {
        run_full_protocol(&ExperimentSpec::full_protocol(
            DisorderSpec::uniform(0.5, SEED),
            SAMPLES,
        ))
        .expect("full")
    });
    let mut c = Checks::new();
    let last = s.last();
    c.check(
        last.nity.mean >= 1.85,
        format!("final Nity {:.4} ± {:.4}", last.nity.mean, last.nity.std),
    );
    let max_shift = s.points.iter().map(|p| p.shift.mean.abs()).fold(0.0, f64::max);
    c.check(max_shift <= 0.1, format!("max |ΔP/d| = {max_shift:.4}"));
    for site in [7, 12] {
        let n = last.density[site - 1].mean;
        c.check((n - 1.0).abs() <= 0.1, format!("n_{site} = {n:.4}"));
    }
    let snap = |label: &str| {
        let g = &s.snapshots.iter().find(|x| x.label == label).expect("snapshot").gamma;
        (g.trace(), g.sum() - g.trace())
    };
    let (diag0, _) = snap("t=0");
    c.check(diag0 < 0.05, format!("Γ(0) diagonal sum {diag0:.4}"));
    let (_, off_end) = snap("t=2nTp+tau");
    c.check(off_end < 0.2, format!("Γ(2T_p+τ) off-diagonal sum {off_end:.4}"));
    c.done()
}

fn random_pair_state(rng: &mut impl Rng, n: usize) -> TwoBosonState {
    let basis = SymBasis::new(n);
    let amps: Vec<Complex64> = (0..basis.dim())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    TwoBosonState::from_amplitudes(basis, amps)
        .expect("amplitudes")
        .normalized()
}

fn oracle_equivalence(worst_hygiene: &mut f64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases = 60;
    let mut worst = 0.0f64;
    for case in 0..cases {
        let params = RiceMeleParams::new(
            rng.random_range(0.5..1.5),
            rng.random_range(0.3..1.5),
            rng.random_range(1.0..25.0),
            rng.random_range(2..10),
            0.0,
        )
        .expect("params");
        let n = params.n_sites();
        let phi0 = rng.random_range(0.0..TAU);
        let schedule = if case % 2 == 0 {
            PhaseSchedule::linear(rng.random_range(0.02..0.5), phi0)
        } else {
            PhaseSchedule::gap_adaptive(rng.random_range(0.01..0.1), phi0)
        };
        let disorder = match case % 3 {
            0 => DisorderSpec::none(),
            1 => DisorderSpec::uniform(rng.random_range(0.0..5.0), rng.random()),
            _ => DisorderSpec::normal(rng.random_range(-1.0..1.0), rng.random_range(0.0..4.0), rng.random()),
        }
        .sample(n, case);
        let state0 = if case % 4 == 0 {
            let (a, b) = (rng.random_range(1..=n), rng.random_range(1..=n));
            make_state(n, a, b).expect("fock state")
        } else {
            random_pair_state(&mut rng, n)
        };
        let config = PropagatorConfig {
            steps_per_cycle: 4000,
            records: 5,
            ..PropagatorConfig::default()
        };
        let duration = rng.random_range(0.05..0.5) * schedule.period(&params).expect("period");
        let run = evolve_two_boson(
            &params,
            &schedule,
            &disorder,
            &state0,
            TimeSpan::new(0.0, duration),
            &config,
            None,
        )
        .expect("evolution");
        *worst_hygiene = worst_hygiene.max(run.max_norm_drift).max(run.unitarity_error);
        let oracle = permanent_oracle(&run.propagator, &state0).expect("oracle");
        worst = worst.max(1.0 - run.final_state.inner(&oracle).expect("inner").norm());
    }
    let mut c = Checks::new();
    c.check(worst <= 1e-8, format!("{cases} cases, worst 1 - overlap = {worst:.1e}"));
    c.done()
}

/// Final reported scalars of a run, keyed for comparison.
fn scalars(s: &EnsembleStats) -> Vec<(String, f64)> {
    let last = s.last();
    let mut out = vec![
        ("ΔP/d".to_string(), last.shift.mean),
        ("Γmax".to_string(), last.gamma_max.mean),
        ("Nity".to_string(), last.nity.mean),
    ];
    if let Some(f) = &last.fidelity {
        out.push(("F".to_string(), f.mean));
    }
    out.extend(
        last.density
            .iter()
            .enumerate()
            .map(|(j, d)| (format!("n_{}", j + 1), d.mean)),
    );
    out
}

fn numerical_hygiene(runs: &Runs, oracle_worst: f64) -> Outcome {
    let mut c = Checks::new();
    let worst = runs
        .ensembles
        .values()
        .map(|(s, _)| s.max_norm_drift.max(s.max_unitarity_error))
        .fold(oracle_worst, f64::max);
    c.check(
        worst < HYGIENE,
        format!(
            "{} ensembles, worst norm/unitarity error {worst:.1e}",
            runs.ensembles.len()
        ),
    );

    // Step halving on a four-sample subset of each distinct configuration.
    let subset = 4;
    let specs = [
        (
            "fock η=4",
            ExperimentSpec::fock_pump(DisorderSpec::uniform(4.0, SEED), subset),
        ),
        (
            "fock σ=4",
            ExperimentSpec::fock_pump(DisorderSpec::normal(0.0, 4.0, SEED), subset),
        ),
        (
            "hom η=0.5",
            ExperimentSpec::hom(DisorderSpec::uniform(0.5, SEED), subset),
        ),
        (
            "full η=0.5",
            ExperimentSpec::full_protocol(DisorderSpec::uniform(0.5, SEED), subset),
        ),
    ];
    for (label, spec) in specs {
        eprintln!("  step halving {label} ...");
        let run = |spec: &ExperimentSpec| {
            match spec.kind {
                ExperimentKind::Hom => run_hom(spec),
                ExperimentKind::FullProtocol => run_full_protocol(spec),
                _ => run_fock_pump(spec),
            }
            .expect("run")
        };
        let coarse = run(&spec);
        let mut fine_spec = spec.clone();
        fine_spec.propagator = fine_spec.propagator.refined();
        let fine = run(&fine_spec);
        let (name, change) = scalars(&coarse)
            .into_iter()
            .zip(scalars(&fine))
            .map(|((name, a), (_, b))| (name, (a - b).abs()))
            .fold((String::new(), 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        c.check(change < 1e-4, format!("{label}: max change {change:.1e} ({name})"));
    }
    c.done()
}

/// Closed-form clean gap, written out independently of the library.
fn gap_oracle(p: &RiceMeleParams, phi: f64) -> f64 {
    let delta = p.offset * phi.cos();
    let spread = (p.tunneling + p.dimerization * phi.sin()).abs() - (p.tunneling - p.dimerization * phi.sin()).abs();
    2.0 * (delta * delta + spread * spread).sqrt()
}

fn gap_anchors() -> Outcome {
    let p = RiceMeleParams::default();
    let mut c = Checks::new();
    let (g0, g1) = (band_gap(&p, 0.0), band_gap(&p, FRAC_PI_2));
    c.check((g0 - 2.0 * p.offset).abs() < 1e-10, format!("G(0) = {g0:.12}"));
    c.check((g1 - 4.0 * p.dimerization).abs() < 1e-10, format!("G(π/2) = {g1:.12}"));
    for eps in [0.03, 0.01, 0.1] {
        let schedule = PhaseSchedule::gap_adaptive(eps, 0.0);
        let period = schedule.period(&p).expect("period");
        // Trapezoid rule on a smooth periodic integrand converges geometrically.
        let m = 20_000;
        let quad = (0..m)
            .map(|k| 1.0 / gap_oracle(&p, TAU * k as f64 / m as f64))
            .sum::<f64>()
            * TAU
            / m as f64
            / eps;
        let rel = (period - quad).abs() / quad;
        c.check(
            rel < 1e-4,
            format!("ε={eps}: T_p = {period:.6} vs {quad:.6} (rel {rel:.1e})"),
        );
    }
    c.done()
}

fn render(s: &EnsembleStats) -> [String; 3] {
    [
        stats_table(s).render(),
        samples_table(s).render(),
        correlations_table(s).render(),
    ]
}

fn determinism(runs: &mut Runs) -> Outcome {
    let mut c = Checks::new();
    let first = render(runs.hom("eta=0.5", DisorderSpec::uniform(0.5, SEED)));
    eprintln!("  repeating hom eta=0.5 ...");
    let again = run_hom(&ExperimentSpec::hom(DisorderSpec::uniform(0.5, SEED), SAMPLES)).expect("hom");
    c.check(first == render(&again), "HOM η=0.5 ensemble CSV identical".into());

    let dir = tempfile::tempdir().expect("tempdir");
    let cli = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_thouless"))
            .args([
                "pump-fock",
                "--kind",
                "none",
                "--samples",
                "1",
                "--seed",
                "1",
                "--output-dir",
            ])
            .arg(&out)
            .env_remove("THOULESS_OUTPUT_DIR")
            .output()
            .expect("binary");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        out
    };
    let (a, b) = (cli("a"), cli("b"));
    let same = ["trajectory.csv", "samples.csv", "correlations.csv"]
        .iter()
        .all(|f| fs::read(a.join(f)).expect("csv") == fs::read(b.join(f)).expect("csv"));
    c.check(same, "clean pump CLI CSV files identical".into());
    c.done()
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut runs = Runs::default();
    let mut oracle_worst = 0.0;
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut record = |name: &'static str, outcome: Outcome| {
        println!(
            "{} {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        results.push((name, outcome));
    };

    record("1 Chern quantization", chern_quantization());
    record("2 clean dispersive pump", clean_dispersive_pump(&mut runs));
    record(
        "3 disordered dispersionless pump",
        disordered_dispersionless_pump(&mut runs),
    );
    record("4 disorder-scan plateau", disorder_scan_plateau(&mut runs));
    record("5 HOM interference", hom_interference(&mut runs));
    record("6 full protocol", full_protocol(&mut runs));
    record("7 oracle equivalence", oracle_equivalence(&mut oracle_worst));
    record("9 analytic gap anchors", gap_anchors());
    record("10 determinism", determinism(&mut runs));
    // Last, so it covers every ensemble above.
    record("8 numerical hygiene", numerical_hygiene(&runs, oracle_worst));

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!(
        "acceptance: {}/{} passed in {:.0} s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
