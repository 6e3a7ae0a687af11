//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p harness --test acceptance`. A criterion that is
//! not met prints FAIL with the measured values; the process exits with a
//! nonzero status only when a criterion cannot be evaluated at all.

#[path = "../../smm/tests/support/mod.rs"]
mod support;

use std::path::PathBuf;
use std::time::Instant;

use bounds::monitors::check_information;
use bounds::{analytic_bounds, extremized_bounds, BoundConfig, BoundEngine};
use ctm::{godunov_update, FundamentalDiagram, Grid};
use dlkcf::{kf_correct, kf_predict, Gaussian};
use harness::bench::run_benchmark;
use harness::studies::{
    comparison_study, divergence_study, lyapunov_study, nees_study, residence_study, unobservable_study, DivergenceSpec,
    LyapunovSpec, ResidenceSpec, UnobservableSpec,
};
use harness::{FilterKind, Scenario};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smm::{all_modes, boundary_output, build_mode_matrices, information_matrix, numeric_rank, observable_modes, smm_step, ModeTag};
use support::consistent_state;

/// Largest SMM/CTM difference allowed.
const ORACLE_TOL: f64 = 1e-12;
/// Eigenvalue slack of the information sandwich.
const SANDWICH_SLACK: f64 = 1e-9;
/// Terminal mean error relative to the initial one.
const TERMINAL_RATIO: f64 = 1e-6;
/// Largest allowed disagreement ratio DLKCF / DLKCF-0.
const DISAGREEMENT_RATIO: f64 = 0.7;
/// Largest fraction of steps outside the NEES region per section.
const NEES_FRACTION: f64 = 0.10;
/// Smallest central / per-agent DLKCF time ratio.
const SPEEDUP: f64 = 5.0;
/// Smallest growth of the optimal filter's covariance norm.
const GROWTH: f64 = 1e3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail })
}

fn scenario_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn load(name: &str) -> Result<Scenario, String> {
    Scenario::load(&scenario_file(name)).map_err(|e| e.to_string())
}

fn oracle_equivalence() -> Result<Outcome, String> {
    let fd = FundamentalDiagram::normalized();
    let grid = Grid::new(1.0, 0.5, 8).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for n in 2..=8 {
        for mode in all_modes(n) {
            let m = build_mode_matrices(mode, n, &fd, &grid).map_err(|e| e.to_string())?;
            for _ in 0..1000 {
                let st = consistent_state(mode, n, &fd, &mut rng);
                let ctm = godunov_update(&st.rho, st.ghost_up, st.ghost_down, &fd, grid.ratio());
                let smm = smm_step(&DVector::from_vec(st.rho.clone()), &m, &fd).map_err(|e| e.to_string())?;
                for (a, b) in ctm.iter().zip(smm.iter()) {
                    worst = worst.max((a - b).abs());
                }
                cases += 1;
            }
        }
    }
    outcome(worst <= ORACLE_TOL, format!("{cases} states, max |smm - ctm| = {worst:.3e}"))
}

fn rank_after(seq: &[DMatrix<f64>], n: usize) -> Result<usize, String> {
    let h = vec![boundary_output(n); seq.len() + 1];
    let r = vec![DMatrix::identity(2, 2); seq.len() + 1];
    Ok(numeric_rank(&information_matrix(seq, &h, &r).map_err(|e| e.to_string())?, 1e-10))
}

/// Every index sequence of length `len` over `base` symbols.
fn sequences(base: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out.into_iter().flat_map(|s| (0..base).map(move |i| [s.clone(), vec![i]].concat())).collect();
    }
    out
}

fn rank_law() -> Result<Outcome, String> {
    let fd = FundamentalDiagram::normalized();
    let grid = Grid::new(1.0, 0.5, 8).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    let mut checked = 0;
    for n in 2usize..=5 {
        let t1 = 1.max(n.saturating_sub(2));
        let obs: Vec<_> = observable_modes(n)
            .into_iter()
            .map(|m| build_mode_matrices(m, n, &fd, &grid).map(|x| x.a))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        // T1 steps suffice for every sequence, and some sequence of T1 - 1
        // steps is still rank deficient.
        let mut tight = n == 2;
        for seq in sequences(obs.len(), t1) {
            let mats: Vec<_> = seq.iter().map(|&i| obs[i].clone()).collect();
            if rank_after(&mats, n)? != n {
                failures.push(format!("n={n} seq={seq:?}"));
            }
            tight |= rank_after(&mats[..t1 - 1], n)? < n;
            checked += 1;
        }
        if !tight {
            failures.push(format!("n={n}: every sequence is full rank after {} steps", t1 - 1));
        }
        if n >= 3 {
            let fc: Vec<_> = all_modes(n)
                .into_iter()
                .filter(|m| matches!(m.tag, ModeTag::FC1 | ModeTag::FC2))
                .map(|m| build_mode_matrices(m, n, &fd, &grid).map(|x| x.a))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            for seq in sequences(fc.len(), 2) {
                let mut mats: Vec<_> = seq.iter().map(|&i| fc[i].clone()).collect();
                mats.extend(std::iter::repeat(fc[seq[0]].clone()).take(n));
                if rank_after(&mats, n)? != 2 {
                    failures.push(format!("fc n={n} seq={seq:?}"));
                }
                checked += 1;
            }
        }
    }
    outcome(failures.is_empty(), format!("{checked} sequences, failures: {failures:?}"))
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&b * b.transpose() + DMatrix::identity(n, n) * 0.05) * scale
}

fn diag_in(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.gen_range(lo..=hi)))
}

fn bound_sandwich() -> Result<Outcome, String> {
    let mut bracket_failures = Vec::new();
    let mut violations = 0;
    let mut runs = 0;
    for n in 2..=6 {
        let cfg = BoundConfig::normalized(n);
        let l = extremized_bounds(&cfg).map_err(|e| e.to_string())?;
        let c = analytic_bounds(&cfg).map_err(|e| e.to_string())?;
        if !(c.a_underline <= l.a && l.b <= c.b_bar) {
            bracket_failures.push(n);
        }
        let engine = BoundEngine::with_extremized(cfg.clone(), l).map_err(|e| e.to_string())?;
        let grid = cfg.grid().map_err(|e| e.to_string())?;
        let modes = observable_modes(n);
        let h = boundary_output(n);
        for run in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + 100 * n as u64 + run);
            let s = rng.gen_range(0.01..2.0);
            let g0 = random_spd(n, &mut rng, s);
            let (c1, c2) = engine.information_bounds(&g0).map_err(|e| e.to_string())?;
            let mut belief = Gaussian::new(DVector::zeros(n), g0).map_err(|e| e.to_string())?;
            for k in 1..=60 {
                let m = modes[rng.gen_range(0..modes.len())];
                let a = build_mode_matrices(m, n, &cfg.fd, &grid).map_err(|e| e.to_string())?.a;
                let q = diag_in(n, cfg.q1, cfg.q2, &mut rng);
                let r = diag_in(2, cfg.r1, cfg.r2, &mut rng);
                let prior = kf_predict(&belief, &a, None, &q).map_err(|e| e.to_string())?;
                belief = kf_correct(&prior, &DVector::zeros(2), &h, &r).map_err(|e| e.to_string())?.posterior;
                violations += check_information(k, 0, &belief.cov, c1, c2, SANDWICH_SLACK).len();
            }
            runs += 1;
        }
    }
    outcome(
        bracket_failures.is_empty() && violations == 0,
        format!("bracket failures at n = {bracket_failures:?}; {violations} sandwich violations over {runs} runs"),
    )
}

fn lyapunov() -> Result<Outcome, String> {
    let s = lyapunov_study(&LyapunovSpec::default()).map_err(|e| e.to_string())?;
    outcome(
        s.increases.is_empty() && s.rate_failures.is_empty() && s.terminal_ratio < TERMINAL_RATIO && s.active_links > 0,
        format!(
            "{} increases, {} rate failures, {} active links, terminal ratio {:.3e}",
            s.increases.len(),
            s.rate_failures.len(),
            s.active_links,
            s.terminal_ratio
        ),
    )
}

fn unobservable() -> Result<Outcome, String> {
    let spec = UnobservableSpec::default();
    let s = unobservable_study(&spec).map_err(|e| e.to_string())?;
    let latest = s.entry.iter().flatten().max().copied();
    outcome(
        s.all_entered() && s.error_violations == 0 && s.gain_violations == 0,
        format!(
            "mode {}, {} runs, latest entry {latest:?} of {} steps, mean-error violations {}, max gain {:.3e} vs {:.3e} ({} violations)",
            s.mode,
            spec.runs,
            spec.steps,
            s.error_violations,
            s.max_gain,
            s.frak_k,
            s.gain_violations
        ),
    )
}

fn residence() -> Result<Outcome, String> {
    let spec = ResidenceSpec::default();
    let s = residence_study(&spec).map_err(|e| e.to_string())?;
    outcome(
        s.violations.is_empty(),
        format!("{} runs, {} steps, {} cap violations", spec.runs, s.modes.len(), s.violations.len()),
    )
}

fn table_one() -> Result<Outcome, String> {
    let scenario = load("hs_ia.json")?;
    let totals = comparison_study(&scenario, scenario.runs).map_err(|e| e.to_string())?;
    let get = |k: FilterKind| totals.iter().find(|t| t.filter == k).ok_or_else(|| format!("{} missing", k.name()));
    let (lkf, d0, d) = (get(FilterKind::Lkf)?, get(FilterKind::Dlkcf0)?, get(FilterKind::Dlkcf)?);
    let ratio = match (d.disagreement, d0.disagreement) {
        (Some(a), Some(b)) => a / b,
        _ => return Err("disagreement not recorded".into()),
    };
    let ordered = lkf.error > d0.error && d0.error > d.error;
    outcome(
        ratio <= DISAGREEMENT_RATIO && ordered,
        format!(
            "{} seeds: u ratio {ratio:.4} (limit {DISAGREEMENT_RATIO}), eta LKF {:.4} > DLKCF-0 {:.4} > DLKCF {:.4}: {ordered}",
            scenario.runs, lkf.error, d0.error, d.error
        ),
    )
}

fn nees() -> Result<Outcome, String> {
    let scenario = load("nees_hs.json")?;
    let s = nees_study(&scenario).map_err(|e| e.to_string())?;
    let fractions: Vec<String> = s.sections.iter().map(|x| format!("{:.3}", x.violation_fraction)).collect();
    outcome(
        s.worst_fraction() <= NEES_FRACTION,
        format!(
            "{} runs, region [{:.3}, {:.3}], outside fraction per section [{}] (limit {NEES_FRACTION})",
            s.runs,
            s.region.0,
            s.region.1,
            fractions.join(", ")
        ),
    )
}

fn benchmark() -> Result<Outcome, String> {
    let main = run_benchmark(100, 28, 10, 5, 2000).map_err(|e| e.to_string())?;
    let speedup = main.speedup().ok_or("missing timing rows")?;
    let per_agent = |n_l, n_hat| -> Result<f64, String> {
        let t = run_benchmark(210, n_l, n_hat, 5, 500).map_err(|e| e.to_string())?;
        Ok(t.row(FilterKind::Dlkcf).ok_or("missing DLKCF row")?.per_agent_seconds)
    };
    let (small, large) = (per_agent(50, 10)?, per_agent(58, 20)?);
    outcome(
        speedup >= SPEEDUP && small < large,
        format!(
            "central/per-agent {speedup:.2} (limit {SPEEDUP}); n=210 per-agent {small:.4} s (overlap 10) < {large:.4} s (overlap 20): {}",
            small < large
        ),
    )
}

fn divergence() -> Result<Outcome, String> {
    let s = divergence_study(&DivergenceSpec::default()).map_err(|e| e.to_string())?;
    let growth = s.optimal_growth();
    outcome(
        growth > GROWTH && s.suboptimal_max <= s.cap,
        format!("optimal growth {growth:.3e} (limit {GROWTH:e}); suboptimal max {:.3e} vs cap {:.3e}", s.suboptimal_max, s.cap),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome, String>); 10] = [
        ("SMM-CTM oracle equivalence", oracle_equivalence),
        ("observability rank law", rank_law),
        ("bound sandwich", bound_sandwich),
        ("GAS and Lyapunov rate", lyapunov),
        ("unobservable safety", unobservable),
        ("residence-time law", residence),
        ("HS+IA comparison", table_one),
        ("NEES consistency", nees),
        ("benchmark scaling", benchmark),
        ("divergence demo", divergence),
    ];
    let mut passed = 0;
    let mut errors = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match run() {
            Ok(o) => {
                passed += usize::from(o.pass);
                println!(
                    "criterion {:2} {}: {name}: {} [{:.1} s]",
                    i + 1,
                    if o.pass { "PASS" } else { "FAIL" },
                    o.detail,
                    start.elapsed().as_secs_f64()
                );
            }
            Err(e) => {
                errors += 1;
                println!("criterion {:2} ERROR: {name}: {e}", i + 1);
            }
        }
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if errors > 0 {
        std::process::exit(1);
    }
}
