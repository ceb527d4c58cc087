//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line per criterion.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPoolBuilder;

use d2d_powergame::analysis::{
    check_standard_function, closed_form_jacobian, diagonal_mismatch, jacobian_at,
};
use d2d_powergame::baselines::{Cdpc, RuleRegistry};
use d2d_powergame::cli::{execute, parse_config, Command};
use d2d_powergame::experiments::{generate_scenario, ScenarioSpec};
use d2d_powergame::game::{
    is_nash_equilibrium, run_from_default_start, update_unpriced, GameParams, Priced, ProbeGrid,
    RunResult, Unpriced, UpdateRule, UtilityKind, DEFAULT_PRICE,
};
use d2d_powergame::model::{equal_target_powers, NetworkScenario, PowerVector, MIN_POWER};

const SCENARIOS: u64 = 100;
const SINR_REL_TOL: f64 = 1e-6;
const SHIFTED_ALPHAS: [f64; 3] = [0.01, 0.02, 0.5];
const JACOBIAN_STEP: f64 = 1e-4;

fn verdict(id: &str, title: &str, ok: bool, detail: &str) {
    // Written to the real stdout so the line survives libtest's output capture.
    let line = format!(
        "criterion {id} [{}] {title}: {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
    assert!(ok, "criterion {id} failed: {detail}");
}

fn seeded_scenarios() -> Vec<NetworkScenario> {
    (0..SCENARIOS)
        .map(|seed| generate_scenario(&ScenarioSpec::default().with_seed(seed)).unwrap())
        .collect()
}

fn params(alpha: f64, price: f64) -> GameParams {
    GameParams {
        alpha,
        price,
        ..GameParams::default()
    }
}

fn ulp_distance(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

/// Largest relative SINR error against `target` over every device.
fn worst_sinr_error(run: &RunResult, target: f64) -> f64 {
    run.final_sinrs
        .iter()
        .map(|g| (g - target).abs() / target)
        .fold(0.0, f64::max)
}

/// Converged points of criteria 1 and 2: unpriced rule, c = 0, α ∈ {0, 0.01, 0.02, 0.5}.
fn unpriced_points(scenarios: &[NetworkScenario]) -> Vec<(usize, GameParams, RunResult)> {
    let mut out = Vec::new();
    for alpha in [0.0].into_iter().chain(SHIFTED_ALPHAS) {
        let pr = params(alpha, 0.0);
        for (idx, s) in scenarios.iter().enumerate() {
            out.push((
                idx,
                pr.clone(),
                run_from_default_start(s, &pr, &Unpriced).unwrap(),
            ));
        }
    }
    out
}

#[test]
fn criterion_1_dpc_reduction() {
    let started = Instant::now();
    let scenarios = seeded_scenarios();
    let pr = params(0.0, 0.0);

    // Random states: update_unpriced at α = 0 against (Γ/γ)·p, clamped the same way.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_ulps = 0;
    for state in 0..1000 {
        let s = &scenarios[state % scenarios.len()];
        let p = PowerVector::new(
            (0..s.n())
                .map(|_| rng.random_range((1e-9f64).ln()..=s.p_max().ln()).exp())
                .collect(),
        );
        let next = update_unpriced(s, &pr, &p).unwrap();
        for i in 0..s.n() {
            let gamma = s.sinr(&p, i).unwrap();
            let dpc = ((pr.target / gamma) * p[i]).clamp(MIN_POWER, s.p_max());
            worst_ulps = worst_ulps.max(ulp_distance(next[i], dpc));
        }
    }

    let mut worst_err: f64 = 0.0;
    let mut feasible = 0;
    let mut all_converged = true;
    for s in &scenarios {
        if equal_target_powers(s, pr.target).is_some() {
            feasible += 1;
        }
        let run = run_from_default_start(s, &pr, &Unpriced).unwrap();
        all_converged &= run.converged;
        worst_err = worst_err.max(worst_sinr_error(&run, pr.target));
    }
    let elapsed = started.elapsed();
    verdict(
        "1",
        "DPC reduction",
        worst_ulps <= 1
            && feasible == SCENARIOS
            && all_converged
            && worst_err < SINR_REL_TOL
            && elapsed < Duration::from_secs(10),
        &format!(
            "max ulp gap {worst_ulps} over 1000 states; {feasible}/{SCENARIOS} feasible; \
             worst |γ−5|/5 = {worst_err:.3e}; {:.2?}",
            elapsed
        ),
    );
}

#[test]
fn criterion_2_shifted_fixed_point() {
    let scenarios = seeded_scenarios();
    let mut details = Vec::new();
    let mut ok = true;
    for alpha in SHIFTED_ALPHAS {
        let pr = params(alpha, 0.0);
        let target = pr.effective_target();
        let mut worst: f64 = 0.0;
        for s in &scenarios {
            let run = run_from_default_start(s, &pr, &Unpriced).unwrap();
            ok &= run.converged;
            worst = worst.max(worst_sinr_error(&run, target));
        }
        ok &= worst < SINR_REL_TOL;
        details.push(format!(
            "α={alpha}: γ*={target:.4}, worst rel err {worst:.3e}"
        ));
    }
    ok &= (params(0.02, 0.0).effective_target() - 4.5455).abs() < 1e-4;
    verdict("2", "shifted fixed point", ok, &details.join("; "));
}

#[test]
fn criterion_3_pricing_direction() {
    let scenarios = seeded_scenarios();
    let mean = |price: f64| {
        let pr = params(0.0, price);
        let runs: Vec<RunResult> = scenarios
            .iter()
            .map(|s| run_from_default_start(s, &pr, &Priced).unwrap())
            .collect();
        let k = runs.len() as f64;
        (
            runs.iter().map(RunResult::mean_sinr).sum::<f64>() / k,
            runs.iter().map(RunResult::mean_power).sum::<f64>() / k,
        )
    };
    let (sinr_free, power_free) = mean(0.0);
    let (sinr_priced, power_priced) = mean(DEFAULT_PRICE);
    verdict(
        "3",
        "pricing direction",
        sinr_priced < sinr_free && power_priced < power_free,
        &format!(
            "mean SINR {sinr_free:.6} → {sinr_priced:.6}, mean power {power_free:.4e} W → {power_priced:.4e} W"
        ),
    );
}

fn priced_vs_cdpc() -> Vec<(RunResult, RunResult)> {
    let pr = params(0.0, DEFAULT_PRICE);
    seeded_scenarios()
        .iter()
        .map(|s| {
            (
                run_from_default_start(s, &pr, &Priced).unwrap(),
                run_from_default_start(s, &pr, &Cdpc).unwrap(),
            )
        })
        .collect()
}

#[test]
fn criterion_4a_priced_power_below_cdpc() {
    let runs = priced_vs_cdpc();
    let lower = runs
        .iter()
        .filter(|(p, c)| p.mean_power() < c.mean_power())
        .count();
    let cdpc_on_target = runs
        .iter()
        .all(|(_, c)| worst_sinr_error(c, 5.0) < SINR_REL_TOL);
    let priced_below = runs.iter().all(|(p, _)| p.mean_sinr() < 5.0);
    verdict(
        "4a",
        "priced vs CDPC power",
        lower == runs.len() && cdpc_on_target && priced_below,
        &format!(
            "priced mean power lower on {lower}/{} scenarios; CDPC at Γ: {cdpc_on_target}; priced mean SINR below Γ: {priced_below}",
            runs.len()
        ),
    );
}

#[test]
fn criterion_4b_priced_iterations_not_below_cdpc() {
    let runs = priced_vs_cdpc();
    let slower_or_equal = runs
        .iter()
        .filter(|(p, c)| p.iterations_used >= c.iterations_used)
        .count();
    let k = runs.len() as f64;
    let mean_priced = runs
        .iter()
        .map(|(p, _)| p.iterations_used as f64)
        .sum::<f64>()
        / k;
    let mean_cdpc = runs
        .iter()
        .map(|(_, c)| c.iterations_used as f64)
        .sum::<f64>()
        / k;
    verdict(
        "4b",
        "priced vs CDPC iterations",
        slower_or_equal == runs.len(),
        &format!(
            "priced iterations ≥ CDPC on {slower_or_equal}/{} scenarios (mean {mean_priced:.2} vs {mean_cdpc:.2})",
            runs.len()
        ),
    );
}

#[test]
fn criterion_5_standard_function_suite() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut samples = 0;
    let mut failures = Vec::new();
    for seed in 0..SCENARIOS {
        let s = generate_scenario(&ScenarioSpec::default().with_seed(1000 + seed)).unwrap();
        let pr = params(rng.random_range(0.0..=0.99), 0.0);
        let report = check_standard_function(&s, &pr, &Unpriced, 100, seed).unwrap();
        samples += report.samples;
        if !report.all_ok() {
            failures.push((seed, pr.alpha, report.counterexample));
        }
    }
    let elapsed = started.elapsed();
    verdict(
        "5",
        "standard-function suite",
        samples >= 10_000 && failures.is_empty() && elapsed < Duration::from_secs(30),
        &format!(
            "{samples} power samples × 3 λ, {} counterexamples; {:.2?}{}",
            failures.len(),
            elapsed,
            failures
                .first()
                .map_or(String::new(), |f| format!("; first: {f:?}"))
        ),
    );
}

#[test]
fn criterion_6_nash_verification() {
    let scenarios = seeded_scenarios();
    let grid = ProbeGrid::default();
    let mut worst_improvement = f64::NEG_INFINITY;
    let mut not_ne = 0;
    let mut undetected = 0;
    let mut wrong_direction = 0;
    let points = unpriced_points(&scenarios);
    for (idx, pr, run) in &points {
        let s = &scenarios[*idx];
        let check =
            is_nash_equilibrium(s, pr, UtilityKind::Base, &run.final_powers, &grid).unwrap();
        worst_improvement = worst_improvement.max(check.worst_improvement);
        if !check.is_equilibrium {
            not_ne += 1;
        }
        for i in 0..s.n() {
            let bumped = run.final_powers.with_power(i, run.final_powers[i] * 2.0);
            let check = is_nash_equilibrium(s, pr, UtilityKind::Base, &bumped, &grid).unwrap();
            match check.best_deviation {
                None => undetected += 1,
                Some(d) if d.device != i || d.to_power >= d.from_power => wrong_direction += 1,
                Some(_) => {}
            }
        }
    }
    verdict(
        "6",
        "NE verification",
        not_ne == 0 && worst_improvement < 1e-9 && undetected == 0 && wrong_direction == 0,
        &format!(
            "{} converged points, {not_ne} not NE, worst improvement {worst_improvement:.3e}; \
             ×2 perturbations: {undetected} undetected, {wrong_direction} pointing away",
            points.len()
        ),
    );
}

#[test]
fn criterion_7_jacobian_nonsingular() {
    let scenarios = seeded_scenarios();
    let mut cases: Vec<(usize, GameParams, &dyn UpdateRule, UtilityKind, RunResult)> =
        unpriced_points(&scenarios)
            .into_iter()
            .map(|(i, pr, run)| (i, pr, &Unpriced as &dyn UpdateRule, UtilityKind::Base, run))
            .collect();
    let priced = params(0.0, DEFAULT_PRICE);
    for (i, s) in scenarios.iter().enumerate() {
        let run = run_from_default_start(s, &priced, &Priced).unwrap();
        cases.push((i, priced.clone(), &Priced, UtilityKind::Priced, run));
    }

    let mut singular = 0;
    let mut min_det = f64::INFINITY;
    let mut worst_diag: f64 = 0.0;
    for (idx, pr, rule, kind, run) in &cases {
        let s = &scenarios[*idx];
        let jac = jacobian_at(s, pr, *rule, &run.final_powers, JACOBIAN_STEP).unwrap();
        if !jac.nonsingular {
            singular += 1;
        }
        min_det = min_det.min(jac.scaled_determinant.abs());
        let closed = closed_form_jacobian(s, pr, *kind, &run.final_powers).unwrap();
        worst_diag = worst_diag.max(diagonal_mismatch(&jac.matrix, &closed));
    }
    verdict(
        "7",
        "Jacobian non-singularity",
        singular == 0 && min_det > 1e-12 && worst_diag < 1e-6,
        &format!(
            "{} converged points, {singular} singular, min |scaled det| {min_det:.3e}, worst diagonal rel err {worst_diag:.3e}",
            cases.len()
        ),
    );
}

#[test]
fn criterion_8_determinism() {
    let registry = RuleRegistry::with_defaults();
    let cfg = parse_config(
        "sweep.axis = price\nsweep.values = 0, 1000, 5100\nsweep.repetitions = 6\ncompare.repetitions = 6\ncheck.samples = 200\n",
    )
    .unwrap();
    let mut checks = Vec::new();
    for command in [
        Command::Run,
        Command::Sweep,
        Command::Compare,
        Command::Check,
    ] {
        let a = execute(command, &cfg, &registry).unwrap();
        let b = execute(command, &cfg, &registry).unwrap();
        checks.push((format!("{command:?}"), a.files == b.files));
    }
    let in_pool = |threads: usize, command: Command| {
        ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| execute(command, &cfg, &registry).unwrap().files)
    };
    for command in [Command::Sweep, Command::Compare] {
        checks.push((
            format!("{command:?} 1 vs 8 threads"),
            in_pool(1, command) == in_pool(8, command),
        ));
    }
    let ok = checks.iter().all(|(_, same)| *same);
    let detail = checks
        .iter()
        .map(|(name, same)| format!("{name}: {}", if *same { "identical" } else { "DIFFERENT" }))
        .collect::<Vec<_>>()
        .join(", ");
    verdict("8", "determinism", ok, &detail);
}
