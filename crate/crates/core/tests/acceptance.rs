//! Acceptance suite. Runs as a plain binary (`harness = false`) so that
//! every criterion prints its own PASS/FAIL line under `cargo test`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ccmin::ccdiag::{
    classify_trichotomy, concentration_q, critical_mass, gaussian_trial, splitting_defect, ConcentrationProfile,
    Harness, Trichotomy, Verdict,
};
use ccmin::energy::{self, estimate_gn_constant, Functional};
use ccmin::flow::{default_init, minimize, minimize_observed, solve_multistart, FlowConfig, InitStyle, MinimizeResult};
use ccmin::{Grid, NonlinearitySpec, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn cubic() -> NonlinearitySpec {
    NonlinearitySpec::pure_power(1, 0.5, 4.0)
}

fn bench_grid() -> Grid {
    Grid::new(1, 512, 16.0).unwrap()
}

fn family_grid() -> Grid {
    Grid::new(1, 512, 32.0).unwrap()
}

/// Largest relative mass error seen over every trace of the suite.
#[derive(Default)]
struct MassLog {
    worst: f64,
    iterates: usize,
}

impl MassLog {
    fn record(&mut self, r: &MinimizeResult) {
        for row in &r.trace {
            self.worst = self.worst.max(row.mass_error);
            self.iterates += 1;
        }
    }
}

fn soliton(log: &mut MassLog) -> Outcome {
    let start = Instant::now();
    let grid = bench_grid();
    let out = solve_multistart(&grid, 1.0, &cubic(), &FlowConfig::default(), Functional::J).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let r = out.best;
    log.record(&r);
    let exact = -1.0 / 24.0;
    let energy_err = (r.energy - exact).abs() / exact.abs();
    let lambda_err = (r.multiplier + 0.25).abs() / 0.25;
    let u = r.minimizer.component(0).values();
    let peak = (0..u.len()).max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap();
    let x0 = grid.coord(peak);
    let sign = u[peak].signum();
    let period = grid.period();
    let b = 0.5;
    let sup = (0..u.len())
        .map(|j| {
            let d = (grid.coord(j) - x0 + 0.5 * period).rem_euclid(period) - 0.5 * period;
            (sign * u[j] - b / (b * d).cosh()).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        r.converged && energy_err <= 0.01 && lambda_err <= 0.01 && sup <= 1e-3 && elapsed < 30.0,
        format!(
            "I = {:.8} (rel err {energy_err:.2e}), lambda = {:.6} (rel err {lambda_err:.2e}), sup err {sup:.2e}, {elapsed:.2}s",
            r.energy, r.multiplier
        ),
    )
}

fn gradient_consistency() -> Outcome {
    let start = Instant::now();
    let grid = Grid::new(1, 128, 8.0).unwrap();
    let spec = NonlinearitySpec::default_example();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for functional in [Functional::J, Functional::JInf] {
        for k in 0..20u64 {
            let c = rng.gen_range(0.5..2.0);
            let u = default_init(&grid, 2, c, InitStyle::RandomSmooth, 100 + k).unwrap();
            let v = default_init(&grid, 2, 1.0, InitStyle::RandomSmooth, 500 + k).unwrap();
            let g = energy::grad(&u, &spec, functional);
            let analytic = g.inner(&v);
            let eps = 1e-5;
            let plus = energy::energy(&u.axpby(1.0, &v, eps), &spec, functional).total;
            let minus = energy::energy(&u.axpby(1.0, &v, -eps), &spec, functional).total;
            let fd = (plus - minus) / (2.0 * eps);
            worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-12));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && elapsed < 10.0,
        format!("worst relative mismatch {worst:.2e} over 40 fields, {elapsed:.2}s"),
    )
}

fn negativity(log: &mut MassLog) -> Outcome {
    let start = Instant::now();
    let spec = NonlinearitySpec::default_example();
    let harness = Harness::new(family_grid(), FlowConfig::default());
    let report = harness.verify_negativity(&spec, 1.0, None, &[1.0, 0.5, 0.25, 0.125]).unwrap();
    let r = solve_multistart(&harness.grid, 1.0, &spec, &FlowConfig::default(), Functional::J)
        .unwrap()
        .best;
    log.record(&r);
    let tol = (1e-4 * r.energy.abs()).max(5.0 * r.energy_error);
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        report.verdict == Verdict::Pass && r.energy < -tol && elapsed < 60.0,
        format!(
            "dilation min J = {:.6}, I_c = {:.8} < -{tol:.2e}, fitted exponent {:?} (predicted {}), {elapsed:.2}s",
            report.measurement("min_energy").unwrap(),
            r.energy,
            report.measurements["fitted_exponent"].as_f64(),
            report.measurements["predicted_exponent"]
        ),
    )
}

fn subadditivity() -> Outcome {
    let start = Instant::now();
    let spec = NonlinearitySpec::default_example();
    let harness = Harness::new(family_grid(), FlowConfig::default());
    let fractions = [0.3, 0.5, 0.7];
    let j = harness.verify_subadditivity(&spec, 1.0, &fractions, Functional::J).unwrap();
    let jinf = harness.verify_subadditivity(&spec, 1.0, &fractions, Functional::JInf).unwrap();

    let bench = Harness::new(bench_grid(), FlowConfig::default());
    let cross = bench.verify_subadditivity(&cubic(), 1.0, &fractions, Functional::J).unwrap();
    let mut worst_cross: f64 = 0.0;
    for row in cross.measurements["splits"].as_array().unwrap() {
        let a = row["a"].as_f64().unwrap();
        let b = row["b"].as_f64().unwrap();
        let exact = (1.0 - a.powi(6) - b.powi(6)) / 24.0;
        let gap = row["gap"].as_f64().unwrap();
        worst_cross = worst_cross.max((gap - exact).abs() / exact);
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        j.verdict == Verdict::Pass
            && jinf.verdict == Verdict::Pass
            && cross.verdict == Verdict::Pass
            && worst_cross <= 0.05
            && elapsed < 600.0,
        format!(
            "J min gap {:.3e} (tol {:.2e}), Jinf strict min gap {:.3e} (tol {:.2e}), cubic gaps within {:.2}% of closed form, {elapsed:.2}s",
            j.measurement("min_gap").unwrap_or(f64::NAN),
            j.tolerance,
            jinf.measurement("min_gap").unwrap_or(f64::NAN),
            jinf.tolerance,
            100.0 * worst_cross
        ),
    )
}

fn comparison() -> Outcome {
    let harness = Harness::new(family_grid(), FlowConfig::default());
    let with_gap = harness.verify_comparison(&NonlinearitySpec::default_example(), 1.0).unwrap();
    let control = harness
        .verify_comparison(&NonlinearitySpec::example(0.0, 1.0, 0.0, 1.0, 1.0), 1.0)
        .unwrap();
    let control_gap = control.measurement("gap").unwrap_or(f64::NAN);
    outcome(
        with_gap.verdict == Verdict::Pass && control.verdict == Verdict::Fail && control_gap.abs() < control.tolerance,
        format!(
            "default gap {:.4e} > tol {:.2e}; p0 = q1 = 0 gap {control_gap:.2e} below tol {:.2e}",
            with_gap.measurement("gap").unwrap(),
            with_gap.tolerance,
            control.tolerance
        ),
    )
}

fn continuity() -> Outcome {
    let harness = Harness::new(family_grid(), FlowConfig::default());
    let report = harness.verify_continuity(&NonlinearitySpec::default_example(), 1.0, 0.01).unwrap();
    let bench = Harness::new(bench_grid(), FlowConfig::default());
    let cubic_report = bench.verify_continuity(&cubic(), 1.0, 0.01).unwrap();
    let fd = cubic_report.measurement("forward_difference").unwrap();
    let predicted = -6.0 * 0.01 / 24.0;
    let rel = (fd - predicted).abs() / predicted.abs();
    outcome(
        report.verdict == Verdict::Pass && cubic_report.verdict == Verdict::Pass && rel <= 0.10,
        format!(
            "K_obs = {:.4}; cubic forward difference {fd:.5e} vs 6c^5 delta/24 = {predicted:.5e} ({:.2}%)",
            report.measurement("k_obs").unwrap(),
            100.0 * rel
        ),
    )
}

fn supercritical_and_critical(log: &mut MassLog) -> Outcome {
    let harness = Harness::new(family_grid(), FlowConfig::default());
    let degree7 = NonlinearitySpec::pure_power(1, 1.0, 7.0);
    let probe = harness.probe_supercritical(&degree7, 1.0, 1e3, 10).unwrap();

    let critical = NonlinearitySpec::pure_power(1, 1.0 / 3.0, 6.0);
    let a = 1.0;
    let coarse = estimate_gn_constant(&Grid::new(1, 512, 32.0).unwrap(), 4.0);
    let fine = estimate_gn_constant(&Grid::new(1, 1024, 32.0).unwrap(), 4.0);
    let stable = (coarse - fine).abs() / fine <= 0.01;
    let report = harness.critical_threshold(&critical, a, 1e2).unwrap();
    let formula = critical_mass(a, report.a_dd, 1);
    let formula_ok = (report.c_star - formula).abs() <= 1e-14 * formula
        && (report.c_star - (1.0 / (2.0 * a * report.a_dd)).powf(0.25)).abs() <= 1e-14;

    let below = solve_multistart(&harness.grid, 0.5 * report.c_star, &critical, &FlowConfig::default(), Functional::J)
        .unwrap()
        .best;
    log.record(&below);
    outcome(
        probe.verdict == Verdict::Pass
            && formula_ok
            && stable
            && report.below.verdict == Verdict::Pass
            && report.above.min_energy < -1e2,
        format!(
            "degree-7 probe min J = {:.4e}; A'' = {:.6} (M=512) / {:.6} (M=1024); c* = {:.6}; flow at c*/2 converged = {} (J = {:.3e}); probe at 2c* min J = {:.4e}",
            probe.measurement("min_energy").unwrap(),
            coarse,
            fine,
            report.c_star,
            report.below.converged,
            report.below.energy.unwrap_or(f64::NAN),
            report.above.min_energy
        ),
    )
}

fn radii(grid: &Grid) -> Vec<f64> {
    let top = grid.max_distance();
    (1..=64).map(|i| top * i as f64 / 64.0).collect()
}

fn converged_tail_profiles(
    grid: &Grid,
    spec: &NonlinearitySpec,
    c: f64,
    log: &mut MassLog,
) -> Vec<ConcentrationProfile> {
    let init = default_init(grid, spec.m(), c, InitStyle::GaussianBumps, 0).unwrap();
    let mut iterates: Vec<VectorField> = Vec::new();
    let r = minimize_observed(&init, c, spec, &FlowConfig::default(), Functional::J, |_, u| {
        iterates.push(u.clone())
    })
    .unwrap();
    log.record(&r);
    let rs = radii(grid);
    iterates
        .iter()
        .rev()
        .take(3)
        .rev()
        .map(|u| concentration_q(u, &rs).unwrap())
        .collect()
}

fn concentration(log: &mut MassLog) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let grids = [Grid::new(1, 128, 8.0).unwrap(), Grid::new(2, 32, 4.0).unwrap()];
    let mut profiles_ok = true;
    for k in 0..200u64 {
        let grid = &grids[(k % 2) as usize];
        let m = 1 + (k % 3) as usize;
        let u = default_init(grid, m, rng.gen_range(0.3..3.0), InitStyle::RandomSmooth, k).unwrap();
        let mut rs: Vec<f64> = (0..10).map(|_| rng.gen_range(0.01..grid.max_distance())).collect();
        rs.push(grid.max_distance());
        let p = concentration_q(&u, &rs).unwrap();
        let mut pairs: Vec<(f64, f64)> = rs.iter().cloned().zip(p.q_values.iter().cloned()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let monotone = pairs.windows(2).all(|w| w[0].1 <= w[1].1);
        let bounded = p.q_values.iter().all(|&q| (0.0..=p.total_mass).contains(&q));
        let saturated = (pairs.last().unwrap().1 - p.total_mass).abs() <= 1e-10 * p.total_mass;
        profiles_ok &= monotone && bounded && saturated;
    }

    let grid = family_grid();
    let rs = radii(&grid);
    let bench = converged_tail_profiles(&bench_grid(), &cubic(), 1.0, log);
    let family = converged_tail_profiles(&grid, &NonlinearitySpec::default_example(), 1.0, log);
    let compact_bench = classify_trichotomy(&bench, 1.0).unwrap();
    let compact_family = classify_trichotomy(&family, 1.0).unwrap();

    let spreading: Vec<ConcentrationProfile> = [1.0, 4.0, 16.0, 64.0]
        .iter()
        .map(|&w| concentration_q(&gaussian_trial(&grid, 2, 1.0, w).unwrap(), &rs).unwrap())
        .collect();
    let vanishing = classify_trichotomy(&spreading, 1.0).unwrap();

    let separating: Vec<ConcentrationProfile> = [2.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&d| {
            let bump = |x: f64| (-(x / 0.7).powi(2)).exp();
            let u = VectorField::from_fn(&grid, 2, |x| {
                let v = bump(x[0] - d / 2.0) + bump(x[0] + d / 2.0);
                vec![v, v]
            })
            .project_mass(1.0)
            .unwrap();
            concentration_q(&u, &rs).unwrap()
        })
        .collect();
    let dichotomy = classify_trichotomy(&separating, 1.0).unwrap();

    outcome(
        profiles_ok
            && compact_bench == Trichotomy::Compact
            && compact_family == Trichotomy::Compact
            && vanishing == Trichotomy::Vanishing
            && dichotomy == Trichotomy::Dichotomy,
        format!(
            "200 random profiles monotone/saturating = {profiles_ok}; benchmark {compact_bench:?}, default family {compact_family:?}, spreading {vanishing:?}, separating {dichotomy:?}"
        ),
    )
}

fn splitting(log: &mut MassLog) -> Outcome {
    let grid = family_grid();
    let spec = NonlinearitySpec::default_example();
    let init = default_init(&grid, 2, 1.0, InitStyle::GaussianBumps, 0).unwrap();
    let r = minimize(&init, 1.0, &spec, &FlowConfig::default(), Functional::J).unwrap();
    log.record(&r);
    // second copy one half-period away, where the x-dependence has decayed
    let u = r.minimizer.add(&r.minimizer.lattice_shift(&[32]).unwrap());
    let center = grid.flat_index(&[grid.points() / 2]);
    let cuts = [(2.0, 5.0), (3.0, 7.0), (4.0, 9.0)];
    let rows: Vec<_> = cuts
        .iter()
        .map(|&(r0, rn)| splitting_defect(&u, &spec, center, r0, rn).unwrap())
        .collect();
    let annulus_down = rows.windows(2).all(|w| w[1].annulus_mass < w[0].annulus_mass);
    let defect_down = rows.windows(2).all(|w| w[1].defect < w[0].defect);
    let detail = rows
        .iter()
        .map(|s| format!("(R0={}, Rn={}: annulus {:.2e}, defect {:.2e})", s.inner_radius, s.outer_radius, s.annulus_mass, s.defect))
        .collect::<Vec<_>>()
        .join(" ");
    outcome(annulus_down && defect_down, detail)
}

const DETERMINISM_CONFIG: &str = r#"{
  "grid": {"N": 1, "M": 256, "L": 16.0},
  "nonlinearity": {"kind": "paper-example", "m": 2, "p0": 1.0, "q_inf": 1.0, "q1": 1.0, "terms": [[1.0, 1.0]]},
  "flow": {"multistart": 3, "seed": 5},
  "c": 1.0,
  "radii": [1.0, 2.0, 4.0]
}"#;

fn run_cli(config: &Path, out: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_ccmin"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove(ccmin::cli::OUT_DIR_ENV)
        .status()
        .expect("spawn ccmin")
        .code()
        .unwrap_or(-1)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, DETERMINISM_CONFIG).unwrap();
    let mut identical = true;
    let mut codes = Vec::new();
    for (args, files) in [
        (vec!["solve"], vec!["report.json", "trace.csv", "minimizer.vfld"]),
        (vec!["verify", "comparison"], vec!["comparison.json"]),
    ] {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        codes.push(run_cli(&config, &a, &args));
        codes.push(run_cli(&config, &b, &args));
        for f in files {
            let fa = std::fs::read(a.join(f)).unwrap_or_default();
            let fb = std::fs::read(b.join(f)).unwrap_or_default();
            identical &= !fa.is_empty() && fa == fb;
        }
    }
    outcome(
        identical && codes.iter().all(|&c| c == 0),
        format!("two runs byte-identical = {identical}, exit codes {codes:?}"),
    )
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful for this binary
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut log = MassLog::default();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "soliton oracle", soliton(&mut log)));
    results.push((2, "gradient consistency", gradient_consistency()));
    results.push((4, "negativity", negativity(&mut log)));
    results.push((5, "subadditivity", subadditivity()));
    results.push((6, "comparison", comparison()));
    results.push((7, "continuity", continuity()));
    results.push((8, "supercritical / critical", supercritical_and_critical(&mut log)));
    results.push((9, "concentration diagnostics", concentration(&mut log)));
    results.push((10, "splitting inequality", splitting(&mut log)));
    results.push((11, "determinism", determinism()));
    let mass = outcome(
        log.worst <= 1e-12,
        format!("max relative mass error {:.2e} over {} recorded iterates", log.worst, log.iterates),
    );
    results.insert(2, (3, "constraint exactness", mass));

    let mut failed = 0;
    for (n, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} [{tag}] {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
