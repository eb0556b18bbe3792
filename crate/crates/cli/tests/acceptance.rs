//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twopoint_cli::config::{parse_config, parse_unchecked, preset, PRESETS};
use twopoint_cli::{execute, exit, Command, ConfigSource, Invocation};
use twopoint_core::diagnostics::{
    blowup_time_bound, check_h_monotone, discrete_norms, energy_e, functional_h, functional_i_j,
    sandwich_bounds, DiagnosticsSeries,
};
use twopoint_core::discretization::{BoundaryClosure, SemiDiscreteState, SemiDiscreteSystem, SpatialGrid};
use twopoint_core::model::{hellwig_transform, mu_star, GeneralBoundaryCoefficients};
use twopoint_core::solver::{picard_solve, Termination};
use twopoint_core::verification::{
    boundary_residuals, convergence_study, default_dt, manufactured_problem, pde_residual,
};
use twopoint_core::{ProblemParameters, ScalarFn, SourceTerms};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let spent = start.elapsed();
    ensure(spent < limit, format!("took {spent:?}, limit {limit:?}"))?;
    Ok(spent)
}

fn manufactured_residuals() -> Outcome {
    let start = Instant::now();
    let (params, data) = manufactured_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (x, t) = (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=5.0));
        worst = worst.max(pde_residual(&params, &data, x, t).abs());
    }
    let mut worst_bc = 0.0f64;
    for _ in 0..100 {
        let (r0, r1) = boundary_residuals(&params, &data, rng.gen_range(0.0..=5.0));
        worst_bc = worst_bc.max(r0.abs()).max(r1.abs());
    }
    ensure(worst < 1e-12, format!("interior residual {worst:e}"))?;
    ensure(worst_bc < 1e-12, format!("boundary residual {worst_bc:e}"))?;
    let spent = within(start, Duration::from_secs(1))?;
    Ok(format!("max residual {worst:.2e} interior, {worst_bc:.2e} boundary ({spent:.2?})"))
}

fn paper_grid_run() -> Outcome {
    let start = Instant::now();
    let cfg = parse_config(&preset("paper-grid").unwrap().to_toml()).map_err(|e| e.to_string())?.config;
    ensure(
        (cfg.grid.n, cfg.solver.dt, cfg.solver.t_final) == (10, 0.08, 5.0),
        "preset settings differ from N = 10, dt = 0.08, t_final = 5",
    )?;
    let grid = cfg.grid.build().map_err(|e| e.to_string())?;
    let record = picard_solve(&cfg.solver, &cfg.parameters, &cfg.data, &grid).map_err(|e| e.to_string())?;
    ensure(record.termination == Termination::Completed, format!("{:?}", record.termination))?;
    ensure(record.final_state().t == 5.0, "did not reach t = 5")?;
    let sup: Vec<f64> = record.snapshots.iter().map(|s| s.sup_u()).collect();
    let rise = sup.windows(2).fold(f64::NEG_INFINITY, |m, w| m.max(w[1] - w[0]));
    ensure(rise <= 1e-3, format!("max|U| rises by {rise:e}"))?;
    let spent = within(start, Duration::from_secs(5))?;
    Ok(format!(
        "completed, max|U| {:.4} -> {:.4}, largest rise {rise:.2e} ({spent:.2?})",
        sup[0],
        sup[sup.len() - 1]
    ))
}

fn spatial_refinement() -> Outcome {
    let start = Instant::now();
    let base = preset("paper-grid").unwrap().solver;
    let rows = convergence_study(&[5, 10, 20, 40], default_dt, &base, BoundaryClosure::GhostPoint)
        .map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    for r in &rows {
        errors.push(r.max_abs.ok_or_else(|| format!("N = {}: {:?}", r.n, r.failure))?);
    }
    ensure(errors.windows(2).all(|w| w[1] < w[0]), format!("errors not decreasing: {errors:?}"))?;
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.observed_order).collect();
    ensure(orders.len() == 3 && orders.iter().all(|&o| o >= 0.9), format!("orders {orders:?}"))?;
    let spent = within(start, Duration::from_secs(60))?;
    Ok(format!(
        "errors {:.3e} {:.3e} {:.3e} {:.3e}, orders {:.2} {:.2} {:.2} ({spent:.2?})",
        errors[0], errors[1], errors[2], errors[3], orders[0], orders[1], orders[2]
    ))
}

fn params(lambda_tilde: f64, p: f64) -> ProblemParameters {
    ProblemParameters {
        lambda: 1.0,
        lambda0: 1.0,
        lambda1: 1.0,
        lambda_tilde0: lambda_tilde,
        lambda_tilde1: lambda_tilde,
        p,
        alpha: p,
        beta: p,
        sources: SourceTerms::default(),
    }
}

fn constant_oracles() -> Outcome {
    let mu = mu_star(&params(-0.5, 3.0)).map_err(|e| e.to_string())?;
    ensure(mu == 0.75, format!("mu_star = {mu}"))?;
    let (b1, b2) = sandwich_bounds(&params(0.0, 3.0), 0.1, 3.0).map_err(|e| e.to_string())?;
    ensure((b1 - 7.0 / 30.0).abs() < 1e-12, format!("beta1 = {b1}"))?;
    ensure((b2 - 5.9).abs() < 1e-12, format!("beta2 = {b2}"))?;
    let t_star = blowup_time_bound(1.0 / 6.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    ensure((t_star - 5.0).abs() < 1e-12, format!("T* = {t_star}"))?;
    Ok(format!("mu* = {mu}, (beta1, beta2) = ({b1:.15}, {b2:.15}), T* = {t_star:.15}"))
}

fn functional_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let params = ProblemParameters {
            lambda: rng.gen_range(0.1..3.0),
            lambda0: rng.gen_range(0.1..3.0),
            lambda1: rng.gen_range(0.1..3.0),
            lambda_tilde0: rng.gen_range(-0.5..0.5),
            lambda_tilde1: rng.gen_range(-0.5..0.5),
            p: rng.gen_range(2.01..6.0),
            alpha: rng.gen_range(2.01..6.0),
            beta: rng.gen_range(2.01..6.0),
            sources: SourceTerms::default(),
        };
        let grid = SpatialGrid::new(rng.gen_range(2..60)).unwrap();
        let scale = 10f64.powf(rng.gen_range(-2.0..1.0));
        let u: Vec<f64> = (0..grid.len()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let state = SemiDiscreteState { t: 0.0, u, v };
        let h_tilde = rng.gen_range(-0.2..0.2);

        let e = energy_e(&state, &params, &grid);
        let h = functional_h(&state, &params, &grid, h_tilde);
        let coupling = h_tilde * state.u[0] * state.u[grid.n()];
        let sum = (h + e + coupling).abs() / (e.abs() + h.abs() + coupling.abs()).max(1.0);
        worst = worst.max(sum);
        ensure(sum <= 1e-10, format!("draw {k}: H + E + h u(0)u(1) = {sum:e}"))?;

        let at_rest = SemiDiscreteState {
            v: vec![0.0; grid.len()],
            ..state.clone()
        };
        let (_, j) = functional_i_j(&at_rest, &params, &grid);
        let e0 = energy_e(&at_rest, &params, &grid);
        ensure((e0 - j).abs() <= 1e-10 * e0.abs().max(1.0), format!("draw {k}: E - J = {:e}", e0 - j))?;

        let n = discrete_norms(&at_rest, &params, &grid);
        let (r1, r2, r3) = (
            rng.gen_range(2.0..=params.p),
            rng.gen_range(2.0..=params.alpha),
            rng.gen_range(2.0..=params.beta),
        );
        let lhs = n.lp_p.powf(r1 / params.p) + n.u_left.abs().powf(r2) + n.u_right.abs().powf(r3);
        let rhs = 5.0 * (n.h1_sq + n.lp_p + n.u_left.abs().powf(params.alpha) + n.u_right.abs().powf(params.beta));
        ensure(lhs <= rhs + 1e-10, format!("draw {k}: mixed-power bound {lhs} > {rhs}"))?;
        let sup = at_rest.sup_u();
        let bound = std::f64::consts::SQRT_2 * n.h1_sq.sqrt();
        ensure(sup <= bound + 1e-10, format!("draw {k}: sup {sup} > sqrt2 |u|_1 = {bound}"))?;
    }
    let spent = within(start, Duration::from_secs(5))?;
    Ok(format!("1000 states, worst relative |H + E + h u(0)u(1)| {worst:.1e} ({spent:.2?})"))
}

fn blowup_regime() -> Outcome {
    let start = Instant::now();
    let cfg = parse_config(&preset("blowup").unwrap().to_toml()).map_err(|e| e.to_string())?.config;
    ensure(cfg.grid.n == 40 && cfg.solver.blowup_threshold == 1e8, "preset is not N = 40 with threshold 1e8")?;
    let grid = cfg.grid.build().map_err(|e| e.to_string())?;
    let record = picard_solve(&cfg.solver, &cfg.parameters, &cfg.data, &grid).map_err(|e| e.to_string())?;
    let series = DiagnosticsSeries::evaluate(&record, &cfg.parameters, &cfg.data, &grid, &cfg.diagnostics)
        .map_err(|e| e.to_string())?;
    let h0 = series.values[0].h.ok_or("H undefined")?;
    // u ≡ 5, v ≡ 0, no coupling: H = (1/3)5³ + 2·(1/4)5⁴ − ½·5²
    let oracle = 125.0 / 3.0 + 2.0 * 625.0 / 4.0 - 12.5;
    ensure((h0 - oracle).abs() <= 0.01 * oracle, format!("H(0) = {h0}, expected {oracle}"))?;
    let event = record.blowup().ok_or("no blow-up detected")?;
    ensure(event.t < cfg.solver.t_final, format!("blow-up at {}", event.t))?;
    let system = SemiDiscreteSystem::new(&cfg.parameters, &cfg.data, &grid).map_err(|e| e.to_string())?;
    let mono = check_h_monotone(&record, &system, &cfg.solver, series.constants.h_tilde.ok_or("no constant h")?);
    ensure(
        mono.ok(0.9),
        format!("{} violations, {:.0}% resolved", mono.violations.len(), 100.0 * mono.resolved_fraction()),
    )?;
    let spent = within(start, Duration::from_secs(10))?;
    Ok(format!(
        "H(0) = {h0:.3}, blow-up at t = {:.3}, H nondecreasing on {}/{} resolved intervals ({spent:.2?})",
        event.t,
        mono.intervals - mono.unresolved,
        mono.intervals
    ))
}

fn decay_regime() -> Outcome {
    let start = Instant::now();
    let cfg = parse_config(&preset("decay").unwrap().to_toml()).map_err(|e| e.to_string())?.config;
    let grid = cfg.grid.build().map_err(|e| e.to_string())?;
    let record = picard_solve(&cfg.solver, &cfg.parameters, &cfg.data, &grid).map_err(|e| e.to_string())?;
    ensure(record.completed(), format!("{:?}", record.termination))?;
    let series = DiagnosticsSeries::evaluate(&record, &cfg.parameters, &cfg.data, &grid, &cfg.diagnostics)
        .map_err(|e| e.to_string())?;
    let k = &series.constants;
    let eta = k.decay.ok_or("decay constants unavailable")?.eta_star;
    ensure(eta < 1.0 && (eta - 0.69).abs() < 0.01, format!("eta* = {eta}"))?;
    let i_min = series.values.iter().map(|v| v.i).fold(f64::INFINITY, f64::min);
    ensure(i_min > 0.0, format!("min I = {i_min:e}"))?;
    let fit = k.decay_fit.ok_or("no decay fit")?;
    ensure(fit.gamma > 0.0 && fit.residual < 0.1, format!("fit {fit:?}"))?;
    let (b1, b2) = k.sandwich.ok_or("sandwich bounds unavailable")?;
    ensure(series.sandwich_holds(b1, b2, 1e-15), "beta1 E <= script L <= beta2 E fails")?;
    let spent = within(start, Duration::from_secs(10))?;
    Ok(format!(
        "eta* = {eta:.4}, min I = {i_min:.2e}, gamma = {:.3}, residual {:.3}, sandwich ({b1:.3}, {b2:.3}) ({spent:.2?})",
        fit.gamma, fit.residual
    ))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism_and_round_trip() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (name, command) in [("paper-grid", Command::Run), ("blowup", Command::Blowup), ("decay", Command::Decay)] {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{name}-{rep}"));
            let outcome = execute(&Invocation {
                command,
                source: ConfigSource::Preset(name.into()),
                out: Some(out.clone()),
                workers: None,
                format: None,
            });
            ensure(outcome.exit_code == exit::SUCCESS, format!("{name}: exit {}", outcome.exit_code))?;
            runs.push(csv_files(&out));
        }
        ensure(!runs[0].is_empty() && runs[0] == runs[1], format!("{name}: CSV outputs differ"))?;
        compared += runs[0].len();
    }

    for name in PRESETS {
        let cfg = preset(name).unwrap();
        let text = cfg.to_toml();
        let back = parse_unchecked(&text).map_err(|e| e.to_string())?;
        ensure(back == cfg && back.to_toml() == text, format!("{name}: config does not round-trip"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut draws = 0;
    while draws < 100 {
        let mut row = || [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let coeffs = GeneralBoundaryCoefficients {
            alpha: [row(), row()],
            beta: [row(), row()],
            f0: ScalarFn::constant(rng.gen_range(-2.0..2.0)),
            f1: ScalarFn::constant(rng.gen_range(-2.0..2.0)),
        };
        if coeffs.determinant().abs() < 1e-3 {
            continue;
        }
        draws += 1;
        let canon = hellwig_transform(&coeffs).map_err(|e| e.to_string())?;
        let (u0, u1, v0, v1, t) = (
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.0..5.0),
        );
        let (ux0, ux1) = canon.fluxes(u0, u1, v0, v1, t);
        for i in 0..2 {
            let (a, b) = (coeffs.alpha[i], coeffs.beta[i]);
            let f = if i == 0 { &coeffs.f0 } else { &coeffs.f1 };
            let terms = [a[0] * u0, a[1] * ux0, a[2] * v0, b[0] * u1, b[1] * ux1, b[2] * v1];
            let size = terms.iter().fold(f.at_t(t).abs(), |m, x| m.max(x.abs())).max(1.0);
            let residual = (terms.iter().sum::<f64>() - f.at_t(t)).abs() / size;
            worst = worst.max(residual);
        }
    }
    ensure(worst < 1e-10, format!("Hellwig round-trip residual {worst:e}"))?;
    Ok(format!(
        "{compared} CSV files byte-identical across repeated runs, presets round-trip, Hellwig residual {worst:.1e} over 100 draws"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("manufactured-solution residual", manufactured_residuals),
        ("paper-grid run", paper_grid_run),
        ("spatial refinement", spatial_refinement),
        ("constant oracles", constant_oracles),
        ("functional identities", functional_identities),
        ("blow-up regime", blowup_regime),
        ("decay regime", decay_regime),
        ("determinism and round-trip", determinism_and_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
