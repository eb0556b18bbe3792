use twopoint_core::diagnostics::{check_h_monotone, FunctionalConfig};
use twopoint_core::discretization::{SemiDiscreteSystem, SpatialGrid};
use twopoint_core::model::{check_assumptions, Mode};
use twopoint_core::solver::{run_simulation, SolverConfig};
use twopoint_core::verification::manufactured_problem;
use twopoint_core::{ProblemData, ScalarFn};

#[test]
fn large_data_blows_up_with_nondecreasing_h() {
    let params = manufactured_problem().0;
    let data = ProblemData::homogeneous(ScalarFn::constant(5.0), ScalarFn::zero());
    let report = check_assumptions(&params, &data, Mode::Blowup, 5.0);
    assert!(report.a1_ok() && report.a2prime_ok() && report.a3prime_ok());

    let grid = SpatialGrid::new(40).unwrap();
    let cfg = SolverConfig { dt: 0.001, ..SolverConfig::default() };
    let (record, series) = run_simulation(&cfg, &params, &data, &grid, &FunctionalConfig::default()).unwrap();
    let h0 = series.values[0].h.unwrap();
    assert!((h0 - 341.6667).abs() / 341.6667 < 0.01);
    assert_eq!(series.constants.l0_positive, Some(true));
    let event = record.blowup().expect("blow-up detected");
    assert!(event.t < cfg.t_final);

    let system = SemiDiscreteSystem::new(&params, &data, &grid).unwrap();
    let mono = check_h_monotone(&record, &system, &cfg, 0.0);
    assert!(mono.ok(0.9), "{mono:?}");
}

#[test]
fn small_data_decays() {
    let params = manufactured_problem().0;
    let data = ProblemData::homogeneous(ScalarFn::constant(0.1), ScalarFn::zero());
    assert!(check_assumptions(&params, &data, Mode::Decay, 10.0).all_ok());

    let grid = SpatialGrid::new(20).unwrap();
    let cfg = SolverConfig {
        dt: 0.01,
        t_final: 10.0,
        ..SolverConfig::default()
    };
    let (record, series) = run_simulation(&cfg, &params, &data, &grid, &FunctionalConfig::default()).unwrap();
    assert!(record.completed());
    let c = &series.constants;
    let decay = c.decay.unwrap();
    assert!(decay.decays && (decay.eta_star - 0.69).abs() < 0.01);
    assert!(c.smallness.unwrap().satisfied);
    assert!(series.values.iter().all(|v| v.i > 0.0));
    let fit = c.decay_fit.unwrap();
    assert!(fit.gamma > 0.0 && fit.residual < 0.1, "{fit:?}");
    let (b1, b2) = c.sandwich.unwrap();
    assert!(series.sandwich_holds(b1, b2, 1e-10));
}

#[test]
fn manufactured_run_has_finite_energy() {
    let (params, data) = manufactured_problem();
    let grid = SpatialGrid::new(10).unwrap();
    let (record, series) =
        run_simulation(&SolverConfig::default(), &params, &data, &grid, &FunctionalConfig::default()).unwrap();
    assert!(record.completed());
    assert!(series.values.iter().all(|v| v.e.is_finite()));
    assert_eq!(series.values.len(), record.snapshots.len());
}

#[test]
fn zero_problem_has_zero_functionals() {
    let params = manufactured_problem().0;
    let data = ProblemData::homogeneous(ScalarFn::zero(), ScalarFn::zero());
    let grid = SpatialGrid::new(8).unwrap();
    let cfg = SolverConfig { t_final: 1.0, ..SolverConfig::default() };
    let (_, series) = run_simulation(&cfg, &params, &data, &grid, &FunctionalConfig::default()).unwrap();
    for v in &series.values {
        assert_eq!([v.e, v.h.unwrap(), v.i, v.j, v.phi.unwrap(), v.psi, v.script_l], [0.0; 7]);
    }
}
