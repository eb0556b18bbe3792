use twopoint_core::discretization::{BoundaryClosure, SemiDiscreteSystem, SpatialGrid};
use twopoint_core::verification::{exact_solution, manufactured_problem};

/// Max residual of the semi-discrete right side against `u_tt` for
/// `u = e^{x−t}`, split into interior and boundary rows.
fn residuals(n: usize, closure: BoundaryClosure, t: f64) -> (f64, f64) {
    let (params, data) = manufactured_problem();
    let grid = SpatialGrid::new(n).unwrap().with_closure(closure);
    let system = SemiDiscreteSystem::new(&params, &data, &grid).unwrap();
    let u: Vec<f64> = grid.nodes().iter().map(|&x| exact_solution(x, t)).collect();
    let v: Vec<f64> = u.iter().map(|u| -u).collect();
    let x: Vec<f64> = u.iter().chain(&v).copied().collect();
    let out = system.rhs(t, &x, &u).unwrap();
    let r: Vec<f64> = (0..=n).map(|j| (out[n + 1 + j] - u[j]).abs()).collect();
    let interior = r[1..n].iter().fold(0.0f64, |m, e| m.max(*e));
    (interior, r[0].max(r[n]))
}

#[test]
fn ghost_closure_is_consistent() {
    for t in [0.0, 0.8, 3.0] {
        let mut prev = residuals(10, BoundaryClosure::GhostPoint, t);
        for n in [20, 40, 80] {
            let cur = residuals(n, BoundaryClosure::GhostPoint, t);
            assert!(prev.0 / cur.0 >= 3.5, "interior ratio {} at N={n}", prev.0 / cur.0);
            assert!(prev.1 / cur.1 >= 1.8, "boundary ratio {} at N={n}", prev.1 / cur.1);
            prev = cur;
        }
    }
}

#[test]
fn literal_boundary_rows_do_not_converge() {
    let coarse = residuals(10, BoundaryClosure::Literal, 0.5);
    let fine = residuals(80, BoundaryClosure::Literal, 0.5);
    assert!(coarse.0 / fine.0 > 50.0);
    // an O(1) residual: refining eightfold leaves it essentially unchanged
    let ratio = coarse.1 / fine.1;
    assert!((0.8..1.25).contains(&ratio), "ratio {ratio}");
    assert!(fine.1 > 0.1);
}
