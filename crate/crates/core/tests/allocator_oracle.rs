use nalgebra::DMatrix;
use resalloc::allocator::*;
use resalloc::team::{CapabilityMatrix, SpeciesMapping};

fn exact() -> SolveOptions {
    SolveOptions {
        gap_tol: 0.0,
        ..SolveOptions::default()
    }
}

#[test]
fn solver_matches_enumeration() {
    let report = oracle_check(100, 2024, InstanceLimits::default(), &exact(), 1e-9).unwrap();
    assert!(report.passed(), "{:?}", report);
}

#[test]
fn biased_bound_is_caught() {
    // Overstating every node bound prunes the optimum on some instance.
    let biased = SolveOptions {
        bound_bias: 5.0,
        ..exact()
    };
    let report = oracle_check(100, 2024, InstanceLimits::default(), &biased, 1e-9).unwrap();
    assert!(!report.mismatches.is_empty());
}

#[test]
fn relaxation_bound_is_valid() {
    for k in 0..60 {
        let p = suite_instance(11, k, InstanceLimits::default());
        let Ok(opt) = enumerate_optimal(&p) else { continue };
        let bound = relaxation_bound(&p).unwrap();
        assert!(bound <= opt.objective + 1e-9, "instance {k}: {bound} > {}", opt.objective);
    }
}

#[test]
fn solutions_replay_exactly() {
    for k in 0..100 {
        let p = suite_instance(5, k, InstanceLimits::default());
        if let Ok(s) = solve(&p, &exact()) {
            p.check_solution(&s).unwrap();
            assert_eq!(s.objective, p.objective(&s.assignment, &s.relaxed, &s.margins));
        }
    }
}

fn two_task_team(n: usize) -> AllocationProblem {
    AllocationProblem {
        capabilities: CapabilityMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap(),
        species: SpeciesMapping::from_species(1, vec![0; n]).unwrap(),
        requirements: vec![
            DMatrix::from_row_slice(1, 2, &[2.0, 2.0]),
            DMatrix::from_row_slice(1, 2, &[2.0, 2.0]),
        ],
        degradation: DMatrix::zeros(2, 2),
        task_weights: vec![1.0, 10.0],
        species_costs: vec![0.1],
        transition_costs: vec![0.0, 0.0],
        previous: vec![None; n],
        discrepancy: vec![0.0; n],
        relaxation_penalty: 0.01,
        delta_max: 1000.0,
        dv_thresh: 0.9,
    }
}

#[test]
fn scarce_team_relaxes_cheapest_task() {
    let s = solve(&two_task_team(2), &exact()).unwrap();
    assert_eq!(s.relaxed, vec![true, false]);
    assert!(s.margins.row(1).iter().all(|&m| m >= 0.0));
    assert!(s.margins.row(0).iter().any(|&m| m < 0.0));
}

#[test]
fn high_discrepancy_robot_is_idle() {
    let mut p = two_task_team(5);
    p.discrepancy[0] = 0.95;
    let s = solve(&p, &exact()).unwrap();
    assert_eq!(s.assignment[0], None);
    assert_eq!(allocation_matrix(&s.assignment, 2).column(0).sum(), 0.0);
}

#[test]
fn balance_weight_spreads_capability() {
    // Larger l never increases the summed squared margins.
    let mut prev = f64::INFINITY;
    for l in [0.001, 0.01, 0.1, 1.0, 10.0] {
        let mut p = two_task_team(6);
        p.relaxation_penalty = l;
        let s = solve(&p, &exact()).unwrap();
        let spread: f64 = (0..2).map(|t| s.margins.row(t).sum().powi(2)).sum();
        assert!(spread <= prev + 1e-9, "l = {l}: {spread} > {prev}");
        prev = spread;
    }
}

#[test]
fn diverged_relaxation_keeps_exact_optimum() {
    // The relaxation of this instance returns non-finite multipliers.
    let p = suite_instance(15229099731406059879, 877, InstanceLimits::default());
    let solved = solve(&p, &exact());
    match enumerate_optimal(&p) {
        Ok(opt) => {
            let s = solved.unwrap();
            assert!((s.objective - opt.objective).abs() <= 1e-9 * opt.objective.abs().max(1.0));
            assert!(relaxation_bound(&p).unwrap() <= opt.objective + 1e-9);
        }
        Err(_) => assert!(solved.is_err()),
    }
}
