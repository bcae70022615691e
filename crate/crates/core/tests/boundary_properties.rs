use macmem::chain::metrics_reduced;
use macmem::model::{FeedbackKind, FeedbackTechnology};
use macmem::optimize::{self, Model, SolverOptions, CONSTRAINT_TOL, LOWER, UPPER};
use macmem::protocols;

const N: usize = 5;

#[test]
fn converged_points_are_feasible_when_reanalyzed() {
    let grid = optimize::descending_grid(0.1, 0.9, 0.1);
    for kind in [FeedbackKind::SuccessFailure, FeedbackKind::Ternary] {
        for p in optimize::boundary_sweep(&grid, kind, N, &SolverOptions::default()).unwrap() {
            assert!(p.protocol_vector.iter().all(|v| (LOWER..=UPPER).contains(v)));
            if p.converged {
                let m = metrics_reduced(&p.protocol(kind, N).unwrap()).unwrap();
                assert!((m.total_throughput - p.target_tau).abs() <= CONSTRAINT_TOL, "{kind} at {}", p.target_tau);
                assert_eq!(m.average_delay, p.delay);
            }
        }
    }
}

#[test]
fn finer_feedback_never_loses_on_the_right_branch() {
    let grid = optimize::descending_grid(0.5, 0.95, 0.05);
    let sweeps = optimize::family_sweeps(&grid, &FeedbackKind::ALL, N, &SolverOptions::default()).unwrap();
    for (coarse, coarse_points) in &sweeps {
        for (fine, fine_points) in &sweeps {
            let refines = FeedbackTechnology::new(*fine, N).unwrap().refines(&FeedbackTechnology::new(*coarse, N).unwrap());
            if coarse == fine || !refines {
                continue;
            }
            for (c, f) in coarse_points.iter().zip(fine_points) {
                if c.converged {
                    assert!(f.converged, "{fine} failed at {} where {coarse} converged", f.target_tau);
                    assert!(f.delay <= c.delay + 0.5, "{fine} {} > {coarse} {} at {}", f.delay, c.delay, f.target_tau);
                }
            }
        }
    }
}

#[test]
fn embedding_preserves_metrics() {
    let x = [0.3, 0.9, 0.4];
    let coarse = metrics_reduced(&protocols::one_slot(x.to_vec(), FeedbackKind::None, N).unwrap()).unwrap();
    for fine in FeedbackKind::ALL {
        let y = optimize::embed_one_slot(&x, FeedbackKind::None, fine, N).unwrap();
        let m = metrics_reduced(&protocols::one_slot(y, fine, N).unwrap()).unwrap();
        assert!((m.total_throughput - coarse.total_throughput).abs() < 1e-12);
        assert!((m.average_delay - coarse.average_delay).abs() < 1e-9);
    }
    let ternary = protocols::f_optimal();
    assert!(optimize::embed_one_slot(ternary.probabilities(), FeedbackKind::Ternary, FeedbackKind::SuccessFailure, N).is_err());
}

#[test]
fn random_protocols_do_not_beat_the_boundary() {
    let kind = FeedbackKind::Ternary;
    let options = SolverOptions::default();
    let boundary = optimize::boundary_sweep(&optimize::default_grid(), kind, N, &options).unwrap();
    let cloud = optimize::random_protocol_cloud(5000, 11, kind, N, Model::Slotted).unwrap();
    assert_eq!(cloud.len(), 5000);
    let violations = optimize::cloud_violations(&cloud, &boundary, kind, N, &options, 0.5).unwrap();
    assert!(violations.is_empty(), "{violations:?}");
}

#[test]
fn optimizer_is_deterministic() {
    let grid = [0.7, 0.6, 0.45];
    let options = SolverOptions { seed: 3, ..SolverOptions::default() };
    let a = optimize::boundary_sweep(&grid, FeedbackKind::Ternary, N, &options).unwrap();
    let b = optimize::boundary_sweep(&grid, FeedbackKind::Ternary, N, &options).unwrap();
    assert_eq!(a, b);
}

#[test]
fn boundary_at_keeps_input_order() {
    let taus = [0.3, 0.6, 0.3, 0.5];
    let points = optimize::boundary_at(&taus, FeedbackKind::SuccessFailure, N, &SolverOptions::default()).unwrap();
    for (t, p) in taus.iter().zip(&points) {
        assert_eq!(p.target_tau, *t);
    }
    assert_eq!(points[0], points[2]);
}
