//! Delay-efficiency boundary for five users with ternary feedback, the
//! protocol a designer picks with U = -max(200 (1 - tau), D), and a random
//! cloud of protocols that should all sit above the boundary.
//!
//! ```text
//! cargo run --release --example boundary_sweep > boundary.csv
//! ```

use macmem::model::FeedbackKind;
use macmem::optimize::{self, Model, SolverOptions};

fn main() -> macmem::Result<()> {
    let (kind, n) = (FeedbackKind::Ternary, 5);
    let options = SolverOptions::default();
    let points = optimize::boundary_sweep(&optimize::default_grid(), kind, n, &options)?;
    optimize::write_boundary_csv(std::io::stdout().lock(), &points, kind, n)?;

    let turning = points
        .iter()
        .filter(|p| p.converged)
        .min_by(|a, b| a.delay.total_cmp(&b.delay))
        .expect("some point converged");
    eprintln!("turning point: tau = {:.2}, D = {:.3}", turning.target_tau, turning.delay);

    let best = points
        .iter()
        .filter(|p| p.converged)
        .max_by(|a, b| optimize::default_utility(a.achieved_tau, a.delay).total_cmp(&optimize::default_utility(b.achieved_tau, b.delay)))
        .expect("some point converged");
    let refined = optimize::default_utility_optimum(
        best.target_tau - 0.01,
        best.target_tau + 0.01,
        &best.protocol_vector,
        kind,
        n,
        &options,
    )?;
    eprintln!(
        "designer's choice: tau = {:.4}, D = {:.4}, f = {:.4?}",
        refined.achieved_tau, refined.delay, refined.protocol_vector
    );

    let cloud = optimize::random_protocol_cloud(5000, 1, kind, n, Model::Slotted)?;
    let below = optimize::cloud_violations(&cloud, &points, kind, n, &options, 0.5)?.len();
    let under_100 = cloud.iter().filter(|s| s.delay < 100.0).count();
    eprintln!("random protocols: {under_100}/5000 with D < 100, {below} below the boundary");
    Ok(())
}
