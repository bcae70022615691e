//! Two-state, memoryless, 1-slot (ACK only) and TDMA protocols for five
//! users on one throughput-delay plane. The 1-slot boundary is solved at
//! exactly the throughputs the two-state sweep reaches.
//!
//! ```text
//! cargo run --release --example compare_families
//! ```

use macmem::chain::metrics_reduced;
use macmem::model::FeedbackKind;
use macmem::optimize::{self, SolverOptions};
use macmem::protocols;

fn main() -> macmem::Result<()> {
    let n = 5;
    let mut two_state = Vec::new();
    for i in 1..=100 {
        let eta = 100.0 / i as f64;
        let m = metrics_reduced(&protocols::two_state_equivalent(eta, n)?)?;
        if m.total_throughput > 0.0 && m.average_delay.is_finite() {
            two_state.push((1.0 / eta, m.total_throughput, m.average_delay));
        }
    }
    let ceiling = two_state.iter().map(|p| p.1).fold(0.0, f64::max);
    println!("two-state: max tau = {ceiling:.6} (N/(2N-1) = {:.6})", n as f64 / (2 * n - 1) as f64);

    let m = metrics_reduced(&protocols::memoryless(1.0 / n as f64, n)?)?;
    println!("memoryless at p = 1/N: ({:.4}, {:.4})", m.total_throughput, m.average_delay);

    let taus: Vec<f64> = two_state.iter().map(|p| p.1).collect();
    let boundary = optimize::boundary_at(&taus, FeedbackKind::None, n, &SolverOptions::default())?;
    println!("  1/eta    tau   two-state D   1-slot D");
    let mut worst = f64::NEG_INFINITY;
    for ((inv_eta, tau, d2), p) in two_state.iter().zip(&boundary) {
        worst = worst.max(p.delay - d2);
        if (inv_eta * 100.0).round() as i64 % 10 == 0 {
            println!("  {inv_eta:.2}  {tau:.4}  {d2:>11.3}  {:>9.3}", p.delay);
        }
    }
    println!("largest excess of the 1-slot boundary over two-state: {worst:.4}");
    println!("TDMA: (1, {})", n as f64 / 2.0);
    Ok(())
}
