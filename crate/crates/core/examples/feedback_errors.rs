//! Simulated throughput and delay of the utility-maximizing protocol when
//! waiting users mishear the channel with probability epsilon per wrong
//! class. Each row averages ten independent runs of 100 000 slots.
//!
//! ```text
//! cargo run --release --example feedback_errors
//! ```

use macmem::chain::metrics_reduced;
use macmem::protocols;
use macmem::sim::{self, TABLE_EPSILONS};

fn main() -> macmem::Result<()> {
    let fo = protocols::f_optimal();
    let exact = metrics_reduced(&fo)?;
    println!("analysis        tau = {:.4}  D = {:.4}", exact.total_throughput, exact.average_delay);
    for row in sim::error_table(&fo, &TABLE_EPSILONS, 100_000, 10, 2024)? {
        println!(
            "eps = {:<5}     tau = {:.4}  D = {:.4}  (se {:.4}, {:.3})",
            row.epsilon, row.tau, row.delay, row.tau_std_error, row.delay_std_error
        );
    }
    Ok(())
}
