//! Exact throughput and delay of a few named protocols for five users.
//!
//! ```text
//! cargo run --example analyze_protocols
//! ```

use macmem::chain::{metrics_general, metrics_reduced, GeneralOptions};
use macmem::protocols;

fn main() -> macmem::Result<()> {
    let n = 5;
    let fo = protocols::f_optimal();
    let m = metrics_reduced(&fo)?;
    println!("fo (ternary, 1-slot): tau = {:.4}, D = {:.4}", m.total_throughput, m.average_delay);
    println!(
        "  idle/success/collision = {:.4}/{:.4}/{:.4}, inter-packet = {:.4}",
        m.slot_fractions.idle, m.slot_fractions.success, m.slot_fractions.collision, m.inter_packet_time
    );

    let m = metrics_reduced(&protocols::memoryless(1.0 / n as f64, n)?)?;
    println!("memoryless 1/N: tau = {:.4}, D = {:.4}", m.total_throughput, m.average_delay);

    for eta in [1.5, 3.0, 10.0] {
        let m = metrics_reduced(&protocols::two_state_equivalent(eta, n)?)?;
        println!("two-state eta={eta}: tau = {:.4}, D = {:.4}", m.total_throughput, m.average_delay);
    }

    // Longer memory needs the full outcome chain; keep it small.
    let opts = GeneralOptions { allow_reducible: true, ..Default::default() };
    for users in [2, 3] {
        let m = metrics_general(&protocols::theorem1_protocol(users)?, opts)?;
        println!(
            "TDMA-emulating protocol, N={users}: tau = {:.4}, D = {:.4}",
            m.total_throughput, m.average_delay
        );
    }
    Ok(())
}
