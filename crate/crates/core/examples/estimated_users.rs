//! Ten users who run a protocol designed for the wrong number of users,
//! and the periodic procedure that nudges the shared estimate.
//!
//! ```text
//! cargo run --release --example estimated_users
//! ```

use macmem::sim::{self, EstimateUpdate};

fn main() -> macmem::Result<()> {
    let rows = sim::simulate_estimated_n(10, &[7, 8, 9, 10, 11, 12, 13], 0.9, 200_000, 5)?;
    println!("N~   exact tau   exact D   sim tau   sim D");
    for r in &rows {
        println!(
            "{:>2}   {:>9.4}   {:>7.2}   {:>7.4}   {:>5.1}",
            r.estimated_n, r.exact_tau, r.exact_delay, r.sim_tau, r.sim_delay
        );
    }

    let update = EstimateUpdate { period: 20_000, threshold: 0.005, ..EstimateUpdate::default() };
    let steps = sim::simulate_estimate_updates(10, 13, 0.9, update, 2_000_000, 3)?;
    let path: Vec<usize> = steps.iter().map(|s| s.estimate).collect();
    println!("estimate every {} slots starting from 13: {path:?}", update.period);
    Ok(())
}
