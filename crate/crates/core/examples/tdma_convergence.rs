//! How fast the two TDMA-emulating protocols lock into a rotation where
//! every user succeeds once per frame.
//!
//! ```text
//! cargo run --release --example tdma_convergence
//! ```

use macmem::sim::{self, TdmaVariant};

fn main() -> macmem::Result<()> {
    let n = 5;
    let seeds: Vec<u64> = (0..1000).collect();
    for variant in [TdmaVariant::Theorem1, TdmaVariant::Reservation] {
        let runs = sim::simulate_tdma_convergence(n, variant, &seeds, 100_000)?;
        let mut slots: Vec<u64> = runs.iter().filter_map(|r| r.convergence_slot).collect();
        slots.sort_unstable();
        let exact = runs.iter().filter(|r| r.post_throughput == 1.0 && r.period == Some(n as u64)).count();
        let mean = slots.iter().sum::<u64>() as f64 / slots.len() as f64;
        println!(
            "{variant:?}: {}/{} settled, {exact} with throughput 1 and period {n}; \
             convergence slot mean {mean:.1}, median {}, max {}",
            slots.len(),
            runs.len(),
            slots[slots.len() / 2],
            slots[slots.len() - 1]
        );
    }
    Ok(())
}
