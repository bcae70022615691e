//! The six feedback technologies for five users: their partitions, their
//! 1-slot histories, and the boundary delay each reaches at a few
//! throughputs. Finer feedback never does worse.
//!
//! ```text
//! cargo run --release --example feedback_technologies
//! ```

use macmem::model::{FeedbackKind, FeedbackTechnology, HistorySpace, SystemConfig};
use macmem::optimize::{self, SolverOptions};

fn main() -> macmem::Result<()> {
    let n = 5;
    let grid = [0.9, 0.8, 0.7, 0.6, 0.5];
    for kind in FeedbackKind::ALL {
        let tech = FeedbackTechnology::new(kind, n)?;
        let space = HistorySpace::new(SystemConfig::new(n, 1)?, tech.clone())?;
        let classes: Vec<&str> = tech.classes().iter().map(|c| c.label()).collect();
        let histories: Vec<String> = space.histories().map(|h| h.to_string()).collect();
        println!("{kind}: classes {classes:?}, histories {}", histories.join(" "));
    }

    // Coarser technologies are solved first and seed the finer ones.
    println!("D* at tau {grid:?}");
    for (kind, points) in optimize::family_sweeps(&grid, &FeedbackKind::ALL, n, &SolverOptions::default())? {
        let delays: Vec<String> = points
            .iter()
            .map(|p| if p.converged { format!("{:.2}", p.delay) } else { "-".into() })
            .collect();
        println!("  {:>7}: {}", kind.name(), delays.join(", "));
    }
    Ok(())
}
