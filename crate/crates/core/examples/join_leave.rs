//! Frame renegotiation as users leave and join a reservation frame.
//!
//! ```text
//! cargo run --example join_leave
//! ```

use macmem::sim::{self, Membership, MembershipEvent};

fn main() -> macmem::Result<()> {
    let events = [
        MembershipEvent { slot: 2_000, kind: Membership::Leave, user: 1 },
        MembershipEvent { slot: 4_000, kind: Membership::Join, user: 4 },
        MembershipEvent { slot: 4_001, kind: Membership::Join, user: 5 },
    ];
    let result = sim::simulate_join_leave(4, 8, &events, 8_000, 7)?;
    for change in &result.frames {
        println!("slot {:>5}: frame of {} slots", change.slot, change.frame_length);
    }
    println!("resets after collisions at slots {:?}", result.resets);
    Ok(())
}
