//! 802.11a timing: slot durations differ, so throughput is a share of air
//! time and delay is in microseconds. Also compares against the memoryless
//! protocol a DCF station is equivalent to.
//!
//! ```text
//! cargo run --release --example wlan_timing
//! ```

use macmem::model::FeedbackKind;
use macmem::optimize::{self, Model, SolverOptions};
use macmem::protocols;
use macmem::wlan::{self, DcfParams, WlanTiming};

fn main() -> macmem::Result<()> {
    let n = 5;
    let timing = WlanTiming::ieee80211a_mode8();
    println!("throughput ceiling E[P]/sigma1 = {:.4}", timing.throughput_bound());

    let m = wlan::wlan_metrics(&protocols::f_optimal(), &timing)?;
    println!("fo: tau = {:.4}, D = {:.1} us", m.throughput, m.average_delay);

    let tau_dcf = dcf_probability(n)?;
    let m = wlan::wlan_memoryless(tau_dcf, n, &timing)?;
    println!("DCF-equivalent p = {tau_dcf:.4}: tau = {:.4}, D = {:.1} us", m.throughput, m.average_delay);

    let options = SolverOptions { model: Model::Wlan(timing), ..SolverOptions::default() };
    for kind in [FeedbackKind::Ternary, FeedbackKind::EmptyNonEmpty] {
        let init = protocols::structured_start(kind, n)?;
        let p = optimize::solve_at_tau(0.70, init.probabilities(), kind, n, &options)?;
        println!("{kind} boundary at tau = 0.70: D = {:.1} us, f = {:.4?}", p.delay, p.protocol_vector);
    }
    Ok(())
}

fn dcf_probability(n: usize) -> macmem::Result<f64> {
    wlan::dcf_probability(DcfParams { cw_min: 16, cw_max: 1024, n_users: n })
}
