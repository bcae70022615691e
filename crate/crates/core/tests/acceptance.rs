//! Acceptance checks, one line per criterion.
//!
//! ```text
//! cargo test --release --test acceptance
//! ```

use std::time::Instant;

use macmem::chain::{metrics_reduced, ReducedChain, ReducedState};
use macmem::model::{Action, FeedbackKind};
use macmem::optimize::{self, SolverOptions};
use macmem::protocols;
use macmem::sim::{self, SimConfig, TdmaVariant};
use macmem::wlan::{wlan_metrics, WlanTiming};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_one_slot(rng: &mut ChaCha8Rng, kind: FeedbackKind, n: usize) -> Vec<f64> {
    let len = protocols::one_slot_len(kind, n).unwrap();
    (0..len).map(|_| rng.random_range(1e-4..=1.0 - 1e-4)).collect()
}

fn random_kind(rng: &mut ChaCha8Rng) -> FeedbackKind {
    FeedbackKind::ALL[rng.random_range(0..FeedbackKind::ALL.len())]
}

fn ac1_table_analysis() -> Outcome {
    let start = Instant::now();
    let m = metrics_reduced(&protocols::f_optimal()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        (m.total_throughput - 0.7920).abs() <= 0.001 && (m.average_delay - 41.5935).abs() <= 0.01 && secs < 1.0,
        format!("tau = {:.5}, D = {:.4}, {secs:.3} s", m.total_throughput, m.average_delay),
    )
}

fn ac2_memoryless() -> Outcome {
    let m = metrics_reduced(&protocols::memoryless(0.2, 5).unwrap()).map_err(|e| e.to_string())?;
    let tau = 0.8f64.powi(4);
    let delay = 5.0 / tau - 0.5;
    let exact = (m.total_throughput - tau).abs() <= 1e-10 && (m.average_delay - delay).abs() <= 1e-10;
    let rounded = (m.total_throughput - 0.41).abs() <= 0.005 && (m.average_delay - 11.71).abs() <= 0.005;
    check(
        exact && rounded,
        format!(
            "tau = {:.12}, D = {:.12} (errors {:.1e}, {:.1e})",
            m.total_throughput,
            m.average_delay,
            (m.total_throughput - tau).abs(),
            (m.average_delay - delay).abs()
        ),
    )
}

fn ac3_table_simulation() -> Outcome {
    let start = Instant::now();
    let eps = [0.0, 0.01, 0.05, 0.10, 0.20];
    let want = [(0.7910, 41.24), (0.7667, 37.44), (0.6844, 28.06), (0.6049, 22.93), (0.4996, 19.05)];
    let rows = sim::error_table(&protocols::f_optimal(), &eps, 100_000, 10, 2024).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let within = rows.iter().zip(want).all(|(r, (t, d))| (r.tau - t).abs() <= 0.015 && (r.delay - d).abs() <= 2.0);
    let monotone = rows.windows(2).all(|w| w[1].tau <= w[0].tau);
    let detail = rows.iter().map(|r| format!("{:.2}: ({:.4}, {:.2})", r.epsilon, r.tau, r.delay)).collect::<Vec<_>>();
    check(within && monotone && secs < 60.0, format!("{}, {secs:.1} s", detail.join(" ")))
}

fn ac4_theorem1() -> Outcome {
    let seeds: Vec<u64> = (0..1000).map(|r| sim::run_seed(1, r)).collect();
    let runs = sim::simulate_tdma_convergence(5, TdmaVariant::Theorem1, &seeds, 100_000).map_err(|e| e.to_string())?;
    let converged = runs.iter().filter(|r| r.convergence_slot.is_some()).count();
    let exact = runs.iter().filter(|r| r.post_throughput == 1.0 && r.period == Some(5)).count();
    let slowest = runs.iter().filter_map(|r| r.convergence_slot).max().unwrap_or(0);
    check(
        converged == runs.len() && exact == runs.len(),
        format!("{converged}/{} converged, {exact} with throughput 1 and period 5, slowest at slot {slowest}", runs.len()),
    )
}

fn ac5_two_state() -> Outcome {
    let n = 5;
    let mut points = Vec::new();
    for i in 1..=100 {
        let m = metrics_reduced(&protocols::two_state_equivalent(100.0 / i as f64, n).unwrap()).map_err(|e| e.to_string())?;
        points.push((m.total_throughput, m.average_delay));
    }
    let ceiling = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let matched: Vec<(f64, f64)> = points.into_iter().filter(|(t, d)| *t > 0.0 && d.is_finite()).collect();
    let taus: Vec<f64> = matched.iter().map(|p| p.0).collect();
    let boundary = optimize::boundary_at(&taus, FeedbackKind::None, n, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let all_converged = boundary.iter().all(|p| p.converged);
    let excess = matched.iter().zip(&boundary).map(|((_, d), p)| p.delay - d).fold(f64::NEG_INFINITY, f64::max);
    check(
        ceiling <= 5.0 / 9.0 + 1e-6 && all_converged && excess <= 0.5,
        format!("max tau = {ceiling:.6}, {} matched points, largest 1-slot excess {excess:.3}", matched.len()),
    )
}

fn ac6_boundary() -> Outcome {
    let n = 5;
    let init = [0.2, 1e-4, 1.0 / 3.0, 1.0 - 1e-4, 1e-4];
    let p = optimize::solve_at_tau(0.99, &init, FeedbackKind::Ternary, n, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let f = &p.protocol_vector;
    let structure = p.converged
        && f[3] >= 0.999
        && f[4] <= 0.01
        && f[1] <= 0.01
        && (0.15..=0.25).contains(&f[0])
        && (0.28..=0.40).contains(&f[2]);
    let sweep = optimize::boundary_sweep(&optimize::default_grid(), FeedbackKind::Ternary, n, &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    let converged: Vec<_> = sweep.iter().filter(|p| p.converged).collect();
    let turning = converged.iter().min_by(|a, b| a.delay.total_cmp(&b.delay)).map(|p| p.target_tau).unwrap_or(f64::NAN);
    let bound_ok = converged.iter().all(|p| p.delay >= n as f64 / (2.0 * p.achieved_tau) - 0.5);
    check(
        structure && (turning - 0.41).abs() <= 0.05 && bound_ok,
        format!(
            "f(0.99) = {:.4?}, {}/{} converged, turning point {turning:.2}, lower bound {}",
            f,
            converged.len(),
            sweep.len(),
            if bound_ok { "holds" } else { "violated" }
        ),
    )
}

fn ac7_little_and_pk() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut little = 0.0f64;
    let mut count = 0;
    while count < 100 {
        let kind = random_kind(&mut rng);
        let n = rng.random_range(2..=8);
        let x = random_one_slot(&mut rng, kind, n);
        let m = metrics_reduced(&protocols::one_slot(x, kind, n).unwrap()).map_err(|e| e.to_string())?;
        if m.per_user_throughput > 0.0 && m.inter_packet_time.is_finite() {
            little = little.max((m.inter_packet_time * m.per_user_throughput - 1.0).abs());
            count += 1;
        }
    }
    let mut candidates = Vec::new();
    while candidates.len() < 20 {
        let x = random_one_slot(&mut rng, FeedbackKind::Ternary, 5);
        let p = protocols::one_slot(x, FeedbackKind::Ternary, 5).unwrap();
        let m = metrics_reduced(&p).map_err(|e| e.to_string())?;
        if m.average_delay < 200.0 {
            candidates.push(p);
        }
    }
    let gaps: Vec<(f64, f64)> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let r = sim::simulate(p, &SimConfig::new(5, 1_000_000, sim::run_seed(77, i))).unwrap();
            let pk = 0.5 * (1.0 + r.interpacket_cv.powi(2)) * r.interpacket_mean;
            ((r.empirical_average_delay - pk).abs(), r.pk_gap_std_error)
        })
        .collect();
    let worst = gaps.iter().map(|(g, se)| g / se).fold(0.0, f64::max);
    check(
        little <= 1e-9 && worst <= 3.0,
        format!("max |D~ tau_i - 1| = {little:.1e}; P-K gaps within {worst:.2} standard errors over 20 runs"),
    )
}

fn ac8_wlan() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // Delays reach 1e6 slots here, so the delay error is taken relative to
    // max(1, D); throughput stays absolute.
    let mut reduction = 0.0f64;
    let mut largest_delay = 0.0f64;
    for _ in 0..50 {
        let kind = random_kind(&mut rng);
        let n = rng.random_range(2..=8);
        let p = protocols::one_slot(random_one_slot(&mut rng, kind, n), kind, n).unwrap();
        let a = metrics_reduced(&p).map_err(|e| e.to_string())?;
        let b = wlan_metrics(&p, &WlanTiming::unit()).map_err(|e| e.to_string())?;
        largest_delay = largest_delay.max(a.average_delay);
        let delay_error = (a.average_delay - b.average_delay).abs() / a.average_delay.max(1.0);
        reduction = reduction.max((a.total_throughput - b.throughput).abs()).max(delay_error);
    }
    let t = WlanTiming::ieee80211a_mode8();
    let mut highest = 0.0f64;
    for _ in 0..1000 {
        let kind = random_kind(&mut rng);
        let p = protocols::one_slot(random_one_slot(&mut rng, kind, 5), kind, 5).unwrap();
        highest = highest.max(wlan_metrics(&p, &t).map_err(|e| e.to_string())?.throughput);
    }
    let sticky = protocols::one_slot(vec![0.2, 1e-4, 0.33, 1.0 - 1e-6, 1e-4], FeedbackKind::Ternary, 5).unwrap();
    let near = wlan_metrics(&sticky, &t).map_err(|e| e.to_string())?.throughput;
    highest = highest.max(near);
    check(
        reduction <= 1e-10 && highest <= 0.8136 && 0.8136 - near <= 0.01,
        format!("reduction error {reduction:.1e} (delays up to {largest_delay:.3e}); max tau {highest:.4} <= 0.8136; sticky protocol reaches {near:.4}"),
    )
}

fn ac9_row_sums() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // Defects of the (T->T, T->W, W->T, W->W) blocks, summed per row.
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let kind = random_kind(&mut rng);
        let n = rng.random_range(2..=8);
        let p = protocols::one_slot(random_one_slot(&mut rng, kind, n), kind, n).unwrap();
        let chain = ReducedChain::new(&p).map_err(|e| e.to_string())?;
        for i in 0..2 * n {
            let from = ReducedState::from_index(i, n);
            let mut to_t = 0.0;
            let mut to_w = 0.0;
            for j in 0..2 * n {
                let to = ReducedState::from_index(j, n);
                let q = chain.transition(from, to);
                if q < 0.0 {
                    return Err(format!("negative transition {q} in {kind} N={n}"));
                }
                match to.action {
                    Action::Transmit => to_t += q,
                    Action::Wait => to_w += q,
                }
            }
            worst = worst.max((to_t + to_w - 1.0).abs());
        }
    }
    check(worst <= 1e-12, format!("max row defect {worst:.1e} over 200 chains"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1 table analysis row", ac1_table_analysis),
        ("AC2 memoryless closed form", ac2_memoryless),
        ("AC3 table simulation rows", ac3_table_simulation),
        ("AC4 TDMA convergence", ac4_theorem1),
        ("AC5 two-state ceiling and 1-slot dominance", ac5_two_state),
        ("AC6 boundary structure", ac6_boundary),
        ("AC7 Little identity and P-K", ac7_little_and_pk),
        ("AC8 WLAN reduction and ceiling", ac8_wlan),
        ("AC9 transition rows", ac9_row_sums),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    println!("{}/9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
