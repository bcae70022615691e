//! Seeded Monte Carlo simulation of saturated users running a protocol.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::metrics_reduced;
use crate::error::{Error, Result};
use crate::model::{Action, FeedbackKind, Protocol};
use crate::optimize::{self, SolverOptions};
use crate::protocols;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub slots: u64,
    pub seed: u64,
    /// Probability that a waiting user hears each particular wrong class.
    pub error_epsilon: f64,
    pub n_users: usize,
    /// Number of users the protocol was designed for, when it differs from
    /// the actual count.
    pub estimated_n: Option<usize>,
    pub record_trace: bool,
    /// Batches used for the batch-means standard errors.
    pub batches: usize,
}

impl SimConfig {
    pub fn new(n_users: usize, slots: u64, seed: u64) -> Self {
        SimConfig {
            slots,
            seed,
            error_epsilon: 0.0,
            n_users,
            estimated_n: None,
            record_trace: false,
            batches: 20,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.error_epsilon = epsilon;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::InvalidConfig("simulation needs at least one slot".into()));
        }
        if !(0.0..0.5).contains(&self.error_epsilon) {
            return Err(Error::InvalidConfig(format!("error probability {} outside [0, 0.5)", self.error_epsilon)));
        }
        if self.batches == 0 || self.batches as u64 > self.slots {
            return Err(Error::InvalidConfig(format!("{} batches for {} slots", self.batches, self.slots)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SlotOutcome {
    Idle,
    Success,
    Collision,
}

impl SlotOutcome {
    fn of(k: usize) -> Self {
        match k {
            0 => SlotOutcome::Idle,
            1 => SlotOutcome::Success,
            _ => SlotOutcome::Collision,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SlotOutcome::Idle => "idle",
            SlotOutcome::Success => "success",
            SlotOutcome::Collision => "collision",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceLine {
    pub slot: u64,
    pub transmissions: usize,
    pub outcome: SlotOutcome,
    pub winner: Option<usize>,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},", self.slot, self.transmissions, self.outcome.name())?;
        match self.winner {
            Some(u) => write!(f, "{u}"),
            None => write!(f, "-"),
        }
    }
}

pub fn write_trace<W: Write>(mut out: W, trace: &[TraceLine]) -> Result<()> {
    for line in trace {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub empirical_throughput_total: f64,
    pub empirical_throughput_per_user: Vec<f64>,
    /// Mean slots from a slot boundary to the start of the user's next
    /// success, less half a slot.
    pub empirical_average_delay: f64,
    pub interpacket_mean: f64,
    /// Coefficient of variation of the gaps between a user's successes.
    pub interpacket_cv: f64,
    pub throughput_std_error: f64,
    pub delay_std_error: f64,
    /// Batch-means standard error of `D - (1 + kappa^2) D~ / 2`.
    pub pk_gap_std_error: f64,
    /// Some user never succeeded, so the delay is a lower bound over the
    /// censored horizon.
    pub censored: bool,
    /// First slot of a TDMA rotation that held for the rest of the run.
    pub convergence_slot: Option<u64>,
    pub trace: Option<Vec<TraceLine>>,
}

/// Sums over completed waiting periods of one user or one batch.
#[derive(Debug, Clone, Copy, Default)]
struct GapStats {
    /// Sum over slot boundaries of the slots until the next success.
    residual_sum: f64,
    boundaries: f64,
    gaps: f64,
    gap_sum: f64,
    gap_sq_sum: f64,
}

impl GapStats {
    fn add_waiting(&mut self, length: u64) {
        let g = length as f64;
        self.residual_sum += g * (g + 1.0) / 2.0;
        self.boundaries += g;
    }

    fn add_gap(&mut self, length: u64) {
        let g = length as f64;
        self.add_waiting(length);
        self.gaps += 1.0;
        self.gap_sum += g;
        self.gap_sq_sum += g * g;
    }

    fn merge(&mut self, other: &GapStats) {
        self.residual_sum += other.residual_sum;
        self.boundaries += other.boundaries;
        self.gaps += other.gaps;
        self.gap_sum += other.gap_sum;
        self.gap_sq_sum += other.gap_sq_sum;
    }

    fn delay(&self) -> f64 {
        if self.boundaries > 0.0 {
            self.residual_sum / self.boundaries - 0.5
        } else {
            f64::NAN
        }
    }

    fn gap_mean(&self) -> f64 {
        self.gap_sum / self.gaps
    }

    fn gap_cv(&self) -> f64 {
        let mean = self.gap_mean();
        let var = (self.gap_sq_sum / self.gaps - mean * mean).max(0.0);
        var.sqrt() / mean
    }

    fn pk_gap(&self) -> f64 {
        let kappa = self.gap_cv();
        self.delay() - 0.5 * (1.0 + kappa * kappa) * self.gap_mean()
    }
}

fn batch_std_error(values: &[f64]) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let b = finite.len() as f64;
    if finite.len() < 2 {
        return f64::NAN;
    }
    let mean = finite.iter().sum::<f64>() / b;
    let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Tracks whether the winners form a rotation of `n` distinct users.
struct RotationDetector {
    n: usize,
    hold: u64,
    run_start: u64,
    window: Vec<Option<usize>>,
    found: Option<u64>,
}

impl RotationDetector {
    fn new(n: usize) -> Self {
        RotationDetector { n, hold: 10 * n as u64, run_start: 0, window: vec![None; n], found: None }
    }

    fn observe(&mut self, t: u64, winner: Option<usize>) {
        let n = self.n as u64;
        let pos = (t % n) as usize;
        match winner {
            None => {
                self.run_start = t + 1;
                self.found = None;
            }
            Some(w) => {
                let len = t - self.run_start;
                if len >= n {
                    if self.window[pos] != Some(w) {
                        self.restart_at_duplicate(t, w);
                    }
                } else if let Some(j) = (self.run_start..t).find(|&s| self.window[(s % n) as usize] == Some(w)) {
                    self.run_start = j + 1;
                    self.found = None;
                }
                self.window[pos] = Some(w);
                if self.found.is_none() && t + 1 - self.run_start >= self.hold {
                    self.found = Some(self.run_start);
                }
            }
        }
    }

    /// The rotation broke at `t`; keep the longest suffix of distinct
    /// winners ending at `t`.
    fn restart_at_duplicate(&mut self, t: u64, w: usize) {
        let n = self.n as u64;
        self.found = None;
        let from = t + 1 - n;
        self.run_start = (from..t)
            .rev()
            .find(|&s| self.window[(s % n) as usize] == Some(w))
            .map_or(from, |s| s + 1);
    }
}

/// Draw the class a waiting user hears: the true one with probability
/// `1 - (c - 1) eps`, each of the other `c - 1` waiting classes with `eps`.
fn noisy_wait_pair<R: Rng>(rng: &mut R, truth: usize, classes: usize, epsilon: f64) -> usize {
    if epsilon == 0.0 || classes < 2 {
        return truth;
    }
    let u: f64 = rng.random();
    let wrong = (u / epsilon) as usize;
    if wrong >= classes - 1 {
        truth
    } else if wrong < truth {
        wrong
    } else {
        wrong + 1
    }
}

/// Run `config.slots` slots of the protocol.
pub fn simulate(protocol: &Protocol, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let protocol = match config.estimated_n {
        Some(est) if est != protocol.n_users() => {
            return Err(Error::InvalidConfig(format!(
                "protocol was built for {} users, not the estimate {est}",
                protocol.n_users()
            )))
        }
        _ if protocol.n_users() != config.n_users => protocol.for_users(config.n_users)?,
        _ => protocol.clone(),
    };
    let n = config.n_users;
    let space = protocol.space();
    let wait_classes = space.pairs().iter().filter(|p| p.action == Action::Wait).count();
    if (wait_classes.saturating_sub(1)) as f64 * config.error_epsilon > 1.0 {
        return Err(Error::InvalidConfig(format!(
            "error probability {} is too large for {wait_classes} feedback classes",
            config.error_epsilon
        )));
    }
    let wait_pair: Vec<usize> = (0..n).map(|k| space.pair_index(Action::Wait, k)).collect::<Result<_>>()?;
    let transmit_pair: Vec<usize> =
        (1..=n).map(|k| space.pair_index(Action::Transmit, k)).collect::<Result<_>>()?;

    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|u| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(u as u64);
            r
        })
        .collect();
    let mut history = vec![space.initial_index(); n];
    let mut transmit = vec![false; n];
    let mut successes = vec![0u64; n];
    // Slot index of the user's previous success, or None before the first.
    let mut last_success: Vec<Option<u64>> = vec![None; n];
    let batch_len = config.slots / config.batches as u64;
    let batch_of = |t: u64| ((t / batch_len) as usize).min(config.batches - 1);
    let mut batch_stats = vec![GapStats::default(); config.batches];
    let mut batch_successes = vec![0u64; config.batches];
    let mut total = GapStats::default();
    let mut detector = RotationDetector::new(n);
    let mut trace = config.record_trace.then(|| Vec::with_capacity(config.slots as usize));

    for t in 0..config.slots {
        let mut k = 0;
        let mut winner = None;
        for u in 0..n {
            let p = protocol.probability(history[u]);
            transmit[u] = rngs[u].random::<f64>() < p;
            if transmit[u] {
                k += 1;
                winner = Some(u);
            }
        }
        if k != 1 {
            winner = None;
        }
        for u in 0..n {
            let pair = if transmit[u] {
                transmit_pair[k - 1]
            } else {
                noisy_wait_pair(&mut rngs[u], wait_pair[k], wait_classes, config.error_epsilon)
            };
            history[u] = space.push(history[u], pair);
        }
        if let Some(w) = winner {
            successes[w] += 1;
            let b = batch_of(t);
            batch_successes[b] += 1;
            let mut s = GapStats::default();
            match last_success[w] {
                Some(prev) => s.add_gap(t - prev),
                None => s.add_waiting(t + 1),
            }
            batch_stats[b].merge(&s);
            total.merge(&s);
            last_success[w] = Some(t);
        }
        detector.observe(t, winner);
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceLine { slot: t, transmissions: k, outcome: SlotOutcome::of(k), winner });
        }
    }

    let slots = config.slots as f64;
    let per_user: Vec<f64> = successes.iter().map(|&s| s as f64 / slots).collect();
    let censored = successes.contains(&0);
    let delay = if censored {
        // Every boundary after a user's last success waits at least until
        // the end of the horizon.
        let mut bound = total;
        for last in &last_success[..n] {
            let tail = match *last {
                Some(prev) => config.slots - 1 - prev,
                None => config.slots,
            };
            bound.add_waiting(tail);
        }
        bound.delay()
    } else {
        total.delay()
    };
    let batch_tau: Vec<f64> = batch_successes
        .iter()
        .enumerate()
        .map(|(b, &s)| {
            let len = if b + 1 == config.batches { config.slots - batch_len * b as u64 } else { batch_len };
            s as f64 / len as f64
        })
        .collect();
    let batch_delay: Vec<f64> = batch_stats.iter().map(GapStats::delay).collect();
    let batch_pk: Vec<f64> = batch_stats.iter().map(GapStats::pk_gap).collect();
    Ok(SimResult {
        empirical_throughput_total: per_user.iter().sum(),
        empirical_throughput_per_user: per_user,
        empirical_average_delay: delay,
        interpacket_mean: if total.gaps > 0.0 { total.gap_mean() } else { f64::INFINITY },
        interpacket_cv: if total.gaps > 0.0 { total.gap_cv() } else { f64::NAN },
        throughput_std_error: batch_std_error(&batch_tau),
        delay_std_error: batch_std_error(&batch_delay),
        pk_gap_std_error: batch_std_error(&batch_pk),
        censored,
        convergence_slot: detector.found,
        trace,
    })
}

/// Seed of run `run` in a batch started from `seed`.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(run as u64 + 1))
}

/// One row of the feedback-error table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub epsilon: f64,
    pub tau: f64,
    pub delay: f64,
    pub tau_std_error: f64,
    pub delay_std_error: f64,
    pub runs: usize,
}

/// Error probabilities of the feedback-error table.
pub const TABLE_EPSILONS: [f64; 8] = [0.0, 0.01, 0.02, 0.03, 0.05, 0.07, 0.10, 0.20];

/// Average `runs` independent simulations for each error probability.
/// Runs execute in parallel and are merged by index.
pub fn error_table(protocol: &Protocol, epsilons: &[f64], slots: u64, runs: usize, seed: u64) -> Result<Vec<ErrorRow>> {
    if runs == 0 {
        return Err(Error::InvalidConfig("need at least one run".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..epsilons.len()).flat_map(|e| (0..runs).map(move |r| (e, r))).collect();
    let results: Vec<SimResult> = jobs
        .par_iter()
        .map(|&(e, r)| {
            let config = SimConfig::new(protocol.n_users(), slots, run_seed(seed, r)).with_epsilon(epsilons[e]);
            simulate(protocol, &config)
        })
        .collect::<Result<_>>()?;
    Ok(epsilons
        .iter()
        .enumerate()
        .map(|(e, &epsilon)| {
            let chunk = &results[e * runs..(e + 1) * runs];
            let taus: Vec<f64> = chunk.iter().map(|r| r.empirical_throughput_total).collect();
            let delays: Vec<f64> = chunk.iter().map(|r| r.empirical_average_delay).collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            ErrorRow {
                epsilon,
                tau: mean(&taus),
                delay: mean(&delays),
                tau_std_error: batch_std_error(&taus),
                delay_std_error: batch_std_error(&delays),
                runs,
            }
        })
        .collect())
}

pub fn write_error_table<W: Write>(out: W, rows: &[ErrorRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TdmaVariant {
    Theorem1,
    Reservation,
}

impl std::str::FromStr for TdmaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem1" => Ok(TdmaVariant::Theorem1),
            "reservation" => Ok(TdmaVariant::Reservation),
            _ => Err(Error::Parse(format!("unknown TDMA variant {s:?}"))),
        }
    }
}

impl TdmaVariant {
    pub fn protocol(self, n_users: usize) -> Result<Protocol> {
        match self {
            TdmaVariant::Theorem1 => protocols::theorem1_protocol(n_users),
            TdmaVariant::Reservation => protocols::reservation_protocol(n_users),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TdmaRun {
    pub seed: u64,
    pub convergence_slot: Option<u64>,
    /// Success fraction from the convergence slot to the horizon.
    pub post_throughput: f64,
    /// Common gap between a user's successes after convergence, if every
    /// user repeats with the same period.
    pub period: Option<u64>,
    /// Horizon ran out before a rotation held.
    pub censored: bool,
}

/// Run the TDMA-emulating protocols once per seed.
pub fn simulate_tdma_convergence(n_users: usize, variant: TdmaVariant, seeds: &[u64], horizon: u64) -> Result<Vec<TdmaRun>> {
    if n_users < 2 {
        return Err(Error::InvalidConfig("TDMA emulation needs at least two users".into()));
    }
    let protocol = variant.protocol(n_users)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let mut config = SimConfig::new(n_users, horizon, seed);
            config.record_trace = true;
            config.batches = 1;
            let result = simulate(&protocol, &config)?;
            let trace = result.trace.expect("trace requested");
            let Some(start) = result.convergence_slot else {
                return Ok(TdmaRun { seed, convergence_slot: None, post_throughput: 0.0, period: None, censored: true });
            };
            let tail = &trace[start as usize..];
            let wins = tail.iter().filter(|l| l.winner.is_some()).count();
            let mut last: Vec<Option<u64>> = vec![None; n_users];
            let mut periods = std::collections::BTreeSet::new();
            for line in tail {
                if let Some(w) = line.winner {
                    if let Some(prev) = last[w] {
                        periods.insert(line.slot - prev);
                    }
                    last[w] = Some(line.slot);
                }
            }
            let period = if periods.len() == 1 { periods.into_iter().next() } else { None };
            Ok(TdmaRun {
                seed,
                convergence_slot: Some(start),
                post_throughput: wins as f64 / tail.len() as f64,
                period,
                censored: false,
            })
        })
        .collect()
}

/// Result for one shared estimate of the number of users.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub estimated_n: usize,
    pub design_converged: bool,
    /// Exact metrics of the misdesigned protocol with the actual users.
    pub exact_tau: f64,
    pub exact_delay: f64,
    pub sim_tau: f64,
    pub sim_delay: f64,
    pub sim_tau_std_error: f64,
}

/// Delay-efficient ternary protocol for `n_users` at `target_tau`.
pub fn designed_protocol(n_users: usize, target_tau: f64, options: &SolverOptions) -> Result<(Protocol, bool)> {
    let start = protocols::structured_start(FeedbackKind::Ternary, n_users)?;
    let point = optimize::solve_at_tau(target_tau, start.probabilities(), FeedbackKind::Ternary, n_users, options)?;
    let converged = point.converged;
    Ok((point.protocol(FeedbackKind::Ternary, n_users)?, converged))
}

/// Users share an estimate `N~` of their number and run the protocol
/// designed for `N~`; report what `actual_n` users obtain.
pub fn simulate_estimated_n(
    actual_n: usize,
    estimates: &[usize],
    target_tau: f64,
    slots: u64,
    seed: u64,
) -> Result<Vec<EstimateRow>> {
    if estimates.iter().any(|&e| e < 3) || actual_n < 3 {
        return Err(Error::InvalidConfig("estimates and user counts must be at least 3 under ternary feedback".into()));
    }
    estimates
        .iter()
        .map(|&est| {
            let (designed, converged) = designed_protocol(est, target_tau, &SolverOptions::default())?;
            let actual = designed.for_users(actual_n)?;
            let exact = metrics_reduced(&actual)?;
            let mut config = SimConfig::new(actual_n, slots, seed);
            config.estimated_n = Some(est);
            let sim = simulate(&designed, &config)?;
            Ok(EstimateRow {
                estimated_n: est,
                design_converged: converged,
                exact_tau: exact.total_throughput,
                exact_delay: exact.average_delay,
                sim_tau: sim.empirical_throughput_total,
                sim_delay: sim.empirical_average_delay,
                sim_tau_std_error: sim.throughput_std_error,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateUpdate {
    /// Slots between updates.
    pub period: u64,
    /// Allowed gap between realized and desired throughput.
    pub threshold: f64,
    pub min_estimate: usize,
    pub max_estimate: usize,
}

impl Default for EstimateUpdate {
    fn default() -> Self {
        EstimateUpdate { period: 1000, threshold: 0.02, min_estimate: 3, max_estimate: 30 }
    }
}

/// Estimate after each update period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateStep {
    pub slot: u64,
    pub realized_tau: f64,
    pub estimate: usize,
}

/// Users start from a shared estimate and, every `period` slots, move it
/// by one toward the side indicated by the realized throughput.
pub fn simulate_estimate_updates(
    actual_n: usize,
    initial_estimate: usize,
    target_tau: f64,
    update: EstimateUpdate,
    slots: u64,
    seed: u64,
) -> Result<Vec<EstimateStep>> {
    if !(update.min_estimate..=update.max_estimate).contains(&initial_estimate) || update.min_estimate < 3 {
        return Err(Error::InvalidConfig(format!("initial estimate {initial_estimate} outside the allowed range")));
    }
    if update.period == 0 {
        return Err(Error::InvalidConfig("update period must be positive".into()));
    }
    let mut designs: std::collections::BTreeMap<usize, Protocol> = Default::default();
    let mut design_for = |est: usize| -> Result<Protocol> {
        if let Some(p) = designs.get(&est) {
            return Ok(p.clone());
        }
        let (p, _) = designed_protocol(est, target_tau, &SolverOptions::default())?;
        let p = p.for_users(actual_n)?;
        designs.insert(est, p.clone());
        Ok(p)
    };
    let mut estimate = initial_estimate;
    let mut protocol = design_for(estimate)?;
    let space = protocol.space().clone();
    let n = actual_n;
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|u| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(u as u64);
            r
        })
        .collect();
    let mut history = vec![space.initial_index(); n];
    let mut transmit = vec![false; n];
    let mut wins = 0u64;
    let mut steps = Vec::new();
    for t in 0..slots {
        let mut k = 0;
        for u in 0..n {
            transmit[u] = rngs[u].random::<f64>() < protocol.probability(history[u]);
            k += transmit[u] as usize;
        }
        for u in 0..n {
            let action = if transmit[u] { Action::Transmit } else { Action::Wait };
            history[u] = space.push(history[u], space.pair_index(action, k)?);
        }
        wins += (k == 1) as u64;
        if (t + 1) % update.period == 0 {
            let realized = wins as f64 / update.period as f64;
            if realized < target_tau - update.threshold && estimate < update.max_estimate {
                estimate += 1;
            } else if realized > target_tau + update.threshold && estimate > update.min_estimate {
                estimate -= 1;
            }
            protocol = design_for(estimate)?;
            steps.push(EstimateStep { slot: t + 1, realized_tau: realized, estimate });
            wins = 0;
        }
    }
    Ok(steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    Join,
    Leave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MembershipEvent {
    pub slot: u64,
    pub kind: Membership,
    pub user: usize,
}

/// Frame length in force from `slot` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameChange {
    pub slot: u64,
    pub frame_length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinLeaveResult {
    pub frames: Vec<FrameChange>,
    /// Slots of collisions that hit a settled frame and forced a reset.
    pub resets: Vec<u64>,
}

impl JoinLeaveResult {
    pub fn final_frame_length(&self) -> usize {
        self.frames.last().map_or(0, |f| f.frame_length)
    }
}

/// Frame renegotiation under ternary feedback. Users reserve the frame
/// position where they last succeeded; unreserved users contend for free
/// positions with probability `1 / (F - reserved)`. After a frame with no
/// collision in which every user holds a position, empty positions are
/// deleted. Joining users transmit at once; a collision in a settled
/// frame resets the frame to `max_n` positions and clears reservations.
pub fn simulate_join_leave(
    initial_n: usize,
    max_n: usize,
    events: &[MembershipEvent],
    slots: u64,
    seed: u64,
) -> Result<JoinLeaveResult> {
    if initial_n == 0 || initial_n > max_n {
        return Err(Error::InvalidConfig(format!("{initial_n} users do not fit a frame of {max_n}")));
    }
    let mut present: Vec<bool> = vec![true; initial_n];
    let mut sorted = events.to_vec();
    sorted.sort_by_key(|e| e.slot);
    {
        let mut check = present.clone();
        for e in &sorted {
            if check.len() <= e.user {
                check.resize(e.user + 1, false);
            }
            match e.kind {
                Membership::Join if check[e.user] => {
                    return Err(Error::InvalidConfig(format!("user {} joins twice", e.user)))
                }
                Membership::Leave if !check[e.user] => {
                    return Err(Error::InvalidConfig(format!("user {} leaves while absent", e.user)))
                }
                _ => check[e.user] = e.kind == Membership::Join,
            }
            if check.iter().filter(|&&p| p).count() > max_n {
                return Err(Error::InvalidConfig(format!("more than {max_n} users at slot {}", e.slot)));
            }
        }
        present.resize(check.len(), false);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frame = max_n;
    // Reserved position of each user, and the owner of each position.
    let mut position: Vec<Option<usize>> = vec![None; present.len()];
    let mut owner: Vec<Option<usize>> = vec![None; frame];
    let mut pending_join: Vec<usize> = Vec::new();
    let mut frames = vec![FrameChange { slot: 0, frame_length: frame }];
    let mut resets = Vec::new();
    let mut settled = false;
    let mut frame_start = 0u64;
    let mut frame_clean = true;
    let mut next_event = 0;

    for t in 0..slots {
        while next_event < sorted.len() && sorted[next_event].slot == t {
            let e = sorted[next_event];
            match e.kind {
                Membership::Join => {
                    present[e.user] = true;
                    pending_join.push(e.user);
                }
                Membership::Leave => {
                    present[e.user] = false;
                    if let Some(p) = position[e.user].take() {
                        owner[p] = None;
                    }
                }
            }
            next_event += 1;
        }

        let pos = ((t - frame_start) % frame as u64) as usize;
        let reserved = owner.iter().filter(|o| o.is_some()).count();
        let free = frame - reserved;
        let mut transmitters = Vec::new();
        for u in 0..present.len() {
            if !present[u] {
                continue;
            }
            let go = if pending_join.contains(&u) {
                true
            } else if let Some(p) = position[u] {
                p == pos
            } else {
                owner[pos].is_none() && free > 0 && rng.random::<f64>() < 1.0 / free as f64
            };
            if go {
                transmitters.push(u);
            }
        }
        pending_join.clear();

        match transmitters.len() {
            1 => {
                let u = transmitters[0];
                if position[u].is_none() && owner[pos].is_none() {
                    position[u] = Some(pos);
                    owner[pos] = Some(u);
                }
            }
            0 => {}
            _ => {
                frame_clean = false;
                if settled {
                    resets.push(t);
                    settled = false;
                    frame = max_n;
                    owner = vec![None; frame];
                    position.iter_mut().for_each(|p| *p = None);
                    frame_start = t + 1;
                    frame_clean = true;
                    frames.push(FrameChange { slot: t + 1, frame_length: frame });
                    continue;
                }
            }
        }

        if (t + 1 - frame_start).is_multiple_of(frame as u64) {
            let all_placed = (0..present.len()).all(|u| !present[u] || position[u].is_some());
            if frame_clean && all_placed {
                settled = true;
                let kept: Vec<usize> = owner.iter().flatten().copied().collect();
                if kept.len() < frame && !kept.is_empty() {
                    frame = kept.len();
                    owner = kept.iter().map(|&u| Some(u)).collect();
                    for (p, &u) in kept.iter().enumerate() {
                        position[u] = Some(p);
                    }
                    frame_start = t + 1;
                    frames.push(FrameChange { slot: t + 1, frame_length: frame });
                }
            }
            frame_clean = true;
        }
    }
    Ok(JoinLeaveResult { frames, resets })
}
