//! Exact throughput and delay analysis.
//!
//! Two constructions are provided. The reduced chain tracks one
//! representative user through the `2N` states `(own action, number of
//! transmissions)` and only applies to symmetric 1-slot protocols. The
//! general chain tracks the last `M` transmission outcomes of all users and
//! works for any memory length, at a cost of `2^(N*M)` states.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov;
use crate::model::{Action, Protocol};

/// Hard ceiling on `N * M` for the general chain.
pub const GENERAL_MAX_BITS: usize = 16;
/// Default state cap for the general chain.
pub const GENERAL_DEFAULT_MAX_STATES: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReducedState {
    pub action: Action,
    pub k: usize,
}

impl ReducedState {
    /// Position in the order `(T,1), ..., (T,N), (W,0), ..., (W,N-1)`.
    pub fn index(self, n_users: usize) -> usize {
        match self.action {
            Action::Transmit => self.k - 1,
            Action::Wait => n_users + self.k,
        }
    }

    pub fn from_index(index: usize, n_users: usize) -> Self {
        if index < n_users {
            ReducedState { action: Action::Transmit, k: index + 1 }
        } else {
            ReducedState { action: Action::Wait, k: index - n_users }
        }
    }
}

pub const SUCCESS_STATE: usize = 0;

#[derive(Debug, Clone)]
pub struct ReducedChain {
    n_users: usize,
    matrix: DMatrix<f64>,
}

/// Probability mass function of `Binomial(n, p)`.
fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    let mut coeff = 1.0;
    for (x, slot) in pmf.iter_mut().enumerate() {
        if x > 0 {
            coeff = coeff * (n + 1 - x) as f64 / x as f64;
        }
        *slot = coeff * p.powi(x as i32) * (1.0 - p).powi((n - x) as i32);
    }
    pmf
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl ReducedChain {
    pub fn new(protocol: &Protocol) -> Result<Self> {
        if protocol.memory_slots() != 1 {
            return Err(Error::UnsupportedMemory { required: 1, found: protocol.memory_slots() });
        }
        let n = protocol.n_users();
        let mut q = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for from in 0..2 * n {
            let state = ReducedState::from_index(from, n);
            let k = state.k;
            // Previous transmitters see rho(T,k), previous waiters rho(W,k).
            let p_tx = if k >= 1 { protocol.after(Action::Transmit, k)? } else { 0.0 };
            let p_wait = if k < n { protocol.after(Action::Wait, k)? } else { 0.0 };
            let (own, other_tx, other_wait) = match state.action {
                Action::Transmit => (p_tx, k - 1, n - k),
                Action::Wait => (p_wait, k, n - k - 1),
            };
            let others = convolve(&binomial_pmf(other_tx, p_tx), &binomial_pmf(other_wait, p_wait));
            for (j, &prob) in others.iter().enumerate() {
                let to_tx = ReducedState { action: Action::Transmit, k: j + 1 }.index(n);
                q[(from, to_tx)] += own * prob;
                if j < n {
                    let to_wait = ReducedState { action: Action::Wait, k: j }.index(n);
                    q[(from, to_wait)] += (1.0 - own) * prob;
                }
            }
        }
        Ok(ReducedChain { n_users: n, matrix: q })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn transition(&self, from: ReducedState, to: ReducedState) -> f64 {
        self.matrix[(from.index(self.n_users), to.index(self.n_users))]
    }

    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        markov::stationary_distribution(&self.matrix)
    }

    /// Expected waiting time from each state, with a per-state cost `b`.
    pub fn delay_vector(&self, cost: &[f64]) -> Result<Vec<f64>> {
        let mut targets = vec![false; 2 * self.n_users];
        targets[SUCCESS_STATE] = true;
        markov::first_passage(&self.matrix, &targets, cost)
    }

    pub fn slot_fractions(&self, v: &[f64]) -> SlotFractions {
        let n = self.n_users;
        let idle = v[ReducedState { action: Action::Wait, k: 0 }.index(n)];
        let mut success = v[SUCCESS_STATE];
        if n >= 2 {
            success += v[ReducedState { action: Action::Wait, k: 1 }.index(n)];
        }
        SlotFractions { idle, success, collision: 1.0 - idle - success }
    }
}

pub fn build_reduced_chain(protocol: &Protocol) -> Result<ReducedChain> {
    ReducedChain::new(protocol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotFractions {
    pub idle: f64,
    pub success: f64,
    pub collision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub per_user_throughput: f64,
    pub total_throughput: f64,
    /// Average delay in slots; infinite when success is not reached surely.
    pub average_delay: f64,
    pub inter_packet_time: f64,
    pub stationary: Vec<f64>,
    pub first_passage: Vec<f64>,
    pub slot_fractions: SlotFractions,
}

impl Metrics {
    pub fn is_delay_finite(&self) -> bool {
        self.average_delay.is_finite()
    }
}

fn expected_delay(v: &[f64], d: &[f64]) -> f64 {
    let mut total = 0.0;
    for (p, x) in v.iter().zip(d) {
        if *p > 0.0 {
            if !x.is_finite() {
                return f64::INFINITY;
            }
            total += p * x;
        }
    }
    total
}

pub fn metrics_reduced(protocol: &Protocol) -> Result<Metrics> {
    let chain = ReducedChain::new(protocol)?;
    let v = chain.stationary_distribution()?;
    let n = chain.n_users;
    let d = chain.delay_vector(&vec![1.0; 2 * n])?;
    let per_user = v[SUCCESS_STATE];
    let average_delay = expected_delay(&v, &d) - 0.5;
    let inter_packet_time = if per_user > 0.0 { d[SUCCESS_STATE] } else { f64::INFINITY };
    Ok(Metrics {
        per_user_throughput: per_user,
        total_throughput: n as f64 * per_user,
        average_delay,
        inter_packet_time,
        slot_fractions: chain.slot_fractions(&v),
        stationary: v,
        first_passage: d,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GeneralOptions {
    pub max_states: usize,
    /// Use the Cesàro limit from the all-idle start when the chain has
    /// several closed classes instead of failing.
    pub allow_reducible: bool,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions { max_states: GENERAL_DEFAULT_MAX_STATES, allow_reducible: false }
    }
}

/// Chain over the last `M` outcomes of all users. A state index packs the
/// outcomes oldest first, one `N`-bit transmit mask per slot, with user `i`
/// at bit `i`.
#[derive(Debug, Clone)]
pub struct GeneralChain {
    n_users: usize,
    memory_slots: usize,
    matrix: DMatrix<f64>,
}

impl GeneralChain {
    pub fn new(protocol: &Protocol, options: GeneralOptions) -> Result<Self> {
        let n = protocol.n_users();
        let m = protocol.memory_slots();
        let bits = n * m;
        if bits > GENERAL_MAX_BITS {
            return Err(Error::StateSpaceTooLarge {
                states: 1usize.checked_shl(bits as u32).unwrap_or(usize::MAX),
                cap: 1 << GENERAL_MAX_BITS,
            });
        }
        let states = 1usize << bits;
        if states > options.max_states {
            return Err(Error::StateSpaceTooLarge { states, cap: options.max_states });
        }
        let outcomes = 1usize << n;
        let space = protocol.space();
        let mask = (1usize << n) - 1;
        let keep = if m == 1 { 0 } else { (1usize << (n * (m - 1))) - 1 };
        let mut q = DMatrix::<f64>::zeros(states, states);
        let mut probs = vec![0.0; n];
        for s in 0..states {
            for (user, prob) in probs.iter_mut().enumerate() {
                let mut h = space.initial_index();
                for slot in 0..m {
                    let outcome = (s >> (n * (m - 1 - slot))) & mask;
                    let k = outcome.count_ones() as usize;
                    let action =
                        if outcome >> user & 1 == 1 { Action::Transmit } else { Action::Wait };
                    h = space.push(h, space.pair_index(action, k)?);
                }
                *prob = protocol.probability(h);
            }
            let base = (s & keep) << n;
            for a in 0..outcomes {
                let p: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(i, f)| if a >> i & 1 == 1 { *f } else { 1.0 - f })
                    .product();
                q[(s, base | a)] += p;
            }
        }
        Ok(GeneralChain { n_users: n, memory_slots: m, matrix: q })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_states(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn memory_slots(&self) -> usize {
        self.memory_slots
    }

    /// Most recent outcome of a state as a transmit mask.
    pub fn last_outcome(&self, state: usize) -> usize {
        state & ((1usize << self.n_users) - 1)
    }

    pub fn stationary_distribution(&self, options: GeneralOptions) -> Result<Vec<f64>> {
        match markov::stationary_distribution(&self.matrix) {
            Err(Error::ReducibleChain { .. }) if options.allow_reducible => {
                let mut v0 = vec![0.0; self.n_states()];
                v0[0] = 1.0;
                markov::cesaro_limit(&self.matrix, &v0)
            }
            other => other,
        }
    }
}

pub fn metrics_general(protocol: &Protocol, options: GeneralOptions) -> Result<Metrics> {
    let chain = GeneralChain::new(protocol, options)?;
    let v = chain.stationary_distribution(options)?;
    let n = chain.n_users;
    let states = chain.n_states();
    // User 0 stands for every user of a symmetric protocol.
    let targets: Vec<bool> = (0..states).map(|s| chain.last_outcome(s) == 1).collect();
    let d = markov::first_passage(&chain.matrix, &targets, &vec![1.0; states])?;
    let per_user: f64 = (0..states).filter(|&s| targets[s]).map(|s| v[s]).sum();
    let inter_packet_time = if per_user > 0.0 {
        let weighted: f64 = (0..states)
            .filter(|&s| targets[s] && v[s] > 0.0)
            .map(|s| v[s] * d[s])
            .sum();
        weighted / per_user
    } else {
        f64::INFINITY
    };
    let mut fractions = [0.0f64; 3];
    for (s, p) in v.iter().enumerate() {
        let k = chain.last_outcome(s).count_ones() as usize;
        fractions[k.min(2)] += p;
    }
    Ok(Metrics {
        per_user_throughput: per_user,
        total_throughput: n as f64 * per_user,
        average_delay: expected_delay(&v, &d) - 0.5,
        inter_packet_time,
        slot_fractions: SlotFractions {
            idle: fractions[0],
            success: fractions[1],
            collision: fractions[2],
        },
        stationary: v,
        first_passage: d,
    })
}

/// Average delay predicted from the inter-packet mean and its coefficient
/// of variation.
pub fn pk_decompose(inter_packet_time: f64, kappa: f64) -> f64 {
    0.5 * (1.0 + kappa * kappa) * inter_packet_time
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub protocol: String,
    #[serde(rename = "N")]
    pub n_users: usize,
    #[serde(rename = "M")]
    pub memory_slots: usize,
    pub feedback: String,
    pub tau_total: f64,
    pub tau_user: f64,
    pub delay: f64,
    pub interpacket: f64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl MetricsRow {
    pub fn new(protocol: &Protocol, metrics: &Metrics) -> Self {
        MetricsRow {
            protocol: protocol.name().to_string(),
            n_users: protocol.n_users(),
            memory_slots: protocol.memory_slots(),
            feedback: protocol.kind().name().to_string(),
            tau_total: metrics.total_throughput,
            tau_user: metrics.per_user_throughput,
            delay: metrics.average_delay,
            interpacket: metrics.inter_packet_time,
            p0: metrics.slot_fractions.idle,
            p1: metrics.slot_fractions.success,
            p2: metrics.slot_fractions.collision,
        }
    }
}
