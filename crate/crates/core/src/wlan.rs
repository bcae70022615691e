//! Throughput and delay when idle, success and collision slots last
//! different amounts of time, as in an 802.11 WLAN.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{ReducedChain, ReducedState, SlotFractions, SUCCESS_STATE};
use crate::error::{Error, Result};
use crate::model::{Action, Protocol};

/// Slot durations and mean payload time, all in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlanTiming {
    pub sigma0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub mean_payload: f64,
}

pub const DEFAULT_PRESET: &str = "80211a-mode8";

impl WlanTiming {
    pub fn new(sigma0: f64, sigma1: f64, sigma2: f64, mean_payload: f64) -> Result<Self> {
        let t = WlanTiming { sigma0, sigma1, sigma2, mean_payload };
        t.validate()?;
        Ok(t)
    }

    /// 802.11a at 54 Mbit/s with 1500-byte payloads.
    pub fn ieee80211a_mode8() -> Self {
        WlanTiming { sigma0: 9.0, sigma1: 419.56, sigma2: 400.48, mean_payload: 341.33 }
    }

    /// Every slot lasts one unit and carries one unit of payload.
    pub fn unit() -> Self {
        WlanTiming { sigma0: 1.0, sigma1: 1.0, sigma2: 1.0, mean_payload: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma0, self.sigma1, self.sigma2, self.mean_payload];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(format!("slot durations must be positive: {self:?}")));
        }
        if self.mean_payload > self.sigma1 {
            return Err(Error::InvalidConfig(format!(
                "mean payload {} does not fit in a success slot of {}",
                self.mean_payload, self.sigma1
            )));
        }
        Ok(())
    }

    /// Throughput ceiling `E[P] / sigma1`, reached when every slot is a
    /// success.
    pub fn throughput_bound(&self) -> f64 {
        self.mean_payload / self.sigma1
    }

    fn duration_after(&self, k: usize) -> f64 {
        match k {
            0 => self.sigma0,
            1 => self.sigma1,
            _ => self.sigma2,
        }
    }

    /// Built-in preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            DEFAULT_PRESET => Ok(Self::ieee80211a_mode8()),
            "unit" => Ok(Self::unit()),
            _ => Err(Error::InvalidConfig(format!("unknown timing preset {name:?}"))),
        }
    }

    /// Look a preset up by name, then in a CSV file with columns
    /// `name,sigma0,sigma1,sigma2,mean_payload`.
    pub fn resolve(name: &str, file: Option<&Path>) -> Result<Self> {
        if let Some(path) = file {
            for row in read_presets(path)? {
                if row.name == name {
                    return WlanTiming::new(row.sigma0, row.sigma1, row.sigma2, row.mean_payload);
                }
            }
        }
        Self::preset(name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingPreset {
    pub name: String,
    pub sigma0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub mean_payload: f64,
}

pub fn read_presets(path: &Path) -> Result<Vec<TimingPreset>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlanMetrics {
    /// Fraction of air time carrying payload.
    pub throughput: f64,
    /// Mean time from an arbitrary instant until the start of the user's
    /// next successful slot, in the timing's units.
    pub average_delay: f64,
    pub slot_fractions: SlotFractions,
    pub stationary: Vec<f64>,
    /// Time-weighted state probabilities.
    pub time_weighted: Vec<f64>,
    pub first_passage: Vec<f64>,
}

fn air_time(f: &SlotFractions, t: &WlanTiming) -> f64 {
    f.idle * t.sigma0 + f.success * t.sigma1 + f.collision * t.sigma2
}

/// Exact metrics of a 1-slot protocol under heterogeneous slot durations.
pub fn wlan_metrics(protocol: &Protocol, timing: &WlanTiming) -> Result<WlanMetrics> {
    timing.validate()?;
    let chain = ReducedChain::new(protocol)?;
    let n = chain.n_users();
    let v = chain.stationary_distribution()?;
    let fractions = chain.slot_fractions(&v);
    // A state's slot is the slot that produced it, so its length follows k.
    let b: Vec<f64> = (0..2 * n)
        .map(|i| timing.duration_after(ReducedState::from_index(i, n).k))
        .collect();
    let d = chain.delay_vector(&b)?;
    let total: f64 = v.iter().zip(&b).map(|(p, s)| p * s).sum();
    let y: Vec<f64> = v.iter().zip(&b).map(|(p, s)| p * s / total).collect();
    let mut delay = 0.0;
    for i in 0..2 * n {
        if y[i] > 0.0 {
            delay += y[i] * (d[i] - 0.5 * b[i]);
        }
    }
    if v[SUCCESS_STATE] == 0.0 {
        delay = f64::INFINITY;
    }
    Ok(WlanMetrics {
        throughput: fractions.success * timing.mean_payload / air_time(&fractions, timing),
        average_delay: delay,
        slot_fractions: fractions,
        stationary: v,
        time_weighted: y,
        first_passage: d,
    })
}

/// Closed-form metrics of the memoryless protocol that transmits with
/// probability `p` in every slot.
pub fn wlan_memoryless(p: f64, n_users: usize, timing: &WlanTiming) -> Result<WlanMetrics> {
    timing.validate()?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")));
    }
    if n_users == 0 {
        return Err(Error::InvalidConfig("need at least one user".into()));
    }
    let n = n_users as f64;
    let p0 = (1.0 - p).powi(n_users as i32);
    let p1 = n * p * (1.0 - p).powi(n_users as i32 - 1);
    let fractions = SlotFractions { idle: p0, success: p1, collision: (1.0 - p0 - p1).max(0.0) };
    let (s0, s1, s2) = (timing.sigma0, timing.sigma1, timing.sigma2);
    let air = air_time(&fractions, timing);
    let delay = if p1 > 0.0 {
        let residual = (p0 * s0 * s0 + p1 * s1 * s1 + fractions.collision * s2 * s2) / (2.0 * air);
        let inter = (n * (p0 * s0 + fractions.collision * s2) + (n - 1.0) * p1 * s1) / p1;
        residual + inter
    } else {
        f64::INFINITY
    };
    Ok(WlanMetrics {
        throughput: p1 * timing.mean_payload / air,
        average_delay: delay,
        slot_fractions: fractions,
        stationary: Vec::new(),
        time_weighted: Vec::new(),
        first_passage: Vec::new(),
    })
}

/// Contention window settings of the 802.11 distributed coordination
/// function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcfParams {
    pub cw_min: u32,
    pub cw_max: u32,
    pub n_users: usize,
}

impl DcfParams {
    /// Number of window doublings `m` with `cw_max = cw_min * 2^m`.
    pub fn stages(&self) -> Result<u32> {
        if self.cw_min == 0 || self.n_users == 0 || self.cw_max < self.cw_min {
            return Err(Error::InvalidConfig(format!("invalid DCF parameters {self:?}")));
        }
        let ratio = self.cw_max / self.cw_min;
        if !self.cw_max.is_multiple_of(self.cw_min) || !ratio.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "cw_max {} is not cw_min {} times a power of two",
                self.cw_max, self.cw_min
            )));
        }
        Ok(ratio.trailing_zeros())
    }
}

/// Per-slot transmission probability of a saturated DCF station from the
/// Bianchi fixed point, found by bisection on the collision probability.
/// The Bianchi system itself comes from outside this crate's model.
pub fn dcf_probability(params: DcfParams) -> Result<f64> {
    let m = params.stages()?;
    let w = params.cw_min as f64;
    // (1 - (2p)^m) / (1 - 2p) written as a sum so p = 1/2 is harmless.
    let tau_of = |p: f64| {
        let series: f64 = (0..m).map(|k| (2.0 * p).powi(k as i32)).sum();
        2.0 / (1.0 + w + p * w * series)
    };
    if params.n_users == 1 {
        return Ok(tau_of(0.0));
    }
    let others = params.n_users as i32 - 1;
    let g = |p: f64| p - (1.0 - (1.0 - tau_of(p)).powi(others));
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if !(g(lo) < 0.0 && g(hi) > 0.0) {
        return Err(Error::Numerical("DCF fixed point is not bracketed".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let value = g(mid);
        if value.abs() <= 1e-12 || hi - lo <= f64::EPSILON {
            return Ok(tau_of(mid));
        }
        if value < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(tau_of(0.5 * (lo + hi)))
}

/// Whether a 1-slot protocol's waiting users never transmit after hearing
/// a success or a collision, so that they only act on idle slots.
pub fn ignores_busy_feedback(protocol: &Protocol) -> Result<bool> {
    let n = protocol.n_users();
    Ok((1..n).all(|k| protocol.after(Action::Wait, k).map(|p| p <= 1e-3).unwrap_or(false)))
}
