//! Constructors for the named protocol families.

use crate::error::{Error, Result};
use crate::model::{Action, FeedbackKind, FeedbackTechnology, History, HistorySpace, Protocol, SystemConfig};

/// Number of 1-slot histories for a feedback kind and user count.
pub fn one_slot_len(kind: FeedbackKind, n_users: usize) -> Result<usize> {
    let space = HistorySpace::new(SystemConfig::new(n_users, 1)?, FeedbackTechnology::new(kind, n_users)?)?;
    Ok(space.len())
}

/// The same transmission probability after every history.
pub fn memoryless(p: f64, n_users: usize) -> Result<Protocol> {
    constant(p, SystemConfig::new(n_users, 1)?, FeedbackKind::None)
}

pub fn constant(p: f64, config: SystemConfig, kind: FeedbackKind) -> Result<Protocol> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")));
    }
    Protocol::from_rule(format!("memoryless:{p}"), config, kind, |_| p)
}

/// Free/backlogged transmission probabilities of a generalized slotted
/// Aloha protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateSpec {
    pub p_free: f64,
    pub p_backlogged: f64,
    pub eta: Option<f64>,
}

impl TwoStateSpec {
    /// `p_F = 1` and `p_G = 1 - (1 - 1/eta)^(1/(N-1))`.
    pub fn from_eta(eta: f64, n_users: usize) -> Result<Self> {
        if !(eta >= 1.0) {
            return Err(Error::InvalidParameter(format!("fairness parameter {eta} must be at least 1")));
        }
        if n_users < 2 {
            return Err(Error::InvalidConfig("two-state protocols need at least two users".into()));
        }
        let p_backlogged = 1.0 - (1.0 - 1.0 / eta).powf(1.0 / (n_users as f64 - 1.0));
        Ok(TwoStateSpec { p_free: 1.0, p_backlogged, eta: Some(eta) })
    }
}

/// 1-slot protocol equivalent to a two-state protocol with `p_F = 1`:
/// `f(T,1) = 1` and `f(W,∅) = f(T,e) = p_G`.
pub fn two_state_equivalent(eta: f64, n_users: usize) -> Result<Protocol> {
    let spec = TwoStateSpec::from_eta(eta, n_users)?;
    let p_g = spec.p_backlogged;
    let config = SystemConfig::new(n_users, 1)?;
    Protocol::from_rule(format!("two-state:{eta}"), config, FeedbackKind::None, |h| {
        if h.oldest().is_own_success() {
            1.0
        } else {
            p_g
        }
    })
}

/// `(N-1)`-slot S/F protocol that settles into a TDMA rotation: wait for
/// `N-1` slots after an own success, otherwise contend with probability
/// `1/(N - n(L))` where `n(L)` counts success slots in the history.
pub fn theorem1_protocol(n_users: usize) -> Result<Protocol> {
    if n_users < 2 {
        return Err(Error::InvalidConfig("the TDMA-emulating protocol needs at least two users".into()));
    }
    let config = SystemConfig::new(n_users, n_users - 1)?;
    Protocol::from_rule("theorem1", config, FeedbackKind::SuccessFailure, |h: &History| {
        if h.contains_own_success() {
            0.0
        } else {
            let successes = h.success_count();
            assert!(successes < n_users, "history length bounds the success count");
            1.0 / (n_users - successes) as f64
        }
    })
}

/// `N`-slot S/F reservation protocol: a success in the slot `N` slots ago
/// reserves the current slot for its owner.
pub fn reservation_protocol(n_users: usize) -> Result<Protocol> {
    if n_users < 2 {
        return Err(Error::InvalidConfig("the reservation protocol needs at least two users".into()));
    }
    let config = SystemConfig::new(n_users, n_users)?;
    Protocol::from_rule("reservation", config, FeedbackKind::SuccessFailure, |h: &History| {
        let first = h.oldest();
        let recent = &h.pairs[1..];
        if first.is_own_success() {
            1.0
        } else if (first.action == Action::Wait && first.feedback.is_success()) || recent.iter().any(|p| p.is_own_success()) {
            0.0
        } else {
            let successes = recent.iter().filter(|p| p.is_success_slot()).count();
            1.0 / (n_users - successes) as f64
        }
    })
}

/// 1-slot protocol from probabilities in canonical history order.
pub fn one_slot(probabilities: Vec<f64>, kind: FeedbackKind, n_users: usize) -> Result<Protocol> {
    let name = format!(
        "one-slot:{}",
        probabilities.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
    );
    Protocol::from_vector(name, SystemConfig::new(n_users, 1)?, kind, probabilities)
}

/// Utility-maximizing protocol for five users under ternary feedback,
/// the delay-efficient protocol where `D = 200 (1 - tau)`. Rounded to two
/// decimals it reads `(f(W,0), f(W,1), f(W,e), f(T,1), f(T,e)) =
/// (0.20, 0.03, 0.34, 0.99, 0)`, see [`f_optimal_rounded`].
pub fn f_optimal() -> Protocol {
    let f = vec![
        0.204_418_769_221_657_7,
        0.027_830_373_267_282_18,
        0.342_495_588_197_367_2,
        0.991_348_072_701_260_1,
        1e-4,
    ];
    one_slot(f, FeedbackKind::Ternary, 5).expect("valid preset").renamed("fo")
}

/// [`f_optimal`] with every probability rounded to two decimals.
pub fn f_optimal_rounded() -> Protocol {
    one_slot(vec![0.20, 0.03, 0.34, 0.99, 0.0], FeedbackKind::Ternary, 5)
        .expect("valid preset")
        .renamed("fo-rounded")
}

/// Structured starting point for boundary sweeps: stick after a success,
/// back off after an own collision, and let waiters contend with roughly
/// the reciprocal of the number of other waiters.
pub fn structured_start(kind: FeedbackKind, n_users: usize) -> Result<Protocol> {
    let n = n_users;
    Protocol::from_rule("start", SystemConfig::new(n, 1)?, kind, |h| {
        let pair = h.oldest();
        let class = &pair.feedback;
        match pair.action {
            Action::Transmit if class.is_success() => 1.0,
            Action::Transmit => 0.0,
            Action::Wait if class.contains(0) => 1.0 / n as f64,
            Action::Wait if class.contains(1) => 0.0,
            Action::Wait => 1.0 / (n.saturating_sub(class.min())).max(1) as f64,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::metrics_reduced;
    use crate::model::ActionFeedbackPair;
    use approx::assert_abs_diff_eq;

    fn pair(space: &HistorySpace, action: Action, label: &str) -> ActionFeedbackPair {
        space.pairs()[space.find_pair(action, label).unwrap()].clone()
    }

    #[test]
    fn two_state_probabilities() {
        assert_eq!(TwoStateSpec::from_eta(1.0, 5).unwrap().p_backlogged, 1.0);
        assert_abs_diff_eq!(TwoStateSpec::from_eta(2.0, 2).unwrap().p_backlogged, 0.5, epsilon = 1e-15);
        assert!(TwoStateSpec::from_eta(0.5, 5).is_err());
        let p = two_state_equivalent(2.0, 2).unwrap();
        assert_eq!(p.probabilities(), &[0.5, 1.0, 0.5]);
    }

    #[test]
    fn two_state_matches_explicit_vector() {
        for i in 1..=20 {
            let eta = 1.0 / (i as f64 * 0.05);
            let p_g = TwoStateSpec::from_eta(eta, 5).unwrap().p_backlogged;
            let a = metrics_reduced(&two_state_equivalent(eta, 5).unwrap()).unwrap();
            let b = metrics_reduced(&one_slot(vec![p_g, 1.0, p_g], FeedbackKind::None, 5).unwrap()).unwrap();
            assert_eq!(a.total_throughput, b.total_throughput);
            assert_eq!(a.average_delay, b.average_delay);
        }
    }

    #[test]
    fn theorem1_rule_values() {
        let p = theorem1_protocol(5).unwrap();
        let space = p.space();
        let idle = pair(space, Action::Wait, "0∪e");
        let other = pair(space, Action::Wait, "1");
        let mine = pair(space, Action::Transmit, "1");
        let h = History { pairs: vec![idle.clone(); 4] };
        assert_eq!(p.probability_of(&h).unwrap(), 0.2);
        let h = History { pairs: vec![idle.clone(), idle.clone(), mine, idle.clone()] };
        assert_eq!(p.probability_of(&h).unwrap(), 0.0);
        let h = History { pairs: vec![other; 4] };
        assert_eq!(p.probability_of(&h).unwrap(), 1.0);
        assert_eq!(p.memory_slots(), 4);
    }

    #[test]
    fn reservation_rule_values() {
        let p = reservation_protocol(5).unwrap();
        let space = p.space();
        let idle = pair(space, Action::Wait, "0∪e");
        let other = pair(space, Action::Wait, "1");
        let mine = pair(space, Action::Transmit, "1");
        let collided = pair(space, Action::Transmit, "e");

        let mut pairs = vec![mine.clone(), idle.clone(), idle.clone(), idle.clone(), idle.clone()];
        assert_eq!(p.probability_of(&History { pairs: pairs.clone() }).unwrap(), 1.0);
        pairs[0] = other.clone();
        assert_eq!(p.probability_of(&History { pairs: pairs.clone() }).unwrap(), 0.0);
        pairs[0] = collided;
        pairs[3] = mine;
        assert_eq!(p.probability_of(&History { pairs: pairs.clone() }).unwrap(), 0.0);
        let pairs = vec![idle.clone(), other.clone(), idle.clone(), other, idle];
        assert_abs_diff_eq!(p.probability_of(&History { pairs }).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn one_slot_presets() {
        let rounded: Vec<f64> = f_optimal().probabilities().iter().map(|p| (p * 100.0).round() / 100.0).collect();
        assert_eq!(rounded, f_optimal_rounded().probabilities());
        assert_eq!(f_optimal_rounded().probabilities(), &[0.20, 0.03, 0.34, 0.99, 0.0]);
        let start = structured_start(FeedbackKind::Ternary, 5).unwrap();
        let expected = [0.2, 0.0, 1.0 / 3.0, 1.0, 0.0];
        for (a, b) in start.probabilities().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(matches!(
            one_slot(vec![0.1; 4], FeedbackKind::Ternary, 5),
            Err(Error::Shape { expected: 5, found: 4 })
        ));
    }

    #[test]
    fn memoryless_edges() {
        for p in [0.0, 1.0] {
            let m = metrics_reduced(&memoryless(p, 5).unwrap()).unwrap();
            assert_eq!(m.total_throughput, 0.0);
        }
        assert!(memoryless(1.2, 5).is_err());
    }
}
