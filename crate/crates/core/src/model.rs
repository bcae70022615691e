//! Users, actions, feedback technologies, histories and protocols.
//!
//! A feedback technology is a partition of the transmission counts
//! `{0, ..., N}`. A user combines the class it observes with its own ACK to
//! form an action-feedback pair; the last `M` pairs make up its history and a
//! protocol maps every history to a transmission probability.
//!
//! Histories are kept in a fixed canonical order so that protocol vectors and
//! CSV columns are stable:
//!
//! * wait pairs come first, sorted by the smallest member of their class,
//!   followed by transmit pairs sorted the same way (success first);
//! * an `M`-slot history is an `M`-digit number over the pair list with the
//!   oldest pair as the most significant digit.
//!
//! The all-idle history `(W, rho(W,0))^M` therefore always has index 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_users: usize,
    pub memory_slots: usize,
}

impl SystemConfig {
    pub fn new(n_users: usize, memory_slots: usize) -> Result<Self> {
        if n_users < 1 {
            return Err(Error::InvalidConfig("at least one user is required".into()));
        }
        if memory_slots < 1 {
            return Err(Error::InvalidConfig("memory must span at least one slot".into()));
        }
        Ok(SystemConfig { n_users, memory_slots })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Transmit,
    Wait,
}

impl Action {
    pub fn symbol(self) -> &'static str {
        match self {
            Action::Transmit => "T",
            Action::Wait => "W",
        }
    }
}

/// Channel feedback models. Each is paired with perfect ACK feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeedbackKind {
    /// No channel feedback, partition `{K}`.
    None,
    /// Success/failure: `{1}` versus `0 ∪ e`.
    SuccessFailure,
    /// Collision/no collision: `0 ∪ 1` versus `e`.
    CollisionNoCollision,
    /// Empty/not empty: `{0}` versus `1 ∪ e`.
    EmptyNonEmpty,
    /// `(0, 1, e)` feedback.
    Ternary,
    /// Exact number of transmissions.
    NPlus1Ary,
}

impl FeedbackKind {
    pub const ALL: [FeedbackKind; 6] = [
        FeedbackKind::None,
        FeedbackKind::SuccessFailure,
        FeedbackKind::CollisionNoCollision,
        FeedbackKind::EmptyNonEmpty,
        FeedbackKind::Ternary,
        FeedbackKind::NPlus1Ary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeedbackKind::None => "none",
            FeedbackKind::SuccessFailure => "sf",
            FeedbackKind::CollisionNoCollision => "cnc",
            FeedbackKind::EmptyNonEmpty => "ene",
            FeedbackKind::Ternary => "ternary",
            FeedbackKind::NPlus1Ary => "n+1",
        }
    }
}

impl fmt::Display for FeedbackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeedbackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "ack" | "ack-only" => Ok(FeedbackKind::None),
            "sf" | "s/f" | "success-failure" => Ok(FeedbackKind::SuccessFailure),
            "cnc" | "c/nc" | "collision" => Ok(FeedbackKind::CollisionNoCollision),
            "ene" | "e/ne" | "empty" => Ok(FeedbackKind::EmptyNonEmpty),
            "ternary" | "3" => Ok(FeedbackKind::Ternary),
            "n+1" | "nplus1" | "n+1-ary" | "exact" => Ok(FeedbackKind::NPlus1Ary),
            other => Err(Error::Parse(format!("unknown feedback kind '{other}'"))),
        }
    }
}

/// A set of transmission counts a user cannot tell apart.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeedbackClass {
    members: Vec<usize>,
    label: String,
}

impl FeedbackClass {
    fn new(mut members: Vec<usize>, n_users: usize, kind: FeedbackKind) -> Self {
        members.sort_unstable();
        members.dedup();
        debug_assert!(!members.is_empty());
        let label = class_label(&members, n_users, kind);
        FeedbackClass { members, label }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn contains(&self, k: usize) -> bool {
        self.members.binary_search(&k).is_ok()
    }

    pub fn min(&self) -> usize {
        self.members[0]
    }

    /// True for the exact single-success class `{1}`.
    pub fn is_success(&self) -> bool {
        self.members == [1]
    }
}

impl fmt::Display for FeedbackClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

fn class_label(members: &[usize], n: usize, kind: FeedbackKind) -> String {
    let collision: Vec<usize> = (2..=n).collect();
    let is = |set: &[usize]| members == set;
    let with = |head: &[usize]| {
        let mut v = head.to_vec();
        v.extend(2..=n);
        members == v.as_slice()
    };
    if kind == FeedbackKind::NPlus1Ary && members.len() == 1 {
        return members[0].to_string();
    }
    if kind == FeedbackKind::None && members.len() == n + 1 {
        return "∅".into();
    }
    if members.len() == 1 && members[0] <= 1 {
        return members[0].to_string();
    }
    if !collision.is_empty() && is(&collision) {
        return "e".into();
    }
    if n >= 2 && with(&[0]) {
        return "0∪e".into();
    }
    if n >= 2 && with(&[1]) {
        return "1∪e".into();
    }
    if is(&[0, 1]) {
        return "0∪1".into();
    }
    let parts: Vec<String> = members.iter().map(|m| m.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

/// A channel feedback partition together with the ACK-refined feedback map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackTechnology {
    kind: FeedbackKind,
    classes: Vec<FeedbackClass>,
    n_users: usize,
}

impl FeedbackTechnology {
    pub fn new(kind: FeedbackKind, n_users: usize) -> Result<Self> {
        if n_users < 1 {
            return Err(Error::InvalidConfig("at least one user is required".into()));
        }
        let n = n_users;
        let collision: Vec<usize> = (2..=n).collect();
        let join = |head: &[usize], tail: &[usize]| -> Vec<usize> {
            head.iter().chain(tail.iter()).copied().collect()
        };
        let raw: Vec<Vec<usize>> = match kind {
            FeedbackKind::None => vec![(0..=n).collect()],
            FeedbackKind::SuccessFailure => vec![join(&[0], &collision), vec![1]],
            FeedbackKind::CollisionNoCollision => vec![vec![0, 1], collision.clone()],
            FeedbackKind::EmptyNonEmpty => vec![vec![0], join(&[1], &collision)],
            FeedbackKind::Ternary => vec![vec![0], vec![1], collision.clone()],
            FeedbackKind::NPlus1Ary => (0..=n).map(|k| vec![k]).collect(),
        };
        let mut classes: Vec<FeedbackClass> = raw
            .into_iter()
            .filter(|members| !members.is_empty())
            .map(|members| FeedbackClass::new(members, n, kind))
            .collect();
        classes.sort_by_key(FeedbackClass::min);
        Ok(FeedbackTechnology { kind, classes, n_users })
    }

    pub fn kind(&self) -> FeedbackKind {
        self.kind
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    /// Partition classes sorted by their smallest member.
    pub fn classes(&self) -> &[FeedbackClass] {
        &self.classes
    }

    /// The channel feedback class containing `k`.
    pub fn class_of(&self, k: usize) -> Result<&FeedbackClass> {
        self.classes
            .iter()
            .find(|c| c.contains(k))
            .ok_or_else(|| Error::InvalidParameter(format!("{k} exceeds {} users", self.n_users)))
    }

    /// Feedback information of a user who took `action` in a slot with `k`
    /// transmissions: the channel class for waiters, the exact success class
    /// for a lone transmitter, and the channel class restricted to
    /// `{2, ..., N}` after a collision.
    pub fn feedback_of(&self, action: Action, k: usize) -> Result<FeedbackClass> {
        if k > self.n_users {
            return Err(Error::InvalidParameter(format!(
                "{k} transmissions exceed {} users",
                self.n_users
            )));
        }
        match action {
            Action::Wait => self.class_of(k).cloned(),
            Action::Transmit => match k {
                0 => Err(Error::Contradiction(
                    "a transmitting user observed zero transmissions".into(),
                )),
                1 => Ok(FeedbackClass::new(vec![1], self.n_users, self.kind)),
                _ => {
                    let members: Vec<usize> = self
                        .class_of(k)?
                        .members()
                        .iter()
                        .copied()
                        .filter(|&m| m >= 2)
                        .collect();
                    Ok(FeedbackClass::new(members, self.n_users, self.kind))
                }
            },
        }
    }

    /// True if every class of `self` lies inside some class of `coarser`.
    pub fn refines(&self, coarser: &FeedbackTechnology) -> bool {
        self.n_users == coarser.n_users
            && self.classes.iter().all(|fine| {
                coarser
                    .classes
                    .iter()
                    .any(|c| fine.members().iter().all(|&m| c.contains(m)))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionFeedbackPair {
    pub action: Action,
    pub feedback: FeedbackClass,
}

impl ActionFeedbackPair {
    pub fn is_own_success(&self) -> bool {
        self.action == Action::Transmit && self.feedback.is_success()
    }

    /// Success observed by anyone, including the user itself.
    pub fn is_success_slot(&self) -> bool {
        self.feedback.is_success()
    }
}

impl fmt::Display for ActionFeedbackPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.action.symbol(), self.feedback)
    }
}

/// `M` action-feedback pairs, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct History {
    pub pairs: Vec<ActionFeedbackPair>,
}

impl History {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn oldest(&self) -> &ActionFeedbackPair {
        &self.pairs[0]
    }

    pub fn contains_own_success(&self) -> bool {
        self.pairs.iter().any(ActionFeedbackPair::is_own_success)
    }

    pub fn success_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_success_slot()).count()
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|p| p.to_string()).collect();
        f.write_str(&parts.join(";"))
    }
}

/// The realizable action-feedback pairs of a technology and the index
/// arithmetic over `M`-slot histories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistorySpace {
    config: SystemConfig,
    tech: FeedbackTechnology,
    pairs: Vec<ActionFeedbackPair>,
    wait_pair: Vec<usize>,
    transmit_pair: Vec<usize>,
    len: usize,
}

impl HistorySpace {
    pub fn new(config: SystemConfig, tech: FeedbackTechnology) -> Result<Self> {
        if config.n_users != tech.n_users() {
            return Err(Error::InvalidConfig(format!(
                "configuration has {} users but the feedback technology was built for {}",
                config.n_users,
                tech.n_users()
            )));
        }
        let n = config.n_users;
        let mut wait: Vec<FeedbackClass> = Vec::new();
        for k in 0..n {
            let c = tech.feedback_of(Action::Wait, k)?;
            if !wait.contains(&c) {
                wait.push(c);
            }
        }
        let mut transmit: Vec<FeedbackClass> = Vec::new();
        for k in 1..=n {
            let c = tech.feedback_of(Action::Transmit, k)?;
            if !transmit.contains(&c) {
                transmit.push(c);
            }
        }
        wait.sort_by_key(FeedbackClass::min);
        transmit.sort_by_key(FeedbackClass::min);

        let mut pairs: Vec<ActionFeedbackPair> = wait
            .into_iter()
            .map(|feedback| ActionFeedbackPair { action: Action::Wait, feedback })
            .collect();
        pairs.extend(
            transmit
                .into_iter()
                .map(|feedback| ActionFeedbackPair { action: Action::Transmit, feedback }),
        );

        let locate = |action: Action, k: usize| -> Result<usize> {
            let fb = tech.feedback_of(action, k)?;
            Ok(pairs
                .iter()
                .position(|p| p.action == action && p.feedback == fb)
                .expect("pair list covers every realizable observation"))
        };
        let wait_pair = (0..n).map(|k| locate(Action::Wait, k)).collect::<Result<Vec<_>>>()?;
        let mut transmit_pair = vec![usize::MAX];
        for k in 1..=n {
            transmit_pair.push(locate(Action::Transmit, k)?);
        }

        let len = pairs
            .len()
            .checked_pow(config.memory_slots as u32)
            .ok_or(Error::StateSpaceTooLarge { states: usize::MAX, cap: usize::MAX })?;
        Ok(HistorySpace { config, tech, pairs, wait_pair, transmit_pair, len })
    }

    pub fn config(&self) -> SystemConfig {
        self.config
    }

    pub fn technology(&self) -> &FeedbackTechnology {
        &self.tech
    }

    /// The realizable action-feedback pairs in canonical order.
    pub fn pairs(&self) -> &[ActionFeedbackPair] {
        &self.pairs
    }

    /// Number of `M`-slot histories.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Index of the pair a user records after taking `action` in a slot
    /// with `k` transmissions.
    pub fn pair_index(&self, action: Action, k: usize) -> Result<usize> {
        match action {
            Action::Wait if k < self.config.n_users => Ok(self.wait_pair[k]),
            Action::Transmit if (1..=self.config.n_users).contains(&k) => {
                Ok(self.transmit_pair[k])
            }
            Action::Transmit if k == 0 => Err(Error::Contradiction(
                "a transmitting user observed zero transmissions".into(),
            )),
            _ => Err(Error::InvalidParameter(format!(
                "{} with {k} transmissions is not realizable for {} users",
                action.symbol(),
                self.config.n_users
            ))),
        }
    }

    pub fn find_pair(&self, action: Action, label: &str) -> Option<usize> {
        self.pairs
            .iter()
            .position(|p| p.action == action && p.feedback.label() == label)
    }

    /// Index of the all-idle initialization history.
    pub fn initial_index(&self) -> usize {
        0
    }

    /// Shift a pair into a history index, dropping the oldest pair.
    pub fn push(&self, index: usize, pair: usize) -> usize {
        (index % (self.len / self.pairs.len())) * self.pairs.len() + pair
    }

    /// Pair indices of a history, oldest first.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let base = self.pairs.len();
        let mut digits = vec![0; self.config.memory_slots];
        for slot in digits.iter_mut().rev() {
            *slot = index % base;
            index /= base;
        }
        digits
    }

    pub fn index_of_digits(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.config.memory_slots {
            return Err(Error::Shape { expected: self.config.memory_slots, found: digits.len() });
        }
        let base = self.pairs.len();
        digits.iter().try_fold(0usize, |acc, &d| {
            if d >= base {
                Err(Error::InvalidParameter(format!("pair index {d} out of range")))
            } else {
                Ok(acc * base + d)
            }
        })
    }

    pub fn history(&self, index: usize) -> History {
        History {
            pairs: self.digits(index).into_iter().map(|d| self.pairs[d].clone()).collect(),
        }
    }

    pub fn index_of(&self, history: &History) -> Result<usize> {
        let digits = history
            .pairs
            .iter()
            .map(|p| {
                self.pairs
                    .iter()
                    .position(|q| q == p)
                    .ok_or_else(|| Error::InvalidParameter(format!("pair {p} is not realizable")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.index_of_digits(&digits)
    }

    /// Every history in canonical order.
    pub fn histories(&self) -> impl Iterator<Item = History> + '_ {
        (0..self.len).map(|i| self.history(i))
    }
}

pub fn build_feedback_technology(kind: FeedbackKind, n_users: usize) -> Result<FeedbackTechnology> {
    FeedbackTechnology::new(kind, n_users)
}

pub fn enumerate_histories(config: SystemConfig, tech: &FeedbackTechnology) -> Result<Vec<History>> {
    let space = HistorySpace::new(config, tech.clone())?;
    Ok(space.histories().collect())
}

/// A symmetric stationary decision rule, tabulated over canonical history
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    name: String,
    space: HistorySpace,
    probabilities: Vec<f64>,
}

impl Protocol {
    pub fn from_vector(
        name: impl Into<String>,
        config: SystemConfig,
        kind: FeedbackKind,
        probabilities: Vec<f64>,
    ) -> Result<Self> {
        let tech = FeedbackTechnology::new(kind, config.n_users)?;
        let space = HistorySpace::new(config, tech)?;
        Self::with_space(name, space, probabilities)
    }

    pub fn from_rule<F>(name: impl Into<String>, config: SystemConfig, kind: FeedbackKind, rule: F) -> Result<Self>
    where
        F: Fn(&History) -> f64,
    {
        let tech = FeedbackTechnology::new(kind, config.n_users)?;
        let space = HistorySpace::new(config, tech)?;
        let probabilities = space.histories().map(|h| rule(&h)).collect();
        Self::with_space(name, space, probabilities)
    }

    pub fn with_space(name: impl Into<String>, space: HistorySpace, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != space.len() {
            return Err(Error::Shape { expected: space.len(), found: probabilities.len() });
        }
        if let Some((i, p)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidParameter(format!(
                "probability {p} for history {} lies outside [0, 1]",
                space.history(i)
            )));
        }
        Ok(Protocol { name: name.into(), space, probabilities })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn config(&self) -> SystemConfig {
        self.space.config
    }

    pub fn n_users(&self) -> usize {
        self.space.config.n_users
    }

    pub fn memory_slots(&self) -> usize {
        self.space.config.memory_slots
    }

    pub fn feedback(&self) -> &FeedbackTechnology {
        &self.space.tech
    }

    pub fn kind(&self) -> FeedbackKind {
        self.space.tech.kind()
    }

    pub fn space(&self) -> &HistorySpace {
        &self.space
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.probabilities[index]
    }

    pub fn probability_of(&self, history: &History) -> Result<f64> {
        Ok(self.probabilities[self.space.index_of(history)?])
    }

    /// Probability after a single observation; only meaningful for 1-slot
    /// protocols.
    pub fn after(&self, action: Action, k: usize) -> Result<f64> {
        if self.memory_slots() != 1 {
            return Err(Error::UnsupportedMemory { required: 1, found: self.memory_slots() });
        }
        Ok(self.probabilities[self.space.pair_index(action, k)?])
    }

    /// Reinterpret the rule for a different number of users by matching
    /// pair labels. Used when users act on an estimate of `N`.
    pub fn for_users(&self, n_users: usize) -> Result<Protocol> {
        let config = SystemConfig::new(n_users, self.memory_slots())?;
        let tech = FeedbackTechnology::new(self.kind(), n_users)?;
        let space = HistorySpace::new(config, tech)?;
        let labels = |s: &HistorySpace| -> Vec<(Action, String)> {
            s.pairs().iter().map(|p| (p.action, p.feedback.label().to_string())).collect()
        };
        if labels(&space) != labels(&self.space) {
            return Err(Error::InvalidConfig(format!(
                "{} feedback histories for {} users differ from those for {}",
                self.kind(),
                n_users,
                self.n_users()
            )));
        }
        Protocol::with_space(self.name.clone(), space, self.probabilities.clone())
    }

    /// JSON document with probabilities printed to 17 significant digits.
    pub fn to_json(&self) -> String {
        let probs: Vec<String> = self.probabilities.iter().map(|p| format!("{p:.16e}")).collect();
        format!(
            "{{\n  \"name\": {},\n  \"n_users\": {},\n  \"memory_slots\": {},\n  \"feedback_kind\": \"{}\",\n  \"probabilities\": [{}]\n}}\n",
            serde_json::to_string(&self.name).expect("strings serialize"),
            self.n_users(),
            self.memory_slots(),
            self.kind().name(),
            probs.join(", ")
        )
    }

    pub fn from_json(text: &str) -> Result<Protocol> {
        let doc: ProtocolDocument = serde_json::from_str(text)?;
        let kind: FeedbackKind = doc.feedback_kind.parse()?;
        let config = SystemConfig::new(doc.n_users, doc.memory_slots)?;
        Protocol::from_vector(doc.name, config, kind, doc.probabilities)
    }
}

#[derive(Debug, Deserialize)]
struct ProtocolDocument {
    name: String,
    n_users: usize,
    memory_slots: usize,
    feedback_kind: String,
    probabilities: Vec<f64>,
}
