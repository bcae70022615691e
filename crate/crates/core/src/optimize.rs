//! Delay-efficient 1-slot protocols: minimum average delay at a given
//! total throughput, found with a quadratic penalty and Nelder-Mead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::metrics_reduced;
use crate::error::{Error, Result};
use crate::model::{Action, FeedbackKind, FeedbackTechnology, HistorySpace, Protocol, SystemConfig};
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::protocols;
use crate::wlan::{wlan_metrics, WlanTiming};

pub const LOWER: f64 = 1e-4;
pub const UPPER: f64 = 1.0 - 1e-4;
/// Largest `|tau - target|` of a converged point.
pub const CONSTRAINT_TOL: f64 = 1e-4;
/// Points whose residual exceeds this are reported as failures.
pub const FEASIBILITY_TOL: f64 = 1e-3;

/// What throughput and delay mean while optimizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Slotted,
    Wlan(WlanTiming),
}

impl Model {
    /// `(total throughput, average delay)` of a 1-slot protocol.
    pub fn evaluate(&self, protocol: &Protocol) -> Result<(f64, f64)> {
        match self {
            Model::Slotted => {
                let m = metrics_reduced(protocol)?;
                Ok((m.total_throughput, m.average_delay))
            }
            Model::Wlan(timing) => {
                let m = wlan_metrics(protocol, timing)?;
                Ok((m.throughput, m.average_delay))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub model: Model,
    pub seed: u64,
    pub max_rounds: usize,
    /// Nelder-Mead runs per penalty round; each later run restarts from
    /// the best vertex with a jittered simplex.
    pub restarts: usize,
    pub max_evals: usize,
    /// Also start from the structured protocol, a jittered copy of the
    /// initial vector and the box midpoint.
    pub multi_start: bool,
    /// First-round penalty weight relative to the starting delay.
    pub penalty_scale: f64,
    /// Edge of the first simplex of every round.
    pub initial_step: f64,
    /// Upper end of the random restart simplex edge.
    pub restart_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { model: Model::Slotted, seed: 0, max_rounds: 8, restarts: 3, max_evals: 3000, multi_start: true, penalty_scale: 1e4, initial_step: 0.05, restart_step: 0.03 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub target_tau: f64,
    pub achieved_tau: f64,
    pub delay: f64,
    pub protocol_vector: Vec<f64>,
    pub converged: bool,
    pub constraint_residual: f64,
}

impl BoundaryPoint {
    pub fn protocol(&self, kind: FeedbackKind, n_users: usize) -> Result<Protocol> {
        protocols::one_slot(self.protocol_vector.clone(), kind, n_users)
            .map(|p| p.renamed(format!("boundary:{}", self.target_tau)))
    }
}

/// Evaluates 1-slot protocols over a fixed history space.
struct Evaluator {
    space: HistorySpace,
    model: Model,
}

impl Evaluator {
    fn new(kind: FeedbackKind, n_users: usize, model: Model) -> Result<Self> {
        let config = SystemConfig::new(n_users, 1)?;
        let space = HistorySpace::new(config, FeedbackTechnology::new(kind, n_users)?)?;
        Ok(Evaluator { space, model })
    }

    fn dim(&self) -> usize {
        self.space.len()
    }

    fn evaluate(&self, x: &[f64]) -> Option<(f64, f64)> {
        let protocol = Protocol::with_space("candidate", self.space.clone(), x.to_vec()).ok()?;
        self.model.evaluate(&protocol).ok().filter(|(t, d)| t.is_finite() && d.is_finite())
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    x: Vec<f64>,
    tau: f64,
    delay: f64,
}

impl Candidate {
    fn residual(&self, target: f64) -> f64 {
        (self.tau - target).abs()
    }
}

/// Feasible points beat infeasible ones; among feasible points the lower
/// delay wins, otherwise the smaller residual.
fn better(a: &Candidate, b: &Candidate, target: f64) -> bool {
    let (ra, rb) = (a.residual(target), b.residual(target));
    match (ra <= CONSTRAINT_TOL, rb <= CONSTRAINT_TOL) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.delay < b.delay,
        (false, false) => ra < rb,
    }
}

fn penalty_descent(
    eval: &Evaluator,
    target: f64,
    start: &[f64],
    options: &SolverOptions,
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let (tau0, d0) = eval.evaluate(start)?;
    let mut best = Candidate { x: start.to_vec(), tau: tau0, delay: d0 };
    let mut x = start.to_vec();
    let mut mu = options.penalty_scale * d0.max(1.0);
    for _ in 0..options.max_rounds {
        let objective = |p: &[f64]| match eval.evaluate(p) {
            Some((t, d)) => d + mu * (t - target).powi(2),
            None => f64::INFINITY,
        };
        let mut step = options.initial_step;
        let mut value = f64::INFINITY;
        for restart in 0..options.restarts.max(1) {
            let nm = NelderMeadOptions { tolerance: 1e-8, max_evals: options.max_evals, initial_step: step };
            let m = nelder_mead::minimize(objective, &x, LOWER, UPPER, nm);
            let improved = m.value < value - 1e-10 * value.abs();
            if m.value < value {
                x = m.x;
                value = m.value;
            }
            if restart > 0 && !improved {
                break;
            }
            step = options.restart_step * (0.33 + 0.67 * rng.random::<f64>());
        }
        let (tau, delay) = eval.evaluate(&x)?;
        let candidate = Candidate { x: x.clone(), tau, delay };
        if better(&candidate, &best, target) {
            best = candidate;
        }
        if best.residual(target) <= 0.1 * CONSTRAINT_TOL {
            break;
        }
        mu *= 10.0;
    }
    Some(best)
}

fn clip(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.clamp(LOWER, UPPER)).collect()
}

fn starting_points(init: &[f64], kind: FeedbackKind, n_users: usize, options: &SolverOptions) -> Result<Vec<Vec<f64>>> {
    let mut starts = vec![clip(init)];
    if options.multi_start {
        starts.push(clip(protocols::structured_start(kind, n_users)?.probabilities()));
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x5eed_0001);
        starts.push(clip(&init.iter().map(|v| v + 0.1 * (rng.random::<f64>() - 0.5)).collect::<Vec<_>>()));
        starts.push(vec![0.5; init.len()]);
    }
    Ok(starts)
}

/// Minimize the average delay subject to `tau(f) = target_tau` over the
/// box `[1e-4, 1 - 1e-4]^dim`.
pub fn solve_at_tau(
    target_tau: f64,
    init: &[f64],
    kind: FeedbackKind,
    n_users: usize,
    options: &SolverOptions,
) -> Result<BoundaryPoint> {
    if !(target_tau > 0.0 && target_tau < 1.0) {
        return Err(Error::InvalidParameter(format!("target throughput {target_tau} outside (0, 1)")));
    }
    let eval = Evaluator::new(kind, n_users, options.model)?;
    if init.len() != eval.dim() {
        return Err(Error::Shape { expected: eval.dim(), found: init.len() });
    }
    let starts = starting_points(init, kind, n_users, options)?;
    let results: Vec<Option<Candidate>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, start)| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(i as u64);
            penalty_descent(&eval, target_tau, start, options, &mut rng)
        })
        .collect();
    let mut best: Option<Candidate> = None;
    for c in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| better(&c, b, target_tau)) {
            best = Some(c);
        }
    }
    let best = best.ok_or_else(|| Error::Numerical("no starting point could be evaluated".into()))?;
    let residual = best.residual(target_tau);
    Ok(BoundaryPoint {
        target_tau,
        achieved_tau: best.tau,
        delay: best.delay,
        protocol_vector: best.x,
        converged: residual <= CONSTRAINT_TOL,
        constraint_residual: residual,
    })
}

/// The grid `0.99, 0.98, ..., 0.01`.
pub fn default_grid() -> Vec<f64> {
    descending_grid(0.01, 0.99, 0.01)
}

/// Grid from `hi` down to `lo` in steps of `step`, rounded to the step.
pub fn descending_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step).round() as i64;
    (0..=count).map(|i| ((hi - i as f64 * step) / step).round() * step).collect()
}

/// Solve along a strictly decreasing grid, warm-starting each point from
/// the previous solution. A second pass runs back up the grid, re-solving
/// each point from its lower neighbour and keeping whichever is better, so
/// a branch that only appears at low throughput still propagates.
pub fn boundary_sweep(
    tau_grid: &[f64],
    kind: FeedbackKind,
    n_users: usize,
    options: &SolverOptions,
) -> Result<Vec<BoundaryPoint>> {
    sweep_with_seeds(tau_grid, kind, n_users, options, &[])
}

/// Like [`boundary_sweep`], with `seeds[i]` tried as an extra start at grid
/// point `i`. Missing entries are skipped.
pub fn sweep_with_seeds(
    tau_grid: &[f64],
    kind: FeedbackKind,
    n_users: usize,
    options: &SolverOptions,
    seeds: &[Option<Vec<f64>>],
) -> Result<Vec<BoundaryPoint>> {
    if tau_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("throughput grid must be strictly decreasing".into()));
    }
    let single = SolverOptions { multi_start: false, ..*options };
    let mut init = protocols::structured_start(kind, n_users)?.probabilities().to_vec();
    let mut points: Vec<BoundaryPoint> = Vec::with_capacity(tau_grid.len());
    for (i, &target) in tau_grid.iter().enumerate() {
        let point_options = SolverOptions { seed: options.seed.wrapping_add(i as u64), ..*options };
        let mut point = solve_at_tau(target, &init, kind, n_users, &point_options)?;
        if let Some(Some(seed)) = seeds.get(i) {
            let seeded = solve_at_tau(target, seed, kind, n_users, &SolverOptions { seed: point_options.seed, ..single })?;
            if improves(&seeded, &point) {
                point = seeded;
            }
        }
        init = point.protocol_vector.clone();
        points.push(point);
    }
    for i in (0..points.len().saturating_sub(1)).rev() {
        let start = points[i + 1].protocol_vector.clone();
        let repair_options = SolverOptions { seed: options.seed.wrapping_add((points.len() + i) as u64), ..single };
        let candidate = solve_at_tau(tau_grid[i], &start, kind, n_users, &repair_options)?;
        if improves(&candidate, &points[i]) {
            points[i] = candidate;
        }
    }
    Ok(points)
}

/// Boundary points at arbitrary throughputs, returned in input order. The
/// targets are swept from highest to lowest with continuation; duplicates
/// share one solve.
pub fn boundary_at(taus: &[f64], kind: FeedbackKind, n_users: usize, options: &SolverOptions) -> Result<Vec<BoundaryPoint>> {
    let mut grid = taus.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    let points = boundary_sweep(&grid, kind, n_users, options)?;
    Ok(taus
        .iter()
        .map(|t| points[grid.iter().position(|g| g == t).expect("every target is on the grid")].clone())
        .collect())
}

/// Map a 1-slot protocol onto a finer feedback technology. Every fine
/// history lies inside one coarse history, whose probability it copies, so
/// both protocols behave identically.
pub fn embed_one_slot(x: &[f64], coarse: FeedbackKind, fine: FeedbackKind, n_users: usize) -> Result<Vec<f64>> {
    let config = SystemConfig::new(n_users, 1)?;
    let coarse_space = HistorySpace::new(config, FeedbackTechnology::new(coarse, n_users)?)?;
    let fine_space = HistorySpace::new(config, FeedbackTechnology::new(fine, n_users)?)?;
    if x.len() != coarse_space.len() {
        return Err(Error::Shape { expected: coarse_space.len(), found: x.len() });
    }
    let mut out: Vec<Option<f64>> = vec![None; fine_space.len()];
    for action in [Action::Wait, Action::Transmit] {
        for k in 0..=n_users {
            let (Ok(f), Ok(c)) = (fine_space.pair_index(action, k), coarse_space.pair_index(action, k)) else {
                continue;
            };
            match out[f] {
                Some(v) if v != x[c] => {
                    return Err(Error::InvalidParameter(format!("{fine} feedback does not refine {coarse}")));
                }
                _ => out[f] = Some(x[c]),
            }
        }
    }
    Ok(out.into_iter().map(|v| v.unwrap_or(0.5)).collect())
}

/// Boundaries for several feedback technologies on one grid. Kinds are
/// solved coarsest first, and each point of a finer kind also starts from
/// the best embedded solution of any coarser kind already solved, so a
/// more informative technology never ends up on a worse local branch.
pub fn family_sweeps(
    tau_grid: &[f64],
    kinds: &[FeedbackKind],
    n_users: usize,
    options: &SolverOptions,
) -> Result<Vec<(FeedbackKind, Vec<BoundaryPoint>)>> {
    let mut order = kinds.to_vec();
    order.sort_by_key(|k| FeedbackKind::ALL.iter().position(|a| a == k));
    let mut solved: Vec<(FeedbackKind, Vec<BoundaryPoint>)> = Vec::new();
    for &kind in &order {
        let fine = FeedbackTechnology::new(kind, n_users)?;
        let mut coarser = Vec::new();
        for (k, points) in &solved {
            if fine.refines(&FeedbackTechnology::new(*k, n_users)?) {
                coarser.push((*k, points));
            }
        }
        let seeds = (0..tau_grid.len())
            .map(|i| {
                let best = coarser
                    .iter()
                    .map(|(k, pts)| (*k, &pts[i]))
                    .filter(|(_, p)| p.converged)
                    .min_by(|a, b| a.1.delay.total_cmp(&b.1.delay));
                best.map(|(k, p)| embed_one_slot(&p.protocol_vector, k, kind, n_users)).transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        let points = sweep_with_seeds(tau_grid, kind, n_users, options, &seeds)?;
        solved.push((kind, points));
    }
    Ok(kinds.iter().map(|k| solved.iter().find(|(s, _)| s == k).expect("every kind was solved").clone()).collect())
}

fn improves(a: &BoundaryPoint, b: &BoundaryPoint) -> bool {
    match (a.converged, b.converged) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.delay < b.delay,
        (false, false) => a.constraint_residual < b.constraint_residual,
    }
}

/// One uniformly random protocol from the cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CloudSample {
    pub tau: f64,
    /// Infinite when the sampled chain is reducible or never succeeds.
    pub delay: f64,
    pub seed_index: usize,
}

/// Analyze `count` protocols drawn uniformly from the box. Sample `i` uses
/// stream `i` of the seed, so results do not depend on thread count.
pub fn random_protocol_cloud(count: usize, seed: u64, kind: FeedbackKind, n_users: usize, model: Model) -> Result<Vec<CloudSample>> {
    if count == 0 {
        return Err(Error::InvalidParameter("cloud needs at least one sample".into()));
    }
    let eval = Evaluator::new(kind, n_users, model)?;
    let dim = eval.dim();
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(LOWER..=UPPER)).collect();
            match eval.evaluate(&x) {
                Some((tau, delay)) => CloudSample { tau, delay, seed_index: i },
                None => CloudSample { tau: 0.0, delay: f64::INFINITY, seed_index: i },
            }
        })
        .collect())
}

/// Boundary delay at the grid point nearest to `tau`, if any converged
/// point lies within `max_gap`.
pub fn boundary_delay_near(points: &[BoundaryPoint], tau: f64, max_gap: f64) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.converged && (p.achieved_tau - tau).abs() <= max_gap)
        .min_by(|a, b| (a.achieved_tau - tau).abs().total_cmp(&(b.achieved_tau - tau).abs()))
        .map(|p| p.delay)
}

/// A cloud sample that beats the boundary even after the boundary is
/// re-solved at the sample's own throughput.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudViolation {
    pub sample: CloudSample,
    pub boundary_delay: f64,
}

/// Samples lying more than `tolerance` slots below the boundary. Samples
/// are screened against the nearest grid point; any that fail are checked
/// again against a fresh solve at exactly their throughput, warm-started
/// from the bracketing boundary points, since on steep stretches of the
/// curve the nearest grid point is a poor stand-in.
pub fn cloud_violations(
    samples: &[CloudSample],
    boundary: &[BoundaryPoint],
    kind: FeedbackKind,
    n_users: usize,
    options: &SolverOptions,
    tolerance: f64,
) -> Result<Vec<CloudViolation>> {
    let suspects: Vec<&CloudSample> = samples
        .iter()
        .filter(|s| s.delay.is_finite())
        .filter(|s| boundary_delay_near(boundary, s.tau, 0.005).is_some_and(|d| s.delay < d - tolerance))
        .collect();
    let single = SolverOptions { multi_start: false, ..*options };
    let checked: Vec<Result<Option<CloudViolation>>> = suspects
        .par_iter()
        .map(|s| {
            let mut near: Vec<&BoundaryPoint> = boundary.iter().filter(|p| p.converged).collect();
            near.sort_by(|a, b| (a.achieved_tau - s.tau).abs().total_cmp(&(b.achieved_tau - s.tau).abs()));
            let mut best = f64::INFINITY;
            for p in near.iter().take(2) {
                let opts = SolverOptions { seed: options.seed.wrapping_add(s.seed_index as u64), ..single };
                let point = solve_at_tau(s.tau, &p.protocol_vector, kind, n_users, &opts)?;
                if point.converged {
                    best = best.min(point.delay);
                }
            }
            Ok((s.delay < best - tolerance).then_some(CloudViolation { sample: **s, boundary_delay: best }))
        })
        .collect();
    checked.into_iter().filter_map(Result::transpose).collect()
}

/// The example designer utility: a 0.1 gain in throughput is worth 20
/// slots of delay, and whichever shortfall is worse counts.
pub fn default_utility(tau: f64, delay: f64) -> f64 {
    -(200.0 * (1.0 - tau)).max(delay)
}

/// A boundary computed for one memory length and feedback technology,
/// together with the designer's cost of deploying it.
#[derive(Debug, Clone)]
pub struct DesignOption {
    pub memory_slots: usize,
    pub kind: FeedbackKind,
    pub cost: f64,
    pub boundary: Vec<BoundaryPoint>,
}

#[derive(Debug, Clone)]
pub struct Design {
    pub option: usize,
    pub point: BoundaryPoint,
    pub net_utility: f64,
}

/// Best converged point over all options by `utility(tau, D) - cost`.
pub fn best_design<U>(options: &[DesignOption], utility: U) -> Option<Design>
where
    U: Fn(f64, f64) -> f64,
{
    let mut best: Option<Design> = None;
    for (i, option) in options.iter().enumerate() {
        for point in option.boundary.iter().filter(|p| p.converged) {
            let net = utility(point.achieved_tau, point.delay) - option.cost;
            if best.as_ref().is_none_or(|b| net > b.net_utility) {
                best = Some(Design { option: i, point: point.clone(), net_utility: net });
            }
        }
    }
    best
}

/// Maximizer of [`default_utility`] on the continuous boundary: the
/// throughput where `D*(tau) = 200 (1 - tau)`, found by bisection between
/// two bracketing throughputs, each solve warm-started from the last.
pub fn default_utility_optimum(
    lo: f64,
    hi: f64,
    init: &[f64],
    kind: FeedbackKind,
    n_users: usize,
    options: &SolverOptions,
) -> Result<BoundaryPoint> {
    let gap = |p: &BoundaryPoint| p.delay - 200.0 * (1.0 - p.target_tau);
    let mut low = solve_at_tau(lo, init, kind, n_users, options)?;
    let mut high = solve_at_tau(hi, &low.protocol_vector, kind, n_users, options)?;
    if !(gap(&low) < 0.0 && gap(&high) > 0.0) {
        return Err(Error::Numerical(format!("utility balance is not bracketed by [{lo}, {hi}]")));
    }
    while high.target_tau - low.target_tau > 1e-5 {
        let mid = 0.5 * (low.target_tau + high.target_tau);
        let point = solve_at_tau(mid, &low.protocol_vector, kind, n_users, options)?;
        if gap(&point) < 0.0 {
            low = point;
        } else {
            high = point;
        }
    }
    Ok(if gap(&low).abs() <= gap(&high).abs() { low } else { high })
}

#[derive(Debug, Serialize)]
struct CloudRow {
    tau: f64,
    delay: f64,
    seed_index: usize,
}

/// Boundary CSV with one probability column per history, named like
/// `f_W0` or `f_Te`.
pub fn write_boundary_csv<W: std::io::Write>(
    out: W,
    points: &[BoundaryPoint],
    kind: FeedbackKind,
    n_users: usize,
) -> Result<()> {
    let space = HistorySpace::new(SystemConfig::new(n_users, 1)?, FeedbackTechnology::new(kind, n_users)?)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["target_tau".to_string(), "achieved_tau".into(), "delay".into(), "converged".into()];
    header.extend(space.pairs().iter().map(|p| format!("f_{}{}", p.action.symbol(), p.feedback.label())));
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![
            p.target_tau.to_string(),
            p.achieved_tau.to_string(),
            p.delay.to_string(),
            p.converged.to_string(),
        ];
        row.extend(p.protocol_vector.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cloud_csv<W: std::io::Write>(out: W, samples: &[CloudSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(CloudRow { tau: s.tau, delay: s.delay, seed_index: s.seed_index })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cold_start() -> Vec<f64> {
        vec![0.2, LOWER, 1.0 / 3.0, UPPER, LOWER]
    }

    #[test]
    fn high_throughput_structure() {
        let p = solve_at_tau(0.99, &cold_start(), FeedbackKind::Ternary, 5, &SolverOptions::default()).unwrap();
        assert!(p.converged, "{p:?}");
        let f = &p.protocol_vector;
        assert!(f[3] >= 0.999 && f[4] <= 0.01 && f[1] <= 0.01, "{f:?}");
        assert!((0.15..=0.25).contains(&f[0]) && (0.28..=0.40).contains(&f[2]), "{f:?}");
    }

    #[test]
    fn utility_optimum_is_the_fo_preset() {
        let o = SolverOptions::default();
        let u = default_utility_optimum(0.78, 0.80, &cold_start(), FeedbackKind::Ternary, 5, &o).unwrap();
        let fo = protocols::f_optimal();
        for (a, b) in u.protocol_vector.iter().zip(fo.probabilities()) {
            assert!((a - b).abs() < 2e-3, "{:?}", u.protocol_vector);
        }
        assert!((u.achieved_tau - 0.792).abs() < 1e-3 && (u.delay - 41.59).abs() < 0.05, "{u:?}");
    }

    #[test]
    fn solution_is_feasible_when_reanalyzed() {
        let p = solve_at_tau(0.6, &cold_start(), FeedbackKind::Ternary, 5, &SolverOptions::default()).unwrap();
        assert!(p.converged);
        let m = metrics_reduced(&p.protocol(FeedbackKind::Ternary, 5).unwrap()).unwrap();
        assert!((m.total_throughput - 0.6).abs() <= CONSTRAINT_TOL);
        assert_eq!(m.average_delay, p.delay);
        assert!(p.protocol_vector.iter().all(|v| (LOWER..=UPPER).contains(v)));
    }

    #[test]
    fn deterministic() {
        let opts = SolverOptions { seed: 7, ..SolverOptions::default() };
        let a = solve_at_tau(0.7, &cold_start(), FeedbackKind::Ternary, 4, &opts).unwrap();
        let b = solve_at_tau(0.7, &cold_start(), FeedbackKind::Ternary, 4, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn input_validation() {
        let o = SolverOptions::default();
        assert!(solve_at_tau(1.0, &cold_start(), FeedbackKind::Ternary, 5, &o).is_err());
        assert!(matches!(
            solve_at_tau(0.5, &[0.5; 3], FeedbackKind::Ternary, 5, &o),
            Err(Error::Shape { expected: 5, found: 3 })
        ));
        assert!(boundary_sweep(&[0.2, 0.3], FeedbackKind::Ternary, 5, &o).is_err());
        assert_eq!(boundary_sweep(&[0.5], FeedbackKind::Ternary, 5, &o).unwrap().len(), 1);
    }

    #[test]
    fn grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 99);
        assert_eq!(g[0], 0.99);
        assert_eq!(*g.last().unwrap(), 0.01);
    }

    #[test]
    fn cloud_is_reproducible() {
        let a = random_protocol_cloud(16, 3, FeedbackKind::Ternary, 5, Model::Slotted).unwrap();
        let b = random_protocol_cloud(16, 3, FeedbackKind::Ternary, 5, Model::Slotted).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, s)| s.seed_index == i && s.tau > 0.0));
        let one = random_protocol_cloud(1, 3, FeedbackKind::Ternary, 5, Model::Slotted).unwrap();
        assert_eq!(one[0], a[0]);
    }

    #[test]
    fn design_selection_subtracts_cost() {
        let point = |tau: f64, delay: f64| BoundaryPoint {
            target_tau: tau,
            achieved_tau: tau,
            delay,
            protocol_vector: vec![],
            converged: true,
            constraint_residual: 0.0,
        };
        let cheap = DesignOption { memory_slots: 0, kind: FeedbackKind::None, cost: 0.0, boundary: vec![point(0.4, 12.0)] };
        let rich = DesignOption { memory_slots: 1, kind: FeedbackKind::Ternary, cost: 5.0, boundary: vec![point(0.8, 40.0)] };
        let best = best_design(&[cheap.clone(), rich.clone()], default_utility).unwrap();
        assert_eq!(best.option, 1);
        assert_eq!(best.net_utility, -45.0);
        let costly = DesignOption { cost: 100.0, ..rich };
        assert_eq!(best_design(&[cheap, costly], default_utility).unwrap().option, 0);
    }

    #[test]
    fn csv_layout() {
        let points = boundary_sweep(&[0.5], FeedbackKind::Ternary, 5, &SolverOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_boundary_csv(&mut buf, &points, FeedbackKind::Ternary, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("target_tau,achieved_tau,delay,converged,f_W0,f_W1,f_We,f_T1,f_Te"));
        assert_eq!(header.split(',').count(), 9);
    }
}
