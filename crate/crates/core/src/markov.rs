//! Dense finite Markov chain utilities shared by the reduced and general
//! chain analyzers.

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};

pub const ROW_SUM_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Largest deviation of a row sum from one.
pub fn max_row_defect(q: &DMatrix<f64>) -> f64 {
    q.row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Closed communicating classes of the support graph, each sorted.
pub fn closed_classes(q: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = q.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * 4);
    let nodes: Vec<NodeIndex> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if q[(i, j)] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut component = vec![0usize; n];
    let sccs = tarjan_scc(&graph);
    for (c, members) in sccs.iter().enumerate() {
        for node in members {
            component[node.index()] = c;
        }
    }
    let mut closed: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members.iter().all(|node| {
                let i = node.index();
                (0..n).all(|j| q[(i, j)] <= 0.0 || component[j] == *c)
            })
        })
        .map(|(_, members)| {
            let mut v: Vec<usize> = members.iter().map(|n| n.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    closed.sort();
    closed
}

/// Stationary distribution of a chain with exactly one closed class.
///
/// The closed class is solved by Grassmann-Taksar-Heyman state reduction,
/// which never subtracts and keeps every entry accurate relative to its own
/// size. States outside the closed class get exactly zero.
pub fn stationary_distribution(q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let classes = closed_classes(q);
    if classes.len() != 1 {
        return Err(Error::ReducibleChain {
            closed_classes: classes.len(),
            example_class: classes.into_iter().next().unwrap_or_default(),
        });
    }
    let class = &classes[0];
    let pi = solve_irreducible(&submatrix(q, class))?;
    let mut v = vec![0.0; q.nrows()];
    for (&s, p) in class.iter().zip(pi) {
        v[s] = p;
    }
    check_residual(q, &v)?;
    Ok(v)
}

/// Long-run average of `v0 Q^t`, valid for any number of closed classes.
pub fn cesaro_limit(q: &DMatrix<f64>, initial: &[f64]) -> Result<Vec<f64>> {
    let n = q.nrows();
    let classes = closed_classes(q);
    let mut in_closed = vec![false; n];
    for c in &classes {
        for &s in c {
            in_closed[s] = true;
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&s| !in_closed[s]).collect();
    let mut v = vec![0.0; n];
    for class in &classes {
        let pi = solve_irreducible(&submatrix(q, class))?;
        let mut weight: f64 = class.iter().map(|&s| initial[s]).sum();
        if !transient.is_empty() {
            let entry: Vec<f64> = transient
                .iter()
                .map(|&t| class.iter().map(|&c| q[(t, c)]).sum())
                .collect();
            let absorb = solve_transient(q, &transient, &entry)?;
            weight += transient.iter().zip(&absorb).map(|(&t, h)| initial[t] * h).sum::<f64>();
        }
        for (&s, p) in class.iter().zip(pi) {
            v[s] += weight * p;
        }
    }
    check_residual(q, &v)?;
    Ok(v)
}

fn submatrix(q: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| q[(idx[i], idx[j])])
}

fn solve_irreducible(q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = q.nrows();
    let mut p = q.clone();
    for k in (1..n).rev() {
        let out: f64 = (0..k).map(|j| p[(k, j)]).sum();
        if !(out > 0.0) {
            return Err(Error::Numerical("state reduction hit a zero pivot".into()));
        }
        for i in 0..k {
            p[(i, k)] /= out;
        }
        for i in 0..k {
            let w = p[(i, k)];
            if w != 0.0 {
                for j in 0..k {
                    p[(i, j)] += w * p[(k, j)];
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for j in 1..n {
        pi[j] = (0..j).map(|i| pi[i] * p[(i, j)]).sum();
    }
    let total: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|x| x / total).collect())
}

fn check_residual(q: &DMatrix<f64>, v: &[f64]) -> Result<()> {
    let n = q.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        let s: f64 = (0..n).map(|i| v[i] * q[(i, j)]).sum();
        worst = worst.max((s - v[j]).abs());
    }
    if !(worst < RESIDUAL_TOL) || v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Numerical(format!("stationary residual {worst:e}")));
    }
    Ok(())
}

/// Solves `x = b + Q_SS x` over a state subset `S` from which the chain
/// leaves `S` almost surely.
///
/// Gaussian elimination in the subtraction-free form: every pivot is
/// rebuilt as exit mass plus remaining off-diagonal mass.
pub fn solve_transient(q: &DMatrix<f64>, set: &[usize], b: &[f64]) -> Result<Vec<f64>> {
    let m = set.len();
    let mut inside = vec![usize::MAX; q.nrows()];
    for (pos, &s) in set.iter().enumerate() {
        inside[s] = pos;
    }
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut exit = vec![0.0; m];
    for (i, &s) in set.iter().enumerate() {
        for j in 0..q.ncols() {
            let p = q[(s, j)];
            if p == 0.0 {
                continue;
            }
            match inside[j] {
                usize::MAX => exit[i] += p,
                pos if pos != i => a[(i, pos)] = p,
                _ => {}
            }
        }
    }
    let mut rhs = b.to_vec();
    let mut pivot = vec![0.0; m];
    for k in 0..m {
        let diag = exit[k] + ((k + 1)..m).map(|j| a[(k, j)]).sum::<f64>();
        if !(diag > 0.0) {
            return Err(Error::Numerical("transient system is singular".into()));
        }
        pivot[k] = diag;
        for i in (k + 1)..m {
            let w = a[(i, k)];
            if w == 0.0 {
                continue;
            }
            let r = w / diag;
            for j in (k + 1)..m {
                if j != i {
                    a[(i, j)] += r * a[(k, j)];
                }
            }
            exit[i] += r * exit[k];
            rhs[i] += r * rhs[k];
        }
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let s: f64 = ((k + 1)..m).map(|j| a[(k, j)] * x[j]).sum();
        x[k] = (rhs[k] + s) / pivot[k];
    }
    Ok(x)
}

/// Expected accumulated cost until the chain next enters a target state.
///
/// Solves `d = b + Q0 d` where `Q0` is `Q` with transitions into targets
/// removed. States from which a target is not reached almost surely get
/// `f64::INFINITY`; the rest are solved exactly on the finite set.
pub fn first_passage(q: &DMatrix<f64>, targets: &[bool], cost: &[f64]) -> Result<Vec<f64>> {
    let n = q.nrows();
    let preds: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&i| q[(i, j)] > 0.0).collect())
        .collect();

    // States with a path of length >= 1 into a target.
    let mut reaches = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&s| targets[s]).collect();
    while let Some(u) = stack.pop() {
        for &p in &preds[u] {
            if !reaches[p] {
                reaches[p] = true;
                if !targets[p] {
                    stack.push(p);
                }
            }
        }
    }

    // States that can wander into a dead end before hitting a target.
    let mut infinite: Vec<bool> = reaches.iter().map(|r| !r).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&s| infinite[s] && !targets[s]).collect();
    while let Some(u) = stack.pop() {
        for &p in &preds[u] {
            if !infinite[p] {
                infinite[p] = true;
                if !targets[p] {
                    stack.push(p);
                }
            }
        }
    }

    let mut d = vec![f64::INFINITY; n];
    let open: Vec<usize> = (0..n).filter(|&s| !infinite[s] && !targets[s]).collect();
    let b: Vec<f64> = open.iter().map(|&s| cost[s]).collect();
    let x = solve_transient(q, &open, &b)?;
    for (&s, val) in open.iter().zip(x) {
        d[s] = val;
    }
    for t in (0..n).filter(|&s| targets[s] && !infinite[s]) {
        d[t] = cost[t] + open.iter().map(|&j| q[(t, j)] * d[j]).sum::<f64>();
    }
    Ok(d)
}
