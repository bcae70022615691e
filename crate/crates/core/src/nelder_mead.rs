//! Box-constrained Nelder-Mead.
//!
//! Trial points are projected onto the box before evaluation, so the
//! simplex never leaves the feasible region.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Stop when the spread of simplex values falls below
    /// `tolerance * max(1, |f_best|)`.
    pub tolerance: f64,
    pub max_evals: usize,
    /// Edge length of the initial simplex, relative to the box width.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { tolerance: 1e-8, max_evals: 4000, initial_step: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
}

fn project(x: &mut [f64], lower: f64, upper: f64) {
    for v in x {
        *v = v.clamp(lower, upper);
    }
}

pub fn minimize<F>(mut f: F, start: &[f64], lower: f64, upper: f64, options: NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut x0 = start.to_vec();
    project(&mut x0, lower, upper);
    let step = options.initial_step * (upper - lower);
    let mut simplex: Vec<Vec<f64>> = vec![x0.clone()];
    for i in 0..dim {
        let mut v = x0.clone();
        // Step away from the nearer bound so the vertex stays distinct.
        v[i] = if v[i] + step <= upper { v[i] + step } else { v[i] - step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();

    while evals < options.max_evals {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[dim];
        let spread = if worst.is_finite() { worst - best } else { f64::INFINITY };
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= options.tolerance * best.abs().max(1.0) || size <= 1e-12 {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut p, lower, upper);
            p
        };

        let reflected = along(1.0);
        let fr = eval(&reflected, &mut evals);
        if fr < values[0] {
            let expanded = along(2.0);
            let fe = eval(&expanded, &mut evals);
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[dim] {
            let c = along(0.5);
            let v = eval(&c, &mut evals);
            (c, v)
        } else {
            let c = along(-0.5);
            let v = eval(&c, &mut evals);
            (c, v)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = contracted;
            values[dim] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        let best_x = simplex[0].clone();
        for i in 1..=dim {
            for (x, b) in simplex[i].iter_mut().zip(&best_x) {
                *x = b + 0.5 * (*x - b);
            }
            values[i] = eval(&simplex[i], &mut evals);
        }
    }

    let (i, value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("simplex is nonempty");
    Minimum { x: simplex[i].clone(), value }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_quadratic_minimum() {
        let target = [0.3, 0.7, 0.5];
        let m = minimize(
            |x| x.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum(),
            &[0.9, 0.1, 0.1],
            0.0,
            1.0,
            NelderMeadOptions { tolerance: 1e-14, max_evals: 20_000, initial_step: 0.1 },
        );
        for (x, t) in m.x.iter().zip(target) {
            assert!((x - t).abs() < 1e-5, "{x} vs {t}");
        }
    }

    #[test]
    fn respects_the_box() {
        let m = minimize(|x| x[0] + x[1], &[0.5, 0.5], 0.1, 0.9, NelderMeadOptions::default());
        assert!(m.x.iter().all(|v| (0.1..=0.9).contains(v)));
        assert!((m.value - 0.2).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let m = minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            -5.0,
            5.0,
            NelderMeadOptions { tolerance: 1e-16, max_evals: 10_000, initial_step: 0.02 },
        );
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }
}
