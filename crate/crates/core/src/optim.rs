//! Budgeted Nelder-Mead maximization in a box.

/// Result of one simplex search.
#[derive(Debug, Clone)]
pub struct SimplexRun {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Maximize `f` from `start` with per-coordinate initial steps `step`,
/// clamping every trial point into `bounds`. Stops when the spread of the
/// simplex values drops below `rel_tol · |best|` or after `budget` calls.
///
/// The sequence of evaluated points depends only on `f`, never on
/// `budget`, so a larger budget always extends a smaller one.
pub fn maximize(
    mut f: impl FnMut(&[f64]) -> f64,
    start: &[f64],
    step: &[f64],
    bounds: &[(f64, f64)],
    rel_tol: f64,
    budget: usize,
) -> SimplexRun {
    let dim = start.len();
    let clamp = |x: &mut Vec<f64>| {
        for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let mut x0 = start.to_vec();
    clamp(&mut x0);
    if budget == 0 {
        return SimplexRun {
            best_point: x0,
            best_value: f64::NEG_INFINITY,
            evaluations: 0,
            converged: false,
        };
    }
    let v0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), v0));
    for k in 0..dim {
        if evals >= budget {
            break;
        }
        let mut x = x0.clone();
        x[k] += step[k];
        if x[k] > bounds[k].1 {
            x[k] = x0[k] - step[k];
        }
        clamp(&mut x);
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let mut converged = dim == 0;
    while simplex.len() == dim + 1 && evals < budget && !converged {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if best.is_finite() && (best - worst).abs() <= rel_tol * best.abs() {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|s| s.0[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp(&mut x);
            x
        };
        let xr = along(1.0);
        let vr = eval(&xr, &mut evals);
        if vr > simplex[0].1 {
            if evals >= budget {
                simplex[dim] = (xr, vr);
                break;
            }
            let xe = along(2.0);
            let ve = eval(&xe, &mut evals);
            simplex[dim] = if ve > vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr > simplex[dim - 1].1 {
            simplex[dim] = (xr, vr);
            continue;
        }
        if evals >= budget {
            break;
        }
        let (xc, vc) = if vr > simplex[dim].1 {
            let x = along(0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if vc > simplex[dim].1.max(vr) {
            simplex[dim] = (xc, vc);
            continue;
        }
        // shrink toward the best vertex
        let anchor = simplex[0].0.clone();
        for s in simplex.iter_mut().skip(1) {
            if evals >= budget {
                break;
            }
            let mut x: Vec<f64> = anchor.iter().zip(&s.0).map(|(a, b)| a + 0.5 * (b - a)).collect();
            clamp(&mut x);
            let v = eval(&x, &mut evals);
            *s = (x, v);
        }
    }
    let best = simplex
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap_or((x0, v0));
    SimplexRun {
        best_point: best.0,
        best_value: best.1,
        evaluations: evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_maximum() {
        let f = |x: &[f64]| -(x[0] - 1.0).powi(2) - 3.0 * (x[1] + 0.5).powi(2) + 4.0;
        let run = maximize(f, &[0.0, 0.0], &[0.5, 0.5], &[(-5.0, 5.0), (-5.0, 5.0)], 1e-12, 2000);
        assert!((run.best_point[0] - 1.0).abs() < 1e-4);
        assert!((run.best_point[1] + 0.5).abs() < 1e-4);
        assert!(run.converged);
    }

    #[test]
    fn respects_bounds_and_budget() {
        let mut calls = 0;
        let run = maximize(
            |x: &[f64]| {
                calls += 1;
                x[0]
            },
            &[0.0],
            &[0.1],
            &[(0.0, 1.0)],
            1e-9,
            25,
        );
        assert!(run.evaluations <= 25);
        assert_eq!(calls, run.evaluations);
        assert!(run.best_point[0] <= 1.0);
        assert!(run.best_value > 0.5);
    }

    #[test]
    fn larger_budget_extends_smaller() {
        let f = |x: &[f64]| (3.0 * x[0]).sin() + (2.0 * x[1]).cos() * x[0];
        let bounds = [(-2.0, 2.0), (-2.0, 2.0)];
        let mut last = f64::NEG_INFINITY;
        for budget in [5, 10, 20, 40, 80] {
            let run = maximize(f, &[0.3, 0.1], &[0.4, 0.4], &bounds, 1e-10, budget);
            assert!(run.best_value >= last);
            last = run.best_value;
        }
    }
}
