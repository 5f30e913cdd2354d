//! Derivative-free local search: a budget-bounded simplex descent.
//!
//! The contract is "monotone nonincreasing best value, deterministic for a
//! fixed starting point", not any particular convergence theory.

/// Budget and geometry for [`simplex_descent`].
#[derive(Debug, Clone, Copy)]
pub struct SimplexConfig {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Initial displacement per coordinate when building the simplex.
    pub init_step: f64,
    /// Stop when the simplex value spread falls below this.
    pub tol: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        SimplexConfig {
            max_evals: 400,
            init_step: 0.25,
            tol: 1e-9,
        }
    }
}

/// Nelder–Mead style descent from `x0`. Returns the best point seen and its
/// value; never returns anything worse than `f(x0)`.
pub fn simplex_descent(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    cfg: &SimplexConfig,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut xi = x0.to_vec();
        xi[i] += cfg.init_step;
        let vi = eval(&xi, &mut evals);
        simplex.push((xi, vi));
    }

    while evals < cfg.max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() < cfg.tol {
            break;
        }
        // centroid of all but the worst
        let mut c = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for i in 0..n {
                c[i] += x[i] / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let second = simplex[n - 1].1;
        let best = simplex[0].1;

        let point = |t: f64| -> Vec<f64> {
            (0..n).map(|i| c[i] + t * (worst.0[i] - c[i])).collect()
        };

        let xr = point(-1.0);
        let vr = eval(&xr, &mut evals);
        if vr < best {
            let xe = point(-2.0);
            let ve = eval(&xe, &mut evals);
            simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
        } else if vr < second {
            simplex[n] = (xr, vr);
        } else {
            let (xc, vc) = if vr < worst.1 {
                let xc = point(-0.5);
                let vc = eval(&xc, &mut evals);
                (xc, vc)
            } else {
                let xc = point(0.5);
                let vc = eval(&xc, &mut evals);
                (xc, vc)
            };
            if vc < worst.1.min(vr) {
                simplex[n] = (xc, vc);
            } else {
                // shrink toward the best vertex
                let b = simplex[0].0.clone();
                for k in 1..=n {
                    for i in 0..n {
                        simplex[k].0[i] = b[i] + 0.5 * (simplex[k].0[i] - b[i]);
                    }
                    let x = simplex[k].0.clone();
                    simplex[k].1 = eval(&x, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, v) = simplex.swap_remove(0);
    if v <= v0 {
        (x, v)
    } else {
        (x0.to_vec(), v0)
    }
}
