//! Least-squares fitting helpers for convergence-order and volume-exponent
//! diagnostics.

/// Slope of the least-squares line through `(ln x_i, ln y_i)`.
///
/// Returns `None` when fewer than two points carry positive coordinates
/// (zero errors are common on exactly-reproduced identities and must be
/// excluded before fitting).
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    linear_slope(&pts)
}

/// Slope of the least-squares line through the given points.
pub fn linear_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_power_law() {
        let xs: Vec<f64> = (1..8).map(|k| 0.5f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.5)).collect();
        assert_abs_diff_eq!(fit_loglog_slope(&xs, &ys).unwrap(), 1.5, epsilon = 1e-10);
    }

    #[test]
    fn drops_zero_errors() {
        let xs = [0.5, 0.25, 0.125];
        let ys = [0.0, 0.0, 0.0];
        assert!(fit_loglog_slope(&xs, &ys).is_none());
    }

    #[test]
    fn too_few_points() {
        assert!(fit_loglog_slope(&[0.5], &[0.1]).is_none());
        assert!(linear_slope(&[]).is_none());
    }
}
