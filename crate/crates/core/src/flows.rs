//! Flows of vector fields, approximate exponentials of commutators, and the
//! ball-box maps `E_{I,x}` / `Phi_{I,x}` with their Newton inversion.

use crate::ballbox::MultiIndex;
use crate::error::{Error, Result};
use crate::vf::{CommutatorBasis, VectorField, Word};
use crate::MAX_DIM;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

/// Fixed-order RK4 with Richardson step-halving: the step count doubles until
/// two successive endpoints differ by less than `tol`.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    /// Base step h0; the initial step count is `ceil(|t| / h0)`.
    pub base_step: f64,
    /// Richardson convergence tolerance.
    pub tol: f64,
    /// Hard cap on substeps before giving up.
    pub max_substeps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            base_step: 0.1,
            tol: 1e-10,
            max_substeps: 1 << 16,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorConfig {
            tol,
            ..Default::default()
        }
    }
}

/// One signed leg of a piecewise integral curve: flow the field with the given
/// (1-based) index for the signed duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub index: usize,
    pub duration: f64,
}

impl Serialize for Leg {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(2))?;
        seq.serialize_element(&self.index)?;
        seq.serialize_element(&self.duration)?;
        seq.end()
    }
}

/// A concatenation of generator legs starting at a point.
#[derive(Debug, Clone, Serialize)]
pub struct PathPlan {
    pub start: Vec<f64>,
    pub legs: Vec<Leg>,
}

impl PathPlan {
    pub fn total_variation(&self) -> f64 {
        self.legs.iter().map(|l| l.duration.abs()).sum()
    }

    /// Replay the plan through the integrator.
    pub fn replay(&self, generators: &[VectorField], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
        let n = self.start.len();
        let mut cur = [0.0; MAX_DIM];
        cur[..n].copy_from_slice(&self.start);
        let mut next = [0.0; MAX_DIM];
        for leg in &self.legs {
            flow_into(
                &generators[leg.index - 1],
                &cur[..n],
                leg.duration,
                cfg,
                &mut next[..n],
            )?;
            cur = next;
        }
        Ok(cur[..n].to_vec())
    }
}

#[inline]
fn rk4_fixed(field: &VectorField, x0: &[f64], t: f64, steps: usize, out: &mut [f64]) {
    let n = x0.len();
    let h = t / steps as f64;
    let mut y = [0.0; MAX_DIM];
    y[..n].copy_from_slice(x0);
    let mut k1 = [0.0; MAX_DIM];
    let mut k2 = [0.0; MAX_DIM];
    let mut k3 = [0.0; MAX_DIM];
    let mut k4 = [0.0; MAX_DIM];
    let mut tmp = [0.0; MAX_DIM];
    for _ in 0..steps {
        field.eval_into_raw(&y[..n], &mut k1[..n]);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        field.eval_into_raw(&tmp[..n], &mut k2[..n]);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        field.eval_into_raw(&tmp[..n], &mut k3[..n]);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        field.eval_into_raw(&tmp[..n], &mut k4[..n]);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    out[..n].copy_from_slice(&y[..n]);
}

/// Endpoint of the integral curve `e^{tZ}(x)`, written into `out`.
pub fn flow_into(
    field: &VectorField,
    x: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
    out: &mut [f64],
) -> Result<()> {
    let n = x.len();
    if t == 0.0 {
        out[..n].copy_from_slice(x);
        return Ok(());
    }
    let mut steps = ((t.abs() / cfg.base_step).ceil() as usize).max(1);
    let mut prev = [0.0; MAX_DIM];
    rk4_fixed(field, x, t, steps, &mut prev[..n]);
    loop {
        steps *= 2;
        if steps > cfg.max_substeps {
            return Err(Error::NoConvergence {
                tol: cfg.tol,
                max_substeps: cfg.max_substeps,
            });
        }
        let mut cur = [0.0; MAX_DIM];
        rk4_fixed(field, x, t, steps, &mut cur[..n]);
        let diff: f64 = (0..n).map(|i| (cur[i] - prev[i]).powi(2)).sum::<f64>().sqrt();
        if !diff.is_finite() {
            return Err(Error::NonFinite { point: x.to_vec() });
        }
        if diff < cfg.tol {
            if cur[..n].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { point: x.to_vec() });
            }
            out[..n].copy_from_slice(&cur[..n]);
            return Ok(());
        }
        prev = cur;
    }
}

/// Endpoint of the integral curve `e^{tZ}(x)`.
pub fn flow(field: &VectorField, x: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let mut out = [0.0; MAX_DIM];
    flow_into(field, x, t, cfg, &mut out[..x.len()])?;
    Ok(out[..x.len()].to_vec())
}

/// Flow together with the Jacobian of the flow map with respect to the start
/// point, obtained from the variational equation `J' = DZ(x(t)) J`.
pub fn flow_with_jacobian(
    field: &VectorField,
    x: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, nalgebra::DMatrix<f64>)> {
    let n = x.len();
    let jac_exprs = field.jacobian();
    // augmented state: n point coords followed by the n*n Jacobian, row-major
    let dim = n + n * n;
    let mut state = vec![0.0; dim];
    state[..n].copy_from_slice(x);
    for i in 0..n {
        state[n + i * n + i] = 1.0;
    }
    if t == 0.0 {
        return Ok((x.to_vec(), nalgebra::DMatrix::identity(n, n)));
    }

    let deriv = |s: &[f64], ds: &mut [f64]| {
        let (pt, jac) = s.split_at(n);
        field.eval_into_raw(pt, &mut ds[..n]);
        let mut dz = [0.0; MAX_DIM * MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                dz[i * n + j] = jac_exprs[i][j].eval_raw(pt);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += dz[i * n + k] * jac[k * n + j];
                }
                ds[n + i * n + j] = acc;
            }
        }
    };

    let rk4 = |steps: usize| -> Vec<f64> {
        let h = t / steps as f64;
        let mut y = state.clone();
        let mut k1 = vec![0.0; dim];
        let mut k2 = vec![0.0; dim];
        let mut k3 = vec![0.0; dim];
        let mut k4 = vec![0.0; dim];
        let mut tmp = vec![0.0; dim];
        for _ in 0..steps {
            deriv(&y, &mut k1);
            for i in 0..dim {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            deriv(&tmp, &mut k2);
            for i in 0..dim {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            deriv(&tmp, &mut k3);
            for i in 0..dim {
                tmp[i] = y[i] + h * k3[i];
            }
            deriv(&tmp, &mut k4);
            for i in 0..dim {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    };

    let mut steps = ((t.abs() / cfg.base_step).ceil() as usize).max(1);
    let mut prev = rk4(steps);
    loop {
        steps *= 2;
        if steps > cfg.max_substeps {
            return Err(Error::NoConvergence {
                tol: cfg.tol,
                max_substeps: cfg.max_substeps,
            });
        }
        let cur = rk4(steps);
        let diff: f64 = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if !diff.is_finite() {
            return Err(Error::NonFinite { point: x.to_vec() });
        }
        if diff < cfg.tol {
            let pt = cur[..n].to_vec();
            let jac = nalgebra::DMatrix::from_fn(n, n, |i, j| cur[n + i * n + j]);
            return Ok((pt, jac));
        }
        prev = cur;
    }
}

fn invert_legs(legs: &[Leg]) -> Vec<Leg> {
    legs.iter()
        .rev()
        .map(|l| Leg {
            index: l.index,
            duration: -l.duration,
        })
        .collect()
}

// C_tau recursion, legs listed in application order (first leg acts first):
//   C_tau(X_{w_1})              = e^{tau X_{w_1}}
//   C_tau(X_{w_1},...,X_{w_l})  = C_rest^{-1} e^{-tau X_{w_1}} C_rest e^{tau X_{w_1}}
// where C_rest = C_tau(X_{w_2},...,X_{w_l}).
fn c_legs(letters: &[usize], tau: f64) -> Vec<Leg> {
    if letters.len() == 1 {
        return vec![Leg {
            index: letters[0],
            duration: tau,
        }];
    }
    let rest = c_legs(&letters[1..], tau);
    let mut legs = Vec::with_capacity(2 * rest.len() + 2);
    legs.push(Leg {
        index: letters[0],
        duration: tau,
    });
    legs.extend_from_slice(&rest);
    legs.push(Leg {
        index: letters[0],
        duration: -tau,
    });
    legs.extend(invert_legs(&rest));
    legs
}

/// The flat signed-leg expansion of the approximate exponential
/// `exp_ap(t X_w)` with `tau = |t|^{1/l}`; for `t < 0` the sequence is the
/// group inverse (reversed, signs flipped). The leg count depends only on
/// the word length.
pub fn approx_exp_legs(w: &Word, t: f64) -> Vec<Leg> {
    let l = w.len();
    let tau = t.abs().powf(1.0 / l as f64);
    let legs = c_legs(w.letters(), tau);
    if t < 0.0 {
        invert_legs(&legs)
    } else {
        legs
    }
}

/// Apply `exp_ap(t X_w)` to `x` by flowing the generator legs sequentially.
pub fn approx_exp(
    generators: &[VectorField],
    w: &Word,
    t: f64,
    x: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let n = x.len();
    let mut out = [0.0; MAX_DIM];
    approx_exp_into(generators, w, t, x, cfg, &mut out[..n])?;
    Ok(out[..n].to_vec())
}

pub(crate) fn approx_exp_into(
    generators: &[VectorField],
    w: &Word,
    t: f64,
    x: &[f64],
    cfg: &IntegratorConfig,
    out: &mut [f64],
) -> Result<()> {
    let n = x.len();
    let mut cur = [0.0; MAX_DIM];
    cur[..n].copy_from_slice(x);
    if t != 0.0 {
        let mut next = [0.0; MAX_DIM];
        for leg in approx_exp_legs(w, t) {
            flow_into(
                &generators[leg.index - 1],
                &cur[..n],
                leg.duration,
                cfg,
                &mut next[..n],
            )?;
            cur = next;
        }
    }
    out[..n].copy_from_slice(&cur[..n]);
    Ok(())
}

/// The ball-box map `E_{I,x}(h) = exp_ap(h_1 Y_{i_1}) ... exp_ap(h_n Y_{i_n})(x)`;
/// the factor carrying `h_n` acts on `x` first.
pub fn e_map(
    basis: &CommutatorBasis,
    index: &MultiIndex,
    x: &[f64],
    h: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let n = x.len();
    let mut out = [0.0; MAX_DIM];
    e_map_into(basis, index, x, h, cfg, &mut out[..n])?;
    Ok(out[..n].to_vec())
}

pub(crate) fn e_map_into(
    basis: &CommutatorBasis,
    index: &MultiIndex,
    x: &[f64],
    h: &[f64],
    cfg: &IntegratorConfig,
    out: &mut [f64],
) -> Result<()> {
    let n = x.len();
    let generators = basis.generators();
    let mut cur = [0.0; MAX_DIM];
    cur[..n].copy_from_slice(x);
    let mut next = [0.0; MAX_DIM];
    for (j, &i_j) in index.entries().iter().enumerate().rev() {
        if h[j] == 0.0 {
            continue;
        }
        approx_exp_into(generators, basis.word(i_j), h[j], &cur[..n], cfg, &mut next[..n])?;
        cur = next;
    }
    out[..n].copy_from_slice(&cur[..n]);
    Ok(())
}

/// The Nagel-Stein-Wainger exponential `Phi_{I,x}(u) = exp(sum_j u_j Y_{i_j})(x)`:
/// a single flow of the frozen linear combination.
pub fn nsw_exp(
    basis: &CommutatorBasis,
    index: &MultiIndex,
    x: &[f64],
    u: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    use crate::expr::Expr;
    let n = basis.dim();
    let mut coeffs = Vec::with_capacity(n);
    for i in 0..n {
        let terms = index
            .entries()
            .iter()
            .zip(u)
            .map(|(&ij, &uj)| {
                Expr::Prod(vec![Expr::Const(uj), basis.field(ij).coeffs()[i].clone()])
            })
            .collect();
        coeffs.push(Expr::Sum(terms).simplify());
    }
    let combined = VectorField::new(n, coeffs)?;
    flow(&combined, x, 1.0, cfg)
}

// Gaussian elimination with partial pivoting on stack matrices.
fn solve_linear(a: &mut [[f64; MAX_DIM]; MAX_DIM], b: &mut [f64; MAX_DIM], n: usize) -> bool {
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return false;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col][c] * b[c];
        }
        b[col] = acc / a[col][col];
    }
    true
}

/// Invert `E_{I,x}` near `x`: damped chord-Newton on the rescaled variables
/// `z_j = h_j / r^{l_{i_j}}` with a finite-difference Jacobian, initialized at
/// `h = 0`. Succeeds when `|E(h) - y| <= tol`; failure signals that `y` is
/// likely outside the box image.
pub fn e_inverse(
    basis: &CommutatorBasis,
    index: &MultiIndex,
    x: &[f64],
    y: &[f64],
    r: f64,
    cfg: &IntegratorConfig,
    tol: f64,
) -> Result<Vec<f64>> {
    let n = basis.dim();
    let mut scale = [0.0; MAX_DIM];
    for (j, &ij) in index.entries().iter().enumerate() {
        scale[j] = r.powi(basis.ell(ij) as i32);
    }

    let resid = |z: &[f64; MAX_DIM], g: &mut [f64; MAX_DIM]| -> Result<f64> {
        let mut h = [0.0; MAX_DIM];
        for j in 0..n {
            h[j] = scale[j] * z[j];
        }
        let mut e = [0.0; MAX_DIM];
        e_map_into(basis, index, x, &h[..n], cfg, &mut e[..n])?;
        let mut norm2 = 0.0;
        for i in 0..n {
            g[i] = e[i] - y[i];
            norm2 += g[i] * g[i];
        }
        Ok(norm2.sqrt())
    };

    let fd_jacobian = |z: &[f64; MAX_DIM]| -> Result<[[f64; MAX_DIM]; MAX_DIM]> {
        let delta = 1e-5;
        let mut jac = [[0.0; MAX_DIM]; MAX_DIM];
        let mut gp = [0.0; MAX_DIM];
        let mut gm = [0.0; MAX_DIM];
        for j in 0..n {
            let mut zp = *z;
            zp[j] += delta;
            let mut zm = *z;
            zm[j] -= delta;
            resid(&zp, &mut gp)?;
            resid(&zm, &mut gm)?;
            for i in 0..n {
                jac[i][j] = (gp[i] - gm[i]) / (2.0 * delta);
            }
        }
        Ok(jac)
    };

    let mut z = [0.0; MAX_DIM];
    let mut g = [0.0; MAX_DIM];
    let mut gnorm = resid(&z, &mut g)?;
    if gnorm <= tol {
        return Ok(vec![0.0; n]);
    }
    let mut jac = fd_jacobian(&z)?;
    let mut refreshed = false;
    let max_iter = 60;
    for _ in 0..max_iter {
        let mut a = jac;
        let mut step = g;
        if !solve_linear(&mut a, &mut step, n) {
            return Err(Error::NewtonFailed);
        }
        // damped update with step halving
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let mut zt = z;
            for j in 0..n {
                zt[j] -= lambda * step[j];
            }
            let mut gt = [0.0; MAX_DIM];
            match resid(&zt, &mut gt) {
                Ok(gn) if gn < gnorm => {
                    z = zt;
                    g = gt;
                    gnorm = gn;
                    accepted = true;
                    break;
                }
                _ => lambda *= 0.5,
            }
        }
        if gnorm <= tol {
            let mut h = vec![0.0; n];
            for j in 0..n {
                h[j] = scale[j] * z[j];
            }
            return Ok(h);
        }
        if !accepted {
            if refreshed {
                return Err(Error::NewtonFailed);
            }
            jac = fd_jacobian(&z)?;
            refreshed = true;
        }
        if z[..n].iter().any(|v| v.abs() > 1e3) {
            return Err(Error::NewtonFailed);
        }
    }
    Err(Error::NewtonFailed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ballbox::MultiIndex;
    use crate::fit::fit_loglog_slope;
    use crate::vf::systems::*;
    use crate::vf::{commutator_field, enumerate_basis};
    use approx::assert_abs_diff_eq;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn flow_constant_field() {
        let f = VectorField::parse(3, &["1", "0", "0"]).unwrap();
        let y = flow(&f, &[0.0; 3], 0.7, &cfg()).unwrap();
        assert_abs_diff_eq!(y[0], 0.7, epsilon = 1e-12);
        assert_eq!(&y[1..], &[0.0, 0.0]);
    }

    #[test]
    fn flow_heisenberg_closed_form() {
        // e^{sX}(x,y,t) = (x+s, y, t+2ys)
        let x_field = &heisenberg()[0];
        let y = flow(x_field, &[0.3, -0.2, 0.1], 0.5, &cfg()).unwrap();
        assert_abs_diff_eq!(y[0], 0.8, epsilon = 1e-10);
        assert_abs_diff_eq!(y[1], -0.2, epsilon = 1e-10);
        assert_abs_diff_eq!(y[2], -0.1, epsilon = 1e-10);
    }

    #[test]
    fn flow_zero_time() {
        let f = &heisenberg()[1];
        let x = vec![0.4, 0.5, -0.6];
        assert_eq!(flow(f, &x, 0.0, &cfg()).unwrap(), x);
    }

    #[test]
    fn flow_group_law() {
        let f = &grushin()[1];
        let x = [0.7, -0.3];
        let (s, t) = (0.4, -0.9);
        let a = flow(f, &flow(f, &x, s, &cfg()).unwrap(), t, &cfg()).unwrap();
        let b = flow(f, &x, s + t, &cfg()).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(a[i], b[i], epsilon = 10.0 * cfg().tol);
        }
    }

    #[test]
    fn jacobian_identity_for_translation() {
        let f = VectorField::parse(2, &["1", "0"]).unwrap();
        let (_, j) = flow_with_jacobian(&f, &[0.2, 0.3], 0.8, &cfg()).unwrap();
        assert_abs_diff_eq!(j[(0, 0)], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(j[(1, 1)], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(j[(0, 1)], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn jacobian_unit_determinant_divergence_free() {
        let f = &heisenberg()[0]; // div (1,0,2y) = 0
        let (_, j) = flow_with_jacobian(&f, &[0.3, -0.2, 0.1], 0.6, &cfg()).unwrap();
        assert_abs_diff_eq!(j.determinant(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn jacobian_zero_time_is_identity() {
        let f = &grushin()[1];
        let (pt, j) = flow_with_jacobian(&f, &[0.5, 0.5], 0.0, &cfg()).unwrap();
        assert_eq!(pt, vec![0.5, 0.5]);
        assert!(j.is_identity(0.0));
    }

    #[test]
    fn jacobian_matches_finite_difference_determinant() {
        let f = &grushin()[1];
        let x = [0.7, -0.2];
        let t = 0.5;
        let (_, j) = flow_with_jacobian(&f, &x, t, &cfg()).unwrap();
        let eps = 1e-6;
        let mut fd = nalgebra::DMatrix::zeros(2, 2);
        for col in 0..2 {
            let mut xp = x;
            xp[col] += eps;
            let mut xm = x;
            xm[col] -= eps;
            let yp = flow(f, &xp, t, &cfg()).unwrap();
            let ym = flow(f, &xm, t, &cfg()).unwrap();
            for row in 0..2 {
                fd[(row, col)] = (yp[row] - ym[row]) / (2.0 * eps);
            }
        }
        let rel = (j.determinant() - fd.determinant()).abs() / fd.determinant().abs();
        assert!(rel < 1e-4, "rel err {}", rel);
    }

    #[test]
    fn legs_single_letter() {
        let w = Word::parse("1", 2).unwrap();
        let legs = approx_exp_legs(&w, 0.3);
        assert_eq!(legs, vec![Leg { index: 1, duration: 0.3 }]);
    }

    #[test]
    fn legs_length_two_commutator() {
        let w = Word::parse("12", 2).unwrap();
        let s = 0.5;
        let legs = approx_exp_legs(&w, s * s);
        assert_eq!(
            legs,
            vec![
                Leg { index: 1, duration: s },
                Leg { index: 2, duration: s },
                Leg { index: 1, duration: -s },
                Leg { index: 2, duration: -s },
            ]
        );
    }

    #[test]
    fn legs_negative_time_is_group_inverse() {
        let w = Word::parse("12", 2).unwrap();
        let fwd = approx_exp_legs(&w, 0.25);
        let bwd = approx_exp_legs(&w, -0.25);
        let expect: Vec<Leg> = fwd
            .iter()
            .rev()
            .map(|l| Leg {
                index: l.index,
                duration: -l.duration,
            })
            .collect();
        assert_eq!(bwd, expect);
    }

    #[test]
    fn leg_count_depends_only_on_length() {
        for (len, expect) in [(1usize, 1usize), (2, 4), (3, 10), (4, 22)] {
            let w = Word::new(vec![1; len].iter().enumerate().map(|(i, _)| 1 + i % 2).collect(), 2)
                .unwrap();
            assert_eq!(approx_exp_legs(&w, 0.1).len(), expect);
        }
    }

    #[test]
    fn approx_exp_heisenberg_exact_identity() {
        // e^{-sY}e^{-sX}e^{sY}e^{sX}(x,y,t) = (x, y, t - 4 s^2)
        let gens = heisenberg();
        let w = Word::parse("12", 2).unwrap();
        let y = approx_exp(&gens, &w, 0.25, &[0.3, -0.2, 0.1], &cfg()).unwrap();
        assert_abs_diff_eq!(y[0], 0.3, epsilon = 1e-9);
        assert_abs_diff_eq!(y[1], -0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(y[2], -0.9, epsilon = 1e-9);
    }

    #[test]
    fn approx_exp_inverse_time() {
        let gens = heisenberg();
        let w = Word::parse("12", 2).unwrap();
        let y = approx_exp(&gens, &w, -0.25, &[0.3, -0.2, 0.1], &cfg()).unwrap();
        assert_abs_diff_eq!(y[2], 1.1, epsilon = 1e-9);
    }

    #[test]
    fn approx_exp_zero_time() {
        let gens = heisenberg();
        let w = Word::parse("12", 2).unwrap();
        let x = vec![0.1, 0.2, 0.3];
        assert_eq!(approx_exp(&gens, &w, 0.0, &x, &cfg()).unwrap(), x);
    }

    #[test]
    fn approx_exp_round_trip_cancels() {
        let gens = step3();
        let w = Word::parse("112", 2).unwrap();
        let x = vec![0.3, -0.1, 0.2];
        let fwd = approx_exp(&gens, &w, 0.2, &x, &cfg()).unwrap();
        let back = approx_exp(&gens, &w, -0.2, &fwd, &cfg()).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(back[i], x[i], epsilon = 10.0 * cfg().tol);
        }
    }

    #[test]
    fn approx_exp_length_one_matches_flow() {
        let gens = grushin();
        let w = Word::parse("2", 2).unwrap();
        let x = [0.8, 0.1];
        let a = approx_exp(&gens, &w, 0.37, &x, &cfg()).unwrap();
        let b = flow(&gens[1], &x, 0.37, &cfg()).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(a[i], b[i], epsilon = 10.0 * cfg().tol);
        }
    }

    #[test]
    fn convergence_order_on_non_exact_word() {
        // step-3 polynomial system, w = "12": exp_ap error is exactly t^{3/2}
        let gens = step3();
        let w = Word::parse("12", 2).unwrap();
        let xw = commutator_field(&gens, &w).unwrap();
        let x = [0.3, -0.1, 0.2];
        let mut ts = Vec::new();
        let mut errs = Vec::new();
        for k in 2..8 {
            let t = 0.5f64.powi(k);
            let a = approx_exp(&gens, &w, t, &x, &cfg()).unwrap();
            let b = flow(&xw, &x, t, &cfg()).unwrap();
            let err: f64 = (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
            ts.push(t);
            errs.push(err);
        }
        let slope = fit_loglog_slope(&ts, &errs).unwrap();
        assert!(slope >= 1.5 - 0.2, "slope {}", slope);
    }

    #[test]
    fn heisenberg_word_is_exact_for_all_t() {
        let gens = heisenberg();
        let w = Word::parse("12", 2).unwrap();
        let x = [0.3, -0.2, 0.1];
        let xw = commutator_field(&gens, &w).unwrap();
        for k in 1..8 {
            let t = 0.7f64.powi(k);
            let a = approx_exp(&gens, &w, t, &x, &cfg()).unwrap();
            let b = flow(&xw, &x, t, &cfg()).unwrap();
            let err: f64 = (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 10.0 * cfg().tol, "t={} err={}", t, err);
        }
    }

    fn heis_basis() -> CommutatorBasis {
        enumerate_basis(&heisenberg(), 2, true).unwrap()
    }

    #[test]
    fn e_map_zero_is_identity() {
        let basis = heis_basis();
        let i = MultiIndex::new(vec![1, 2, 3], basis.len()).unwrap();
        let x = vec![0.2, 0.1, -0.3];
        assert_eq!(
            e_map(&basis, &i, &x, &[0.0; 3], &cfg()).unwrap(),
            x
        );
    }

    #[test]
    fn e_map_single_factor_reduction() {
        let basis = heis_basis();
        let i = MultiIndex::new(vec![1, 2, 3], basis.len()).unwrap();
        let x = [0.3, -0.2, 0.1];
        let a = e_map(&basis, &i, &x, &[0.4, 0.0, 0.0], &cfg()).unwrap();
        let b = approx_exp(basis.generators(), basis.word(1), 0.4, &x, &cfg()).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn e_map_commutator_factor() {
        let basis = heis_basis();
        let i = MultiIndex::new(vec![1, 2, 3], basis.len()).unwrap();
        let y = e_map(&basis, &i, &[0.0; 3], &[0.0, 0.0, 0.01], &cfg()).unwrap();
        assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(y[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(y[2], -0.04, epsilon = 1e-9);
    }

    #[test]
    fn nsw_exp_cases() {
        let basis = heis_basis();
        let i = MultiIndex::new(vec![1, 2, 3], basis.len()).unwrap();
        let x = vec![0.1, 0.2, 0.3];
        assert_eq!(nsw_exp(&basis, &i, &x, &[0.0; 3], &cfg()).unwrap(), x);

        // Euclidean frame: x + u
        let eb = enumerate_basis(&euclidean(3), 1, true).unwrap();
        let ie = MultiIndex::new(vec![1, 2, 3], 3).unwrap();
        let y = nsw_exp(&eb, &ie, &[0.1, 0.2, 0.3], &[0.5, -0.4, 0.2], &cfg()).unwrap();
        assert_abs_diff_eq!(y[0], 0.6, epsilon = 1e-10);
        assert_abs_diff_eq!(y[1], -0.2, epsilon = 1e-10);
        assert_abs_diff_eq!(y[2], 0.5, epsilon = 1e-10);

        // Heisenberg horizontal ray from the origin: t-component stays 0
        let z = nsw_exp(&basis, &i, &[0.0; 3], &[0.3, 0.4, 0.0], &cfg()).unwrap();
        assert_abs_diff_eq!(z[0], 0.3, epsilon = 1e-9);
        assert_abs_diff_eq!(z[1], 0.4, epsilon = 1e-9);
        assert_abs_diff_eq!(z[2], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn e_inverse_identity_at_x() {
        let basis = heis_basis();
        let i = MultiIndex::new(vec![1, 2, 3], basis.len()).unwrap();
        let x = vec![0.2, -0.1, 0.05];
        let h = e_inverse(&basis, &i, &x, &x, 0.3, &cfg(), 1e-9).unwrap();
        assert!(h.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn e_inverse_recovers_commutator_displacement() {
        let basis = heis_basis();
        let i = MultiIndex::new(vec![1, 2, 3], basis.len()).unwrap();
        let h = e_inverse(
            &basis,
            &i,
            &[0.0; 3],
            &[0.0, 0.0, -0.04],
            0.2,
            &cfg(),
            1e-10,
        )
        .unwrap();
        assert_abs_diff_eq!(h[0], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(h[1], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(h[2], 0.01, epsilon = 1e-7);
    }

    #[test]
    fn e_inverse_round_trip() {
        let basis = heis_basis();
        let i = MultiIndex::new(vec![1, 2, 3], basis.len()).unwrap();
        let x = [0.1, 0.2, -0.1];
        let h = [0.03, -0.02, 0.004];
        let y = e_map(&basis, &i, &x, &h, &cfg()).unwrap();
        let rec = e_inverse(&basis, &i, &x, &y, 0.3, &cfg(), 1e-10).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(rec[j], h[j], epsilon = 1e-6);
        }
    }
}
