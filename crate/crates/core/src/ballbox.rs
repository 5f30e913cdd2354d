//! Determinants λ_I, lengths ℓ(I), η-maximal selection, anisotropic box norms
//! and the two-sided volume proxy.

use crate::error::{Error, Result};
use crate::vf::CommutatorBasis;
use crate::MAX_DIM;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// An n-tuple I = (i_1,...,i_n) of 1-based basis indices selecting the
/// commutators Y_{i_1},...,Y_{i_n}.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MultiIndex {
    entries: Vec<usize>,
}

impl MultiIndex {
    pub fn new(entries: Vec<usize>, q: usize) -> Result<MultiIndex> {
        if entries.is_empty() || entries.len() > MAX_DIM {
            return Err(Error::DimensionTooLarge(entries.len()));
        }
        for &i in &entries {
            if i == 0 || i > q {
                return Err(Error::LetterOutOfRange { letter: i, m: q });
            }
        }
        Ok(MultiIndex { entries })
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.entries.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i)?;
        }
        write!(f, ")")
    }
}

/// Scenario-level constants for the ball-box machinery. `eps_hat` and `c_hat`
/// are empirical parameters (the underlying theorem only asserts existence);
/// they are calibrated per scenario, not derived.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BallBoxConstants {
    pub eta: f64,
    pub eps_hat: f64,
    pub c_hat: f64,
    pub r0: f64,
}

impl BallBoxConstants {
    pub fn new(eta: f64, eps_hat: f64, c_hat: f64, r0: f64) -> Result<BallBoxConstants> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Schema(format!("eta must be in (0,1), got {eta}")));
        }
        if !(eps_hat < 1.0 && eps_hat > 0.0 && c_hat > 1.0) {
            return Err(Error::Schema(format!(
                "need 0 < eps_hat < 1 < c_hat, got eps_hat={eps_hat}, c_hat={c_hat}"
            )));
        }
        if !(r0 > 0.0) {
            return Err(Error::Schema(format!("r0 must be positive, got {r0}")));
        }
        Ok(BallBoxConstants {
            eta,
            eps_hat,
            c_hat,
            r0,
        })
    }

    /// Default selection threshold η = 1/2.
    pub fn with_defaults(eps_hat: f64, c_hat: f64, r0: f64) -> Result<BallBoxConstants> {
        BallBoxConstants::new(0.5, eps_hat, c_hat, r0)
    }
}

/// A triple (I, x, r) certified η-maximal at construction time.
#[derive(Debug, Clone)]
pub struct MaximalTriple {
    pub index: MultiIndex,
    pub x: Vec<f64>,
    pub r: f64,
    pub eta: f64,
}

impl MaximalTriple {
    pub fn new(
        basis: &CommutatorBasis,
        index: MultiIndex,
        x: Vec<f64>,
        r: f64,
        eta: f64,
    ) -> Option<MaximalTriple> {
        if is_eta_maximal(basis, &index, &x, r, eta) {
            Some(MaximalTriple { index, x, r, eta })
        } else {
            None
        }
    }
}

// Determinant by Gaussian elimination with partial pivoting; columns are the
// chosen field values.
fn det_columns(cols: &[[f64; MAX_DIM]], n: usize) -> f64 {
    let mut a = [[0.0; MAX_DIM]; MAX_DIM];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            a[i][j] = col[i];
        }
    }
    let mut det = 1.0;
    for c in 0..n {
        let mut piv = c;
        for r in c + 1..n {
            if a[r][c].abs() > a[piv][c].abs() {
                piv = r;
            }
        }
        if a[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            a.swap(c, piv);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    det
}

fn eval_all_fields(basis: &CommutatorBasis, x: &[f64]) -> Vec<[f64; MAX_DIM]> {
    let n = basis.dim();
    let q = basis.len();
    let mut vals = vec![[0.0; MAX_DIM]; q];
    for j in 1..=q {
        basis.field(j).eval_into_raw(x, &mut vals[j - 1][..n]);
    }
    vals
}

/// λ_I(x) = det(Y_{i_1}(x), ..., Y_{i_n}(x)).
pub fn lambda_i(basis: &CommutatorBasis, index: &MultiIndex, x: &[f64]) -> f64 {
    let n = basis.dim();
    let mut cols = [[0.0; MAX_DIM]; MAX_DIM];
    for (j, &ij) in index.entries().iter().enumerate() {
        basis.field(ij).eval_into_raw(x, &mut cols[j][..n]);
    }
    det_columns(&cols[..index.len()], n)
}

/// ℓ(I) = Σ_j ℓ_{i_j}.
pub fn ell(basis: &CommutatorBasis, index: &MultiIndex) -> usize {
    index.entries().iter().map(|&i| basis.ell(i)).sum()
}

// Visit every ascending n-combination of {1..q}. Tuples with repeated indices
// have vanishing determinant and permutations share |λ| and ℓ, so ascending
// combinations cover the max over all of {1..q}^n.
fn for_each_combo(q: usize, n: usize, mut f: impl FnMut(&[usize])) {
    if n > q {
        return;
    }
    let mut c: Vec<usize> = (1..=n).collect();
    loop {
        f(&c);
        // advance to the next combination
        let mut pos = n;
        while pos > 0 {
            pos -= 1;
            if c[pos] < q - (n - 1 - pos) {
                c[pos] += 1;
                for k in pos + 1..n {
                    c[k] = c[k - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return;
            }
        }
    }
}

fn max_over_combos(basis: &CommutatorBasis, x: &[f64], r: f64) -> f64 {
    let n = basis.dim();
    let q = basis.len();
    let vals = eval_all_fields(basis, x);
    let mut best = 0.0f64;
    let mut cols = [[0.0; MAX_DIM]; MAX_DIM];
    for_each_combo(q, n, |combo| {
        let mut l = 0usize;
        for (j, &i) in combo.iter().enumerate() {
            cols[j] = vals[i - 1];
            l += basis.ell(i);
        }
        let v = det_columns(&cols[..n], n).abs() * r.powi(l as i32);
        if v > best {
            best = v;
        }
    });
    best
}

/// Whether |λ_I(x)| r^{ℓ(I)} > η · max_K |λ_K(x)| r^{ℓ(K)} (strict).
pub fn is_eta_maximal(
    basis: &CommutatorBasis,
    index: &MultiIndex,
    x: &[f64],
    r: f64,
    eta: f64,
) -> bool {
    let own = lambda_i(basis, index, x).abs() * r.powi(ell(basis, index) as i32);
    if own == 0.0 {
        return false;
    }
    own > eta * max_over_combos(basis, x, r)
}

/// Argmax of |λ_K(x)| r^{ℓ(K)} over n-tuples; ties broken by smallest
/// (ℓ(K), lexicographic K). Errors if every determinant vanishes.
pub fn select_maximal(basis: &CommutatorBasis, x: &[f64], r: f64) -> Result<MultiIndex> {
    let n = basis.dim();
    let q = basis.len();
    let vals = eval_all_fields(basis, x);
    let mut best_val = 0.0f64;
    let mut best_ell = usize::MAX;
    let mut best: Option<Vec<usize>> = None;
    let mut cols = [[0.0; MAX_DIM]; MAX_DIM];
    for_each_combo(q, n, |combo| {
        let mut l = 0usize;
        for (j, &i) in combo.iter().enumerate() {
            cols[j] = vals[i - 1];
            l += basis.ell(i);
        }
        let v = det_columns(&cols[..n], n).abs() * r.powi(l as i32);
        if v == 0.0 {
            return;
        }
        // combos are visited in lexicographic order, so on an exact tie only a
        // strictly shorter ℓ displaces the incumbent
        if v > best_val || (v == best_val && l < best_ell) {
            best_val = v;
            best_ell = l;
            best = Some(combo.to_vec());
        }
    });
    match best {
        Some(entries) => MultiIndex::new(entries, q),
        None => Err(Error::HormanderViolation),
    }
}

/// Anisotropic box norm ‖h‖_I = max_j |h_j|^{1/ℓ_{i_j}}.
pub fn box_norm(basis: &CommutatorBasis, index: &MultiIndex, h: &[f64]) -> f64 {
    index
        .entries()
        .iter()
        .zip(h)
        .map(|(&i, &hj)| hj.abs().powf(1.0 / basis.ell(i) as f64))
        .fold(0.0, f64::max)
}

/// Membership in the open box Q_I(r): ‖h‖_I < r.
pub fn box_contains(basis: &CommutatorBasis, index: &MultiIndex, r: f64, h: &[f64]) -> bool {
    box_norm(basis, index, h) < r
}

/// Uniform samples of Q_I(r): h_j ~ U(−r^{ℓ_{i_j}}, r^{ℓ_{i_j}}), deterministic
/// per seed.
pub fn sample_box(
    basis: &CommutatorBasis,
    index: &MultiIndex,
    r: f64,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half: Vec<f64> = index
        .entries()
        .iter()
        .map(|&i| r.powi(basis.ell(i) as i32))
        .collect();
    (0..count)
        .map(|_| half.iter().map(|&a| rng.gen_range(-a..a)).collect())
        .collect()
}

/// Two-sided ball-volume proxy max_K |λ_K(x)| r^{ℓ(K)}.
pub fn volume_proxy(basis: &CommutatorBasis, x: &[f64], r: f64) -> f64 {
    max_over_combos(basis, x, r)
}

/// Monte Carlo Lebesgue measure of the metric ball B(x,r): uniform samples on
/// the bounding box scored by the indicator `d_est(x,y) < r`. Estimator
/// failures (`None`) count as misses.
pub fn ball_volume_mc(
    x: &[f64],
    r: f64,
    lo: &[f64],
    hi: &[f64],
    count: usize,
    seed: u64,
    mut dist: impl FnMut(&[f64], &[f64]) -> Option<f64>,
) -> f64 {
    let n = lo.len();
    let vol: f64 = lo.iter().zip(hi).map(|(&a, &b)| b - a).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut y = vec![0.0; n];
    for _ in 0..count {
        for i in 0..n {
            y[i] = rng.gen_range(lo[i]..hi[i]);
        }
        if let Some(d) = dist(x, &y) {
            if d < r {
                hits += 1;
            }
        }
    }
    vol * hits as f64 / count as f64
}

/// The interval of radii r ∈ (0, r₀] on which (I, x, Ĉr) is η-maximal, found
/// by a dyadic scan refined by bisection; `None` when the grid sees no
/// maximal radius. A returned lower endpoint of 0 means maximality persists
/// down to the finest grid level.
pub fn maximal_annulus(
    basis: &CommutatorBasis,
    index: &MultiIndex,
    x: &[f64],
    consts: &BallBoxConstants,
) -> Option<(f64, f64)> {
    let g = |r: f64| is_eta_maximal(basis, index, x, consts.c_hat * r, consts.eta);
    let levels = 48;
    let radii: Vec<f64> = (0..=levels).map(|k| consts.r0 * 0.5f64.powi(k)).collect();
    let flags: Vec<bool> = radii.iter().map(|&r| g(r)).collect();
    let first = flags.iter().position(|&b| b)?;
    let last = flags.iter().rposition(|&b| b).unwrap();

    let bisect = |mut lo: f64, mut hi: f64, want_hi_true: bool| -> f64 {
        // invariant: g differs at the endpoints; returns the crossing
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if g(mid) == want_hi_true {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let r_hi = if first == 0 {
        consts.r0
    } else {
        bisect(radii[first], radii[first - 1], false).min(consts.r0)
    };
    let r_lo = if last == levels as usize {
        0.0
    } else {
        bisect(radii[last + 1], radii[last], true)
    };
    Some((r_lo, r_hi))
}
