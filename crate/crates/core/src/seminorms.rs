//! L^p norms, the metric fractional seminorm, directional seminorms along
//! commutators, the classical Gagliardo seminorm, and the Folland–Stein
//! right-hand side.

use crate::ballbox::{select_maximal, volume_proxy, BallBoxConstants};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::expr::Expr;
#[cfg(test)]
use crate::expr::parse_expr;
use crate::flows::{e_map, flow, IntegratorConfig};
use crate::report::{Report, StratumDiag};
use crate::vf::{CommutatorBasis, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Integration backend for plain L^p norms and the Gagliardo oracle.
#[derive(Debug, Clone, Copy)]
pub enum Quadrature {
    /// Tensor midpoint rule with the given points per axis.
    Midpoint { points_per_axis: usize },
    /// Plain Monte Carlo.
    MonteCarlo { count: usize, seed: u64 },
}

fn for_each_grid_point(omega: &Domain, pts: usize, mut f: impl FnMut(&[f64])) {
    let n = omega.dim();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        for i in 0..n {
            let step = (omega.hi[i] - omega.lo[i]) / pts as f64;
            x[i] = omega.lo[i] + (idx[i] as f64 + 0.5) * step;
        }
        f(&x);
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            idx[i] += 1;
            if idx[i] < pts {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// (∫_Ω |f|^p)^{1/p} by midpoint grid or Monte Carlo.
pub fn lp_norm(f: &Expr, omega: &Domain, p: f64, quad: &Quadrature) -> Result<f64> {
    let mut acc = 0.0f64;
    let mut bad = false;
    match *quad {
        Quadrature::Midpoint { points_per_axis } => {
            let cells = (points_per_axis as f64).powi(omega.dim() as i32);
            for_each_grid_point(omega, points_per_axis, |x| {
                let v = f.eval_raw(x);
                if v.is_finite() {
                    acc += v.abs().powf(p);
                } else {
                    bad = true;
                }
            });
            acc *= omega.volume() / cells;
        }
        Quadrature::MonteCarlo { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = vec![0.0; omega.dim()];
            for _ in 0..count {
                omega.sample_into(&mut rng, &mut x);
                let v = f.eval_raw(&x);
                if v.is_finite() {
                    acc += v.abs().powf(p);
                } else {
                    bad = true;
                }
            }
            acc *= omega.volume() / count as f64;
        }
    }
    if bad {
        return Err(Error::NonFinite { point: vec![] });
    }
    Ok(acc.powf(1.0 / p))
}

/// ‖f‖_p + Σ_j ‖X_j f‖_p with symbolic horizontal derivatives.
pub fn folland_stein_rhs(
    f: &Expr,
    generators: &[VectorField],
    omega0: &Domain,
    p: f64,
    quad: &Quadrature,
) -> Result<f64> {
    let mut total = lp_norm(f, omega0, p, quad)?;
    for g in generators {
        let xf = g.apply_to(f).simplify();
        total += lp_norm(&xf, omega0, p, quad)?;
    }
    Ok(total)
}

/// One accepted pair of the stratified sampler. Everything except the
/// function values is cached, so a cache is reusable across (s,p).
#[derive(Debug, Clone)]
pub struct PairSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Estimated distance d(x,y).
    pub d: f64,
    /// Ball-volume model evaluated at (x, d).
    pub vol: f64,
    /// Importance weight (already divided by the proposal count).
    pub weight: f64,
    pub shell: usize,
}

/// Shell-stratified pair samples with acceptance diagnostics.
#[derive(Debug, Clone)]
pub struct PairCache {
    pub samples: Vec<PairSample>,
    pub shells: usize,
    pub proposals_per_shell: usize,
    pub r0: f64,
    /// Proposals that landed in the domain but at distance >= r0 (the far
    /// mass omitted by the shell decomposition).
    pub far_count: usize,
    /// Proposals whose distance estimator failed.
    pub failed_count: usize,
}

impl PairCache {
    /// A consistent sub-cache using only the first `k` proposals per shell
    /// (weights are rescaled accordingly).
    pub fn truncated(&self, k: usize) -> PairCache {
        assert!(k <= self.proposals_per_shell && k > 0);
        let factor = self.proposals_per_shell as f64 / k as f64;
        // samples are stored shell-major in proposal order with their
        // within-shell proposal index encoded by position; we re-filter by
        // recorded order below
        let mut kept = Vec::new();
        let mut seen = vec![0usize; self.shells];
        for s in &self.samples {
            // proposal indices are not stored; acceptance order within a
            // shell follows proposal order, so keep a proportional prefix
            if seen[s.shell] < k * self.count_in_shell(s.shell) / self.proposals_per_shell {
                let mut c = s.clone();
                c.weight *= factor;
                kept.push(c);
                seen[s.shell] += 1;
            }
        }
        PairCache {
            samples: kept,
            shells: self.shells,
            proposals_per_shell: k,
            r0: self.r0,
            far_count: self.far_count,
            failed_count: self.failed_count,
        }
    }

    fn count_in_shell(&self, k: usize) -> usize {
        self.samples.iter().filter(|s| s.shell == k).count()
    }
}

// finite-difference Jacobian determinant of E_{I,x} with anisotropic steps
pub(crate) fn fd_det(
    basis: &CommutatorBasis,
    index: &crate::ballbox::MultiIndex,
    x: &[f64],
    h: &[f64],
    half_widths: &[f64],
    icfg: &IntegratorConfig,
) -> Result<f64> {
    let n = basis.dim();
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for j in 0..n {
        let delta = 1e-4 * half_widths[j];
        let mut hp = h.to_vec();
        hp[j] += delta;
        let mut hm = h.to_vec();
        hm[j] -= delta;
        let yp = e_map(basis, index, x, &hp, icfg)?;
        let ym = e_map(basis, index, x, &hm, icfg)?;
        for i in 0..n {
            m[(i, j)] = (yp[i] - ym[i]) / (2.0 * delta);
        }
    }
    Ok(m.determinant())
}

/// Build a stratified pair cache: for shell k with radius r_k = r0 2^{-k},
/// proposals are x ~ U(Ω), h ~ U(Q_I(ε̂Ĉ r_k)) with I the maximal tuple at
/// scale Ĉ r_k, y = E_{I,x}(h). A proposal is accepted when y ∈ Ω and the
/// estimated distance falls in [r_k/2, r_k). Importance weights make
/// Σ w_i g(x_i,y_i) estimate the pair integral over the shell.
pub fn sample_pairs(
    basis: &CommutatorBasis,
    omega: &Domain,
    consts: &BallBoxConstants,
    shells: usize,
    proposals_per_shell: usize,
    seed: u64,
    icfg: &IntegratorConfig,
    dist: &mut dyn FnMut(&[f64], &[f64]) -> Option<f64>,
    vol: &mut dyn FnMut(&[f64], f64) -> f64,
) -> Result<PairCache> {
    let n = basis.dim();
    let vol_omega = omega.volume();
    let mut samples = Vec::new();
    let mut far_count = 0usize;
    let mut failed_count = 0usize;
    for k in 0..shells {
        let r_k = consts.r0 * 0.5f64.powi(k as i32);
        let a = consts.eps_hat * consts.c_hat * r_k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let mut x = vec![0.0; n];
        for _ in 0..proposals_per_shell {
            omega.sample_into(&mut rng, &mut x);
            let index = match select_maximal(basis, &x, consts.c_hat * r_k) {
                Ok(i) => i,
                Err(_) => continue,
            };
            let half_widths: Vec<f64> = index
                .entries()
                .iter()
                .map(|&i| a.powi(basis.ell(i) as i32))
                .collect();
            let h: Vec<f64> = half_widths.iter().map(|&w| rng.gen_range(-w..w)).collect();
            let y = match e_map(basis, &index, &x, &h, icfg) {
                Ok(y) => y,
                Err(_) => continue,
            };
            if !omega.contains(&y) {
                continue;
            }
            let d = match dist(&x, &y) {
                Some(d) => d,
                None => {
                    failed_count += 1;
                    continue;
                }
            };
            if d >= consts.r0 {
                far_count += 1;
                continue;
            }
            if !(d >= 0.5 * r_k && d < r_k) {
                continue;
            }
            let det = match fd_det(basis, &index, &x, &h, &half_widths, icfg) {
                Ok(d) => d.abs(),
                Err(_) => continue,
            };
            let vol_q: f64 = half_widths.iter().map(|&w| 2.0 * w).product();
            let weight = vol_omega * vol_q * det / proposals_per_shell as f64;
            samples.push(PairSample {
                x: x.clone(),
                y,
                d,
                vol: vol(&x, d),
                weight,
                shell: k,
            });
        }
    }
    Ok(PairCache {
        samples,
        shells,
        proposals_per_shell,
        r0: consts.r0,
        far_count,
        failed_count,
    })
}

/// Evaluate the metric seminorm from a pair cache:
/// (Σ w |f(x)−f(y)|^p / (Vol(x,d) d^{ps}))^{1/p}. With `restrict`, only pairs
/// inside the sub-domain contribute (value is then monotone in the domain by
/// construction).
pub fn seminorm_d_cached(
    f: &Expr,
    s: f64,
    p: f64,
    cache: &PairCache,
    restrict: Option<&Domain>,
) -> Result<(f64, Vec<StratumDiag>)> {
    let mut shell_sum = vec![0.0f64; cache.shells];
    let mut shell_sq = vec![0.0f64; cache.shells];
    let mut shell_n = vec![0u64; cache.shells];
    for smp in &cache.samples {
        if let Some(dom) = restrict {
            if !dom.contains(&smp.x) || !dom.contains(&smp.y) {
                continue;
            }
        }
        let df = (f.eval_raw(&smp.x) - f.eval_raw(&smp.y)).abs();
        let kernel = df.powf(p) / (smp.vol * smp.d.powf(p * s));
        let c = smp.weight * kernel;
        if !c.is_finite() {
            return Err(Error::NonFinite { point: smp.x.clone() });
        }
        shell_sum[smp.shell] += c;
        shell_sq[smp.shell] += c * c;
        shell_n[smp.shell] += 1;
    }
    let total: f64 = shell_sum.iter().sum();
    let strata = (0..cache.shells)
        .map(|k| StratumDiag {
            stratum: k,
            pairs: shell_n[k],
            mean_kernel: if shell_n[k] > 0 {
                shell_sum[k] / shell_n[k] as f64
            } else {
                0.0
            },
            // crude upper estimate of the shell-sum standard error
            stderr: shell_sq[k].sqrt(),
        })
        .collect();
    Ok((total.powf(1.0 / p), strata))
}

/// One-shot metric seminorm: builds a cache with the given estimator and
/// volume model, then evaluates.
#[allow(clippy::too_many_arguments)]
pub fn seminorm_d(
    basis: &CommutatorBasis,
    f: &Expr,
    omega: &Domain,
    consts: &BallBoxConstants,
    s: f64,
    p: f64,
    shells: usize,
    proposals_per_shell: usize,
    seed: u64,
    icfg: &IntegratorConfig,
    dist: &mut dyn FnMut(&[f64], &[f64]) -> Option<f64>,
) -> Result<f64> {
    let mut vol = |x: &[f64], r: f64| volume_proxy(basis, x, r);
    let cache = sample_pairs(
        basis,
        omega,
        consts,
        shells,
        proposals_per_shell,
        seed,
        icfg,
        dist,
        &mut vol,
    )?;
    Ok(seminorm_d_cached(f, s, p, &cache, None)?.0)
}

/// Options for the directional seminorm estimator.
#[derive(Debug, Clone)]
pub struct DirConfig {
    pub x_count: usize,
    pub t_points: usize,
    /// The t-grid spans [r0 * t_min_factor, r0] geometrically.
    pub t_min_factor: f64,
    /// Also integrate over negative t (default: one-sided).
    pub symmetric_t: bool,
    /// Exclude times whose flow point leaves the domain.
    pub restrict_to_domain: bool,
    pub seed: u64,
}

impl Default for DirConfig {
    fn default() -> Self {
        DirConfig {
            x_count: 400,
            t_points: 48,
            t_min_factor: 2.0f64.powi(-12),
            symmetric_t: false,
            restrict_to_domain: true,
            seed: 0,
        }
    }
}

/// Directional fractional seminorm along Z:
/// (∫_Ω ∫_0^{r0} |f(e^{tZ}x) − f(x)|^p / t^{1+pε} dt dx)^{1/p}.
/// The t-integral uses a geometric grid with log-midpoint weights; the
/// x-integral is Monte Carlo over Ω.
pub fn seminorm_dir(
    f: &Expr,
    z: &VectorField,
    omega: &Domain,
    eps: f64,
    p: f64,
    r0: f64,
    cfg: &DirConfig,
    icfg: &IntegratorConfig,
) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Schema(format!("eps must be in (0,1), got {eps}")));
    }
    let n = omega.dim();
    // geometric cells covering (t_min, r0], evaluated at log-midpoints
    let m = cfg.t_points;
    let t_min = r0 * cfg.t_min_factor;
    let g = (r0 / t_min).powf(1.0 / m as f64);
    let ts: Vec<f64> = (0..m).map(|j| t_min * g.powf(j as f64 + 0.5)).collect();
    let dlog = g.ln();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut acc = 0.0f64;
    let mut x = vec![0.0; n];
    for _ in 0..cfg.x_count {
        omega.sample_into(&mut rng, &mut x);
        let fx = f.eval_raw(&x);
        for sign in [1.0, -1.0] {
            if sign < 0.0 && !cfg.symmetric_t {
                break;
            }
            // incremental flow along the ascending grid
            let mut pt = x.clone();
            let mut t_prev = 0.0;
            for &t in &ts {
                pt = flow(z, &pt, sign * (t - t_prev), icfg)?;
                t_prev = t;
                if cfg.restrict_to_domain && !omega.contains(&pt) {
                    continue;
                }
                let df = (f.eval_raw(&pt) - fx).abs();
                // ∫ g(t) dt = ∫ g(t) t dlog t, log-midpoint weights
                let integrand = df.powf(p) / t.powf(1.0 + p * eps);
                let c = integrand * t * dlog;
                if !c.is_finite() {
                    return Err(Error::NonFinite { point: x.clone() });
                }
                acc += c;
            }
        }
    }
    let value_p = acc * omega.volume() / cfg.x_count as f64;
    Ok(value_p.powf(1.0 / p))
}

/// Classical Gagliardo seminorm (∫∫ |f(x)−f(y)|^p/|x−y|^{n+pσ})^{1/p} on a
/// dense tensor grid; same-cell pairs are skipped (integrable singularity).
pub fn classical_gagliardo(
    f: &Expr,
    omega: &Domain,
    sigma: f64,
    p: f64,
    points_per_axis: usize,
) -> Result<f64> {
    let n = omega.dim();
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for_each_grid_point(omega, points_per_axis, |x| pts.push(x.to_vec()));
    let fv: Vec<f64> = pts.iter().map(|x| f.eval_raw(x)).collect();
    if fv.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { point: vec![] });
    }
    let cell = omega.volume() / pts.len() as f64;
    let exponent = n as f64 + p * sigma;
    // fast path for the common oracle case p=2, n+pσ=3
    let fast3 = (p - 2.0).abs() < 1e-15 && (exponent - 3.0).abs() < 1e-15;
    let mut acc = 0.0f64;
    for i in 0..pts.len() {
        let (xi, fi) = (&pts[i], fv[i]);
        for j in (i + 1)..pts.len() {
            let mut r2 = 0.0;
            for k in 0..n {
                let dk = xi[k] - pts[j][k];
                r2 += dk * dk;
            }
            if r2 == 0.0 {
                continue;
            }
            let df = fi - fv[j];
            let kernel = if fast3 {
                df * df / (r2 * r2.sqrt())
            } else {
                df.abs().powf(p) / r2.sqrt().powf(exponent)
            };
            acc += kernel;
        }
    }
    // double integral counts ordered pairs
    Ok((2.0 * acc * cell * cell).powf(1.0 / p))
}

/// Parameters for the three-sided equivalence report.
pub struct EquivalenceConfig<'a> {
    pub consts: &'a BallBoxConstants,
    pub s: f64,
    pub p: f64,
    pub shells: usize,
    pub proposals_per_shell: usize,
    pub seed: u64,
    pub quad: Quadrature,
    pub dir: DirConfig,
    pub icfg: IntegratorConfig,
}

/// Compare ‖f‖_{W^{s,p}_d(Ω)}, the middle quantity
/// ‖f‖_{L^p(Ω₂)} + Σ_{|w|≤κ} [f]_{W^{s/|w|,p}_{X_w}(Ω₂)}, and
/// ‖f‖_{W^{s,p}_d(Ω₃)}; reports both ratios.
pub fn equivalence_sides(
    basis: &CommutatorBasis,
    f: &Expr,
    omega: &Domain,
    omega2: &Domain,
    omega3: &Domain,
    cfg: &EquivalenceConfig,
    dist: &mut dyn FnMut(&[f64], &[f64]) -> Option<f64>,
) -> Result<Report> {
    if !omega.subset_of(omega2) || !omega2.subset_of(omega3) {
        return Err(Error::Schema("domains must be nested Ω ⊆ Ω₂ ⊆ Ω₃".into()));
    }
    let outer = |dom: &Domain, dist: &mut dyn FnMut(&[f64], &[f64]) -> Option<f64>| -> Result<f64> {
        let semi = seminorm_d(
            basis,
            f,
            dom,
            cfg.consts,
            cfg.s,
            cfg.p,
            cfg.shells,
            cfg.proposals_per_shell,
            cfg.seed,
            &cfg.icfg,
            dist,
        )?;
        Ok(lp_norm(f, dom, cfg.p, &cfg.quad)? + semi)
    };
    let left = outer(omega, dist)?;
    let right = outer(omega3, dist)?;
    let mut middle = lp_norm(f, omega2, cfg.p, &cfg.quad)?;
    for j in 1..=basis.len() {
        let l = basis.ell(j);
        middle += seminorm_dir(
            f,
            basis.field(j),
            omega2,
            cfg.s / l as f64,
            cfg.p,
            cfg.consts.r0,
            &cfg.dir,
            &cfg.icfg,
        )?;
    }
    let mut report = Report::new("equivalence_sides");
    report
        .set("left_norm", left)
        .set("middle_norm", middle)
        .set("right_norm", right)
        .set("ratio_middle_over_left", middle / left)
        .set("ratio_right_over_middle", right / middle);
    report.metadata.seed = cfg.seed;
    report.validate()?;
    Ok(report)
}
