//! Upper-bound estimators for the Carnot–Carathéodory distance d and its
//! commutator-weighted variant ρ, the ball-box distance proxy, and
//! point-to-point connection by generator legs.
//!
//! The estimators are upper bounds only: they minimize the scale r over
//! piecewise-constant admissible controls. Two-sidedness is obtained
//! empirically through the box proxy, never claimed analytically.

use crate::ballbox::{box_norm, select_maximal, BallBoxConstants, MultiIndex};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::flows::{approx_exp_legs, e_inverse, IntegratorConfig, Leg, PathPlan};
use crate::opt::{simplex_descent, SimplexConfig};
use crate::report::Report;
use crate::vf::{CommutatorBasis, VectorField};
use crate::MAX_DIM;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Which control family a path lives in: generator controls (d) or
/// commutator controls weighted by r^{l_j} (ρ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ControlKind {
    Cc,
    Rho,
}

/// A piecewise-constant control path on [0,1]. Optimizer output uses uniform
/// segment durations 1/K; concatenated candidates carry proportional
/// durations. Controls satisfy |u|_2 <= 1 per segment.
#[derive(Debug, Clone, Serialize)]
pub struct ControlPath {
    pub kind: ControlKind,
    /// The scale r multiplying the admissible velocities.
    pub scale: f64,
    pub segs: Vec<Vec<f64>>,
    pub durations: Vec<f64>,
}

impl ControlPath {
    pub fn empty(kind: ControlKind) -> ControlPath {
        ControlPath {
            kind,
            scale: 0.0,
            segs: Vec::new(),
            durations: Vec::new(),
        }
    }

    pub fn uniform(kind: ControlKind, scale: f64, segs: Vec<Vec<f64>>) -> ControlPath {
        let k = segs.len();
        ControlPath {
            kind,
            scale,
            segs,
            durations: vec![1.0 / k as f64; k],
        }
    }

    /// The same geometric path declared at a larger scale r >= self.scale:
    /// controls shrink so velocities are unchanged, staying admissible.
    pub fn rescaled(&self, basis: &CommutatorBasis, r: f64) -> ControlPath {
        if self.segs.is_empty() || r == self.scale {
            let mut c = self.clone();
            c.scale = r;
            return c;
        }
        let segs = self
            .segs
            .iter()
            .map(|u| {
                u.iter()
                    .enumerate()
                    .map(|(j, &uj)| match self.kind {
                        ControlKind::Cc => uj * self.scale / r,
                        ControlKind::Rho => {
                            uj * (self.scale / r).powi(basis.ell(j + 1) as i32)
                        }
                    })
                    .collect()
            })
            .collect();
        ControlPath {
            kind: self.kind,
            scale: r,
            segs,
            durations: self.durations.clone(),
        }
    }

    /// Concatenation with proportional time allocation: the result has scale
    /// a.scale + b.scale and traverses both paths exactly.
    pub fn concat(a: &ControlPath, b: &ControlPath) -> ControlPath {
        assert_eq!(a.kind, b.kind, "cannot concatenate different control kinds");
        if a.segs.is_empty() {
            return b.clone();
        }
        if b.segs.is_empty() {
            return a.clone();
        }
        let total = a.scale + b.scale;
        let (ta, tb) = (a.scale / total, b.scale / total);
        let mut segs = a.segs.clone();
        segs.extend(b.segs.iter().cloned());
        let mut durations: Vec<f64> = a.durations.iter().map(|&d| d * ta).collect();
        durations.extend(b.durations.iter().map(|&d| d * tb));
        ControlPath {
            kind: a.kind,
            scale: total,
            segs,
            durations,
        }
    }

    /// Reverse traversal: the witness for the swapped endpoint pair.
    pub fn reversed(&self) -> ControlPath {
        ControlPath {
            kind: self.kind,
            scale: self.scale,
            segs: self
                .segs
                .iter()
                .rev()
                .map(|u| u.iter().map(|&v| -v).collect())
                .collect(),
            durations: self.durations.iter().rev().copied().collect(),
        }
    }

    /// Tight replay of the path from `x` (per-segment Richardson refinement).
    pub fn endpoint(
        &self,
        basis: &CommutatorBasis,
        x: &[f64],
        icfg: &IntegratorConfig,
    ) -> Result<Vec<f64>> {
        let n = basis.dim();
        let fields = kind_fields(basis, self.kind);
        let weights = kind_weights(basis, self.kind, self.scale);
        let mut cur = [0.0; MAX_DIM];
        cur[..n].copy_from_slice(x);
        for (u, &dur) in self.segs.iter().zip(&self.durations) {
            let mut coeff = vec![0.0; fields.len()];
            for j in 0..fields.len() {
                coeff[j] = weights[j] * u[j];
            }
            segment_tight(&fields, &coeff, &mut cur[..n], dur, icfg)?;
        }
        Ok(cur[..n].to_vec())
    }
}

/// A value r with its feasibility witness; `value` upper-bounds the distance
/// up to the endpoint tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub endpoint_error: f64,
    pub witness: ControlPath,
}

/// Tuning for the control-optimization distance estimators.
#[derive(Debug, Clone)]
pub struct MetricConfig {
    /// Segments K per path.
    pub segments: usize,
    /// Random multi-starts per radius level.
    pub multi_starts: usize,
    /// Endpoint feasibility tolerance, scaled by (1 + |y|).
    pub endpoint_tol: f64,
    /// Give up (no path found) beyond this radius budget.
    pub r_max: f64,
    /// Bisection steps on r.
    pub bisect_iters: usize,
    /// Simplex evaluation budget per start.
    pub nm_evals: usize,
    /// Fixed RK4 substeps per segment in the optimization objective.
    pub fast_substeps: usize,
    /// Tight integrator for witness replay.
    pub integrator: IntegratorConfig,
    /// When set, the ball-box connection path is injected as a candidate
    /// witness, making feasibility structural for nearby pairs.
    pub ballbox: Option<BallBoxConstants>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            segments: 8,
            multi_starts: 16,
            endpoint_tol: 1e-3,
            r_max: 8.0,
            bisect_iters: 10,
            nm_evals: 240,
            fast_substeps: 2,
            integrator: IntegratorConfig::with_tol(1e-9),
            ballbox: BallBoxConstants::with_defaults(0.9, 2.0, 0.5).ok(),
        }
    }
}

fn kind_fields(basis: &CommutatorBasis, kind: ControlKind) -> Vec<&VectorField> {
    match kind {
        ControlKind::Cc => basis.generators().iter().collect(),
        ControlKind::Rho => basis.entries().iter().map(|(_, f)| f).collect(),
    }
}

fn kind_weights(basis: &CommutatorBasis, kind: ControlKind, r: f64) -> Vec<f64> {
    match kind {
        ControlKind::Cc => vec![r; basis.num_generators()],
        ControlKind::Rho => (1..=basis.len())
            .map(|j| r.powi(basis.ell(j) as i32))
            .collect(),
    }
}

// One RK4 pass of y' = sum_j coeff_j F_j(y) with a fixed number of substeps.
fn segment_fast(
    fields: &[&VectorField],
    coeff: &[f64],
    y: &mut [f64],
    duration: f64,
    substeps: usize,
) {
    let n = y.len();
    let h = duration / substeps as f64;
    let deriv = |pt: &[f64], out: &mut [f64]| {
        out[..n].fill(0.0);
        let mut buf = [0.0; MAX_DIM];
        for (f, &c) in fields.iter().zip(coeff) {
            if c == 0.0 {
                continue;
            }
            f.eval_into_raw(pt, &mut buf[..n]);
            for i in 0..n {
                out[i] += c * buf[i];
            }
        }
    };
    let mut k1 = [0.0; MAX_DIM];
    let mut k2 = [0.0; MAX_DIM];
    let mut k3 = [0.0; MAX_DIM];
    let mut k4 = [0.0; MAX_DIM];
    let mut tmp = [0.0; MAX_DIM];
    for _ in 0..substeps {
        deriv(y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        deriv(&tmp[..n], &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        deriv(&tmp[..n], &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        deriv(&tmp[..n], &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

// Same segment with Richardson step-halving to the integrator tolerance.
fn segment_tight(
    fields: &[&VectorField],
    coeff: &[f64],
    y: &mut [f64],
    duration: f64,
    icfg: &IntegratorConfig,
) -> Result<()> {
    let n = y.len();
    let mut steps = 1usize;
    let mut prev = [0.0; MAX_DIM];
    prev[..n].copy_from_slice(y);
    segment_fast(fields, coeff, &mut prev[..n], duration, steps);
    loop {
        steps *= 2;
        if steps > icfg.max_substeps {
            return Err(Error::NoConvergence {
                tol: icfg.tol,
                max_substeps: icfg.max_substeps,
            });
        }
        let mut cur = [0.0; MAX_DIM];
        cur[..n].copy_from_slice(y);
        segment_fast(fields, coeff, &mut cur[..n], duration, steps);
        let diff: f64 = (0..n).map(|i| (cur[i] - prev[i]).powi(2)).sum::<f64>().sqrt();
        if !diff.is_finite() {
            return Err(Error::NonFinite { point: y.to_vec() });
        }
        if diff < icfg.tol {
            y[..n].copy_from_slice(&cur[..n]);
            return Ok(());
        }
        prev = cur;
    }
}

struct Ctx<'a> {
    basis: &'a CommutatorBasis,
    kind: ControlKind,
    fields: Vec<&'a VectorField>,
    cfg: &'a MetricConfig,
    x: &'a [f64],
    y: &'a [f64],
    tol_abs: f64,
}

impl<'a> Ctx<'a> {
    fn dim_u(&self) -> usize {
        self.fields.len()
    }

    // radial projection of each segment onto the unit ball
    fn project(&self, flat: &[f64], out: &mut Vec<Vec<f64>>) {
        let du = self.dim_u();
        out.clear();
        for seg in flat.chunks(du) {
            let norm: f64 = seg.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = if norm > 1.0 { 1.0 / norm } else { 1.0 };
            out.push(seg.iter().map(|&v| v * s).collect());
        }
    }

    fn endpoint_fast(&self, r: f64, segs: &[Vec<f64>], durations: &[f64], out: &mut [f64]) {
        let n = self.basis.dim();
        let weights = kind_weights(self.basis, self.kind, r);
        out[..n].copy_from_slice(self.x);
        let mut coeff = vec![0.0; self.dim_u()];
        for (u, &dur) in segs.iter().zip(durations) {
            for j in 0..self.dim_u() {
                coeff[j] = weights[j] * u[j];
            }
            segment_fast(&self.fields, &coeff, &mut out[..n], dur, self.cfg.fast_substeps);
        }
    }

    fn err_of_segs(&self, r: f64, segs: &[Vec<f64>], durations: &[f64]) -> f64 {
        let n = self.basis.dim();
        let mut end = [0.0; MAX_DIM];
        self.endpoint_fast(r, segs, durations, &mut end[..n]);
        (0..n)
            .map(|i| (end[i] - self.y[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn err_flat(&self, r: f64, flat: &[f64], scratch: &mut Vec<Vec<f64>>) -> f64 {
        self.project(flat, scratch);
        let k = scratch.len();
        let durations = vec![1.0 / k as f64; k];
        self.err_of_segs(r, scratch, &durations)
    }

    // Sequential least-squares tracking: per segment, aim the admissible
    // velocity cone at the target.
    fn greedy_start(&self, r: f64) -> Vec<f64> {
        let n = self.basis.dim();
        let k = self.cfg.segments;
        let du = self.dim_u();
        let weights = kind_weights(self.basis, self.kind, r);
        let mut flat = Vec::with_capacity(k * du);
        let mut pos = [0.0; MAX_DIM];
        pos[..n].copy_from_slice(self.x);
        let mut buf = [0.0; MAX_DIM];
        for _ in 0..k {
            let mut a = nalgebra::DMatrix::zeros(n, du);
            for j in 0..du {
                self.fields[j].eval_into_raw(&pos[..n], &mut buf[..n]);
                for i in 0..n {
                    a[(i, j)] = weights[j] * buf[i] / k as f64;
                }
            }
            let target = nalgebra::DVector::from_fn(n, |i, _| self.y[i] - pos[i]);
            let svd = a.svd(true, true);
            let mut u = svd
                .solve(&target, 1e-12)
                .unwrap_or_else(|_| nalgebra::DVector::zeros(du));
            let norm = u.norm();
            if norm > 1.0 {
                u /= norm;
            }
            let seg: Vec<f64> = u.iter().copied().collect();
            let mut coeff = vec![0.0; du];
            for j in 0..du {
                coeff[j] = weights[j] * seg[j];
            }
            segment_fast(
                &self.fields,
                &coeff,
                &mut pos[..n],
                1.0 / k as f64,
                self.cfg.fast_substeps,
            );
            flat.extend(seg);
        }
        flat
    }

    // Multi-start simplex descent on the flat control vector at a fixed r.
    // Returns the best (error, projected segments); deterministic per seed.
    fn optimize(
        &self,
        r: f64,
        warm: &[Vec<f64>],
        n_random: usize,
        seed: u64,
        stream: u64,
    ) -> (f64, Vec<Vec<f64>>) {
        let k = self.cfg.segments;
        let du = self.dim_u();
        let mut starts: Vec<Vec<f64>> = Vec::new();
        starts.extend(warm.iter().cloned());
        starts.push(self.greedy_start(r));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        for _ in 0..n_random {
            starts.push((0..k * du).map(|_| rng.gen_range(-1.0..1.0)).collect());
        }
        let scfg = SimplexConfig {
            max_evals: self.cfg.nm_evals,
            init_step: 0.3,
            tol: (0.01 * self.tol_abs).max(1e-12),
        };
        let mut best_err = f64::INFINITY;
        let mut best_flat: Vec<f64> = vec![0.0; k * du];
        let mut scratch: Vec<Vec<f64>> = Vec::new();
        for s in &starts {
            let mut obj = |flat: &[f64]| self.err_flat(r, flat, &mut scratch);
            let (flat, err) = simplex_descent(&mut obj, s, &scfg);
            if err < best_err {
                best_err = err;
                best_flat = flat;
            }
            if best_err <= 0.01 * self.tol_abs {
                break;
            }
        }
        let mut segs = Vec::new();
        self.project(&best_flat, &mut segs);
        (best_err, segs)
    }

    // Feasibility at radius r: first check rescaled candidates (exact
    // witnesses carried in from concatenation/embedding), then optimize.
    fn feasible_at(
        &self,
        r: f64,
        warm: &[Vec<f64>],
        candidates: &[ControlPath],
        seed: u64,
        stream: u64,
        n_random: usize,
    ) -> Option<(ControlPath, f64, Option<Vec<f64>>)> {
        for c in candidates {
            if c.scale <= r && !c.segs.is_empty() {
                let scaled = c.rescaled(self.basis, r);
                let err = self.err_of_segs(r, &scaled.segs, &scaled.durations);
                if err <= self.tol_abs {
                    if let Some(terr) = self.tight_err(&scaled) {
                        if terr <= self.tol_abs {
                            return Some((scaled, terr, None));
                        }
                    }
                }
            }
        }
        let (err, segs) = self.optimize(r, warm, n_random, seed, stream);
        if err <= self.tol_abs {
            let flat: Vec<f64> = segs.iter().flatten().copied().collect();
            let path = ControlPath::uniform(self.kind, r, segs);
            // the fast objective can flatter the endpoint; only a tight
            // replay within tolerance counts as feasible
            let terr = self.tight_err(&path)?;
            if terr <= self.tol_abs {
                return Some((path, terr, Some(flat)));
            }
        }
        None
    }

    fn tight_err(&self, path: &ControlPath) -> Option<f64> {
        let end = path.endpoint(self.basis, self.x, &self.cfg.integrator).ok()?;
        Some(
            end.iter()
                .zip(self.y)
                .map(|(&a, &b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt(),
        )
    }
}

fn distance_upper(
    basis: &CommutatorBasis,
    kind: ControlKind,
    x: &[f64],
    y: &[f64],
    cfg: &MetricConfig,
    seed: u64,
    candidates: &[ControlPath],
) -> Result<DistanceEstimate> {
    let n = basis.dim();
    let ynorm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol_abs = cfg.endpoint_tol * (1.0 + ynorm);
    let gap: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (b - a).powi(2))
        .sum::<f64>()
        .sqrt();
    if gap <= tol_abs {
        return Ok(DistanceEstimate {
            value: 0.0,
            endpoint_error: gap,
            witness: ControlPath::empty(kind),
        });
    }
    let ctx = Ctx {
        basis,
        kind,
        fields: kind_fields(basis, kind),
        cfg,
        x,
        y,
        tol_abs,
    };

    // Inject the ball-box connection path as an exact generator-leg witness;
    // it makes feasibility independent of the simplex search for pairs the
    // box inversion can resolve.
    let mut all_candidates: Vec<ControlPath> = candidates.to_vec();
    if let Some(consts) = &cfg.ballbox {
        if let Ok(Some(b)) = box_resolve(basis, x, y, consts, &cfg.integrator) {
            let mut legs: Vec<Leg> = Vec::new();
            for (j, &ij) in b.index.entries().iter().enumerate().rev() {
                if b.h[j] != 0.0 {
                    legs.extend(approx_exp_legs(basis.word(ij), b.h[j]));
                }
            }
            if let Some(c) = legs_to_control(kind, ctx.dim_u(), &legs) {
                all_candidates.push(c);
            }
        }
    }
    let candidates = &all_candidates[..];

    // doubling phase: find a feasible radius
    let mut r = gap.max(10.0 * tol_abs);
    // a candidate already known feasible caps the search from above
    let cand_cap = candidates
        .iter()
        .filter(|c| !c.segs.is_empty())
        .map(|c| c.scale)
        .fold(f64::INFINITY, f64::min);
    if cand_cap < r {
        r = cand_cap;
    }
    let mut level = 0u64;
    let mut found: Option<(f64, ControlPath, f64, Option<Vec<f64>>)> = None;
    loop {
        level += 1;
        if let Some((w, err, warm)) =
            ctx.feasible_at(r, &[], candidates, seed, level, cfg.multi_starts)
        {
            found = Some((r, w, err, warm));
            break;
        }
        r *= 2.0;
        if r > cfg.r_max {
            break;
        }
    }
    let (mut hi, mut witness, mut werr, mut warm) = match found {
        Some(f) => f,
        None => {
            return Err(Error::NoPathFound { budget: cfg.r_max });
        }
    };

    // bisection on r with warm-started re-optimization
    let mut lo = hi / 2.0;
    for _ in 0..cfg.bisect_iters {
        let mid = 0.5 * (lo + hi);
        level += 1;
        let warm_slice: Vec<Vec<f64>> = warm.iter().cloned().collect();
        match ctx.feasible_at(
            mid,
            &warm_slice,
            candidates,
            seed,
            level,
            (cfg.multi_starts / 4).max(2),
        ) {
            Some((w, err, nwarm)) => {
                hi = mid;
                witness = w;
                werr = err;
                if nwarm.is_some() {
                    warm = nwarm;
                }
            }
            None => lo = mid,
        }
    }

    // tight replay for the reported endpoint error
    let endpoint = witness.endpoint(basis, x, &cfg.integrator)?;
    let tight_err: f64 = endpoint
        .iter()
        .zip(y)
        .map(|(&a, &b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let _ = werr;
    let _ = n;
    Ok(DistanceEstimate {
        value: hi,
        endpoint_error: tight_err,
        witness,
    })
}

/// Upper bound for the CC distance d(x,y) by control optimization.
pub fn cc_distance_upper(
    basis: &CommutatorBasis,
    x: &[f64],
    y: &[f64],
    cfg: &MetricConfig,
    seed: u64,
) -> Result<DistanceEstimate> {
    distance_upper(basis, ControlKind::Cc, x, y, cfg, seed, &[])
}

/// As [`cc_distance_upper`], with extra candidate witnesses injected into the
/// search (used for triangle-inequality coupling).
pub fn cc_distance_upper_with_candidates(
    basis: &CommutatorBasis,
    x: &[f64],
    y: &[f64],
    cfg: &MetricConfig,
    seed: u64,
    candidates: &[ControlPath],
) -> Result<DistanceEstimate> {
    distance_upper(basis, ControlKind::Cc, x, y, cfg, seed, candidates)
}

/// Upper bound for the weighted distance ρ(x,y): controls range over all
/// commutators Y_j with velocity weights r^{l_j}.
pub fn rho_distance_upper(
    basis: &CommutatorBasis,
    x: &[f64],
    y: &[f64],
    cfg: &MetricConfig,
    seed: u64,
) -> Result<DistanceEstimate> {
    distance_upper(basis, ControlKind::Rho, x, y, cfg, seed, &[])
}

/// ρ estimator with candidate injection. Any d-witness embeds as a ρ-witness
/// (generator coordinates carry over, others zero), which makes ρ_est ≤ d_est
/// structural when the embedded witness is passed in.
pub fn rho_distance_upper_with_candidates(
    basis: &CommutatorBasis,
    x: &[f64],
    y: &[f64],
    cfg: &MetricConfig,
    seed: u64,
    candidates: &[ControlPath],
) -> Result<DistanceEstimate> {
    distance_upper(basis, ControlKind::Rho, x, y, cfg, seed, candidates)
}

/// Embed a d-witness into the ρ control family: generator coordinates are
/// copied (length-1 weights agree), commutator coordinates are zero.
pub fn embed_cc_witness(basis: &CommutatorBasis, w: &ControlPath) -> ControlPath {
    assert_eq!(w.kind, ControlKind::Cc);
    let q = basis.len();
    let m = basis.num_generators();
    ControlPath {
        kind: ControlKind::Rho,
        scale: w.scale,
        segs: w
            .segs
            .iter()
            .map(|u| {
                let mut b = vec![0.0; q];
                // generators come first in the (length, lex) basis order
                b[..m].copy_from_slice(&u[..m]);
                b
            })
            .collect(),
        durations: w.durations.clone(),
    }
}

// Turn a generator-leg plan into an admissible unit-control path: scale is
// the total variation, each leg becomes one segment with a ±1 coordinate
// control. Exact: velocity r·(±e_j) over duration |τ|/r covers |τ|.
fn legs_to_control(kind: ControlKind, dim_u: usize, legs: &[Leg]) -> Option<ControlPath> {
    let total: f64 = legs.iter().map(|l| l.duration.abs()).sum();
    if total == 0.0 {
        return None;
    }
    let mut segs = Vec::with_capacity(legs.len());
    let mut durations = Vec::with_capacity(legs.len());
    for leg in legs {
        if leg.duration == 0.0 {
            continue;
        }
        let mut u = vec![0.0; dim_u];
        u[leg.index - 1] = leg.duration.signum();
        segs.push(u);
        durations.push(leg.duration.abs() / total);
    }
    Some(ControlPath {
        kind,
        scale: total,
        segs,
        durations,
    })
}

struct BoxResolution {
    index: MultiIndex,
    h: Vec<f64>,
    value: f64,
}

fn box_resolve(
    basis: &CommutatorBasis,
    x: &[f64],
    y: &[f64],
    consts: &BallBoxConstants,
    icfg: &IntegratorConfig,
) -> Result<Option<BoxResolution>> {
    let gap: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (b - a).powi(2))
        .sum::<f64>()
        .sqrt();
    if gap == 0.0 {
        return Ok(None);
    }
    let newton_tol = 1e-9 * (1.0 + gap);
    let mut best: Option<BoxResolution> = None;
    let mut r = consts.r0;
    for _ in 0..40 {
        let index = select_maximal(basis, x, consts.c_hat * r)?;
        let ok = match e_inverse(basis, &index, x, y, consts.c_hat * r, icfg, newton_tol) {
            Ok(h) => {
                let norm = box_norm(basis, &index, &h);
                if norm <= consts.eps_hat * consts.c_hat * r {
                    best = Some(BoxResolution {
                        index,
                        h,
                        value: norm / (consts.eps_hat * consts.c_hat),
                    });
                    true
                } else {
                    false
                }
            }
            Err(_) => false,
        };
        if !ok {
            break;
        }
        r *= 0.5;
        if r < 1e-9 {
            break;
        }
    }
    match best {
        Some(b) => Ok(Some(b)),
        None => Err(Error::OutOfRange { r0: consts.r0 }),
    }
}

/// Two-sided distance proxy from the ball-box inversion: descend dyadic radius
/// levels while E_inverse succeeds inside the box, return ‖h‖_I/(ε̂Ĉ) at the
/// smallest successful level.
pub fn box_distance(
    basis: &CommutatorBasis,
    x: &[f64],
    y: &[f64],
    consts: &BallBoxConstants,
    icfg: &IntegratorConfig,
) -> Result<f64> {
    Ok(box_resolve(basis, x, y, consts, icfg)?
        .map(|b| b.value)
        .unwrap_or(0.0))
}

/// Approximate metric-ball membership at radius r: y belongs to the proxy
/// ball when E_inverse at level r lands with ‖h‖_I < r.
pub fn ball_contains(
    basis: &CommutatorBasis,
    x: &[f64],
    y: &[f64],
    r: f64,
    consts: &BallBoxConstants,
    icfg: &IntegratorConfig,
) -> bool {
    let index = match select_maximal(basis, x, consts.c_hat * r) {
        Ok(i) => i,
        Err(_) => return false,
    };
    match e_inverse(basis, &index, x, y, consts.c_hat * r, icfg, 1e-8) {
        Ok(h) => box_norm(basis, &index, &h) < r,
        Err(_) => false,
    }
}

/// Connect x to y by a piecewise integral curve of the generators: the legs
/// of the approximate exponentials at the recovered box coordinates. The leg
/// count is bounded by a function of (m, κ) only.
pub fn connect_points(
    basis: &CommutatorBasis,
    x: &[f64],
    y: &[f64],
    consts: &BallBoxConstants,
    icfg: &IntegratorConfig,
) -> Result<PathPlan> {
    let resolution = box_resolve(basis, x, y, consts, icfg)?;
    let mut legs: Vec<Leg> = Vec::new();
    if let Some(b) = resolution {
        // the h_n factor acts first
        for (j, &ij) in b.index.entries().iter().enumerate().rev() {
            if b.h[j] != 0.0 {
                legs.extend(approx_exp_legs(basis.word(ij), b.h[j]));
            }
        }
    }
    Ok(PathPlan {
        start: x.to_vec(),
        legs,
    })
}

/// Sample pairs in the domain and report quantiles of d_est / |x−y|^{1/κ}.
pub fn holder_ratio_scan(
    basis: &CommutatorBasis,
    domain: &Domain,
    kappa: usize,
    count: usize,
    cfg: &MetricConfig,
    seed: u64,
) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(count);
    let mut failures = 0usize;
    for _ in 0..count {
        let x = domain.sample(&mut rng);
        let y = domain.sample(&mut rng);
        let gap: f64 = x
            .iter()
            .zip(&y)
            .map(|(&a, &b)| (b - a).powi(2))
            .sum::<f64>()
            .sqrt();
        if gap < 1e-6 {
            continue;
        }
        match cc_distance_upper(basis, &x, &y, cfg, seed) {
            Ok(est) => ratios.push(est.value / gap.powf(1.0 / kappa as f64)),
            Err(_) => failures += 1,
        }
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| -> f64 {
        if ratios.is_empty() {
            return 0.0;
        }
        let idx = ((ratios.len() - 1) as f64 * q).round() as usize;
        ratios[idx]
    };
    let mut report = Report::new("holder_ratio_scan");
    report
        .set("max_ratio", ratios.last().copied().unwrap_or(0.0))
        .set("median_ratio", quantile(0.5))
        .set("q90_ratio", quantile(0.9))
        .set("pairs", ratios.len() as f64)
        .set("failures", failures as f64);
    report.metadata.seed = seed;
    report.validate()?;
    Ok(report)
}
