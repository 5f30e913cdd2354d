//! Verification suites: each one runs a self-contained experiment against a
//! scenario, compares against thresholds pinned in the scenario file (with
//! documented defaults), and returns a [`Report`] with `passed` set.

use crate::ballbox::{
    lambda_i, sample_box, select_maximal, volume_proxy, BallBoxConstants, MultiIndex,
};
use crate::error::{Error, Result};
use crate::fit::fit_loglog_slope;
use crate::flows::{approx_exp, e_inverse, e_map, flow, IntegratorConfig};
use crate::metric::{ball_contains, box_distance, ControlKind, ControlPath};
use crate::report::Report;
use crate::scenario::Scenario;
use crate::seminorms::{
    fd_det, folland_stein_rhs, sample_pairs, seminorm_d_cached, seminorm_dir, DirConfig,
    Quadrature,
};
use crate::vf::{CommutatorBasis, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Run one named suite.
pub fn run_suite(sc: &Scenario, name: &str) -> Result<Report> {
    match name {
        "heisenberg_identity" => verify_heisenberg_identity(sc),
        "anisotropic" => verify_anisotropic(sc),
        "commutator_directional" => verify_commutator_directional(sc),
        "sup_holder" => verify_sup_holder(sc),
        "ballbox" => verify_ballbox(sc),
        "volume" => verify_volume(sc),
        "convergence" => convergence_order_suite(sc),
        other => Err(Error::Schema(format!("unknown suite `{other}`"))),
    }
}

/// Run every suite listed in the scenario, in order.
pub fn run_all(sc: &Scenario) -> Result<Vec<Report>> {
    sc.suites.iter().map(|s| run_suite(sc, s)).collect()
}

fn finish(report: &mut Report, sc: &Scenario, pass: bool) -> Result<()> {
    report.passed = Some(pass);
    report.metadata.scenario_hash = sc.hash();
    report.metadata.seed = sc.seed;
    report.stamp();
    report.validate()
}

fn sample_points(sc: &Scenario, count: usize, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(stream);
    (0..count).map(|_| sc.omega.sample(&mut rng)).collect()
}

/// Group-commutator identity on the Heisenberg group: the approximate
/// exponential of [X1,X2] at parameter t moves (x,y,z) to (x, y, z - 4t)
/// exactly, and the reversed word moves it to (x, y, z + 4t).
pub fn verify_heisenberg_identity(sc: &Scenario) -> Result<Report> {
    let gens = sc.generator_fields()?;
    if sc.dimension != 3 || gens.len() != 2 {
        return Err(Error::Schema(
            "heisenberg_identity requires 2 generators in dimension 3".into(),
        ));
    }
    let icfg = sc.integrator();
    let xs = sample_points(sc, sc.counts.sample_points, 1);
    let w12 = Word::parse("12", 2)?;
    let w21 = Word::parse("21", 2)?;
    let s_grid = [0.05, 0.1, 0.2, 0.4];
    let mut max_err = 0.0f64;
    for x in &xs {
        for &s in &s_grid {
            let t = s * s;
            let fwd = approx_exp(&gens, &w12, t, x, &icfg)?;
            let bwd = approx_exp(&gens, &w21, t, x, &icfg)?;
            let e_fwd = [x[0], x[1], x[2] - 4.0 * t];
            let e_bwd = [x[0], x[1], x[2] + 4.0 * t];
            for i in 0..3 {
                max_err = max_err
                    .max((fwd[i] - e_fwd[i]).abs())
                    .max((bwd[i] - e_bwd[i]).abs());
            }
        }
    }
    let tol = sc.threshold("fox_max_error", 1e-8);
    let mut report = Report::new("heisenberg_identity");
    report.set("max_error", max_err).threshold("fox_max_error", tol);
    report
        .metadata
        .counts
        .insert("base_points".into(), xs.len() as u64);
    finish(&mut report, sc, max_err <= tol)?;
    Ok(report)
}

fn box_dist_closure<'a>(
    basis: &'a CommutatorBasis,
    consts: &'a BallBoxConstants,
    icfg: &'a IntegratorConfig,
) -> impl FnMut(&[f64], &[f64]) -> Option<f64> + 'a {
    move |x: &[f64], y: &[f64]| {
        box_distance(basis, x, y, consts, icfg)
            .ok()
            .filter(|&d| d > 0.0)
    }
}

/// The metric fractional seminorm against the Folland–Stein right-hand side:
/// the ratio must stabilize under two doublings of the proposal budget.
pub fn verify_anisotropic(sc: &Scenario) -> Result<Report> {
    let basis = sc.basis()?;
    let gens = sc.generator_fields()?;
    let f = sc.f_expr()?;
    let consts = sc.consts()?;
    let icfg = sc.integrator();
    let quad = Quadrature::Midpoint { points_per_axis: 20 };

    let mut dist = box_dist_closure(&basis, &consts, &icfg);
    let mut vol = |x: &[f64], r: f64| volume_proxy(&basis, x, r);
    let cache = sample_pairs(
        &basis,
        &sc.omega,
        &consts,
        sc.counts.shells,
        sc.counts.pairs,
        sc.seed,
        &icfg,
        &mut dist,
        &mut vol,
    )?;
    let quarter = cache.truncated((sc.counts.pairs / 4).max(1));
    let half = cache.truncated((sc.counts.pairs / 2).max(1));

    let stability = sc.threshold("stability", 0.25);
    let mut report = Report::new("anisotropic");
    report.threshold("stability", stability);
    let mut pass = true;
    for &s in &sc.s_values {
        for &p in &sc.p_values {
            let rhs = folland_stein_rhs(&f, &gens, &sc.omega0, p, &quad)?;
            let v1 = seminorm_d_cached(&f, s, p, &quarter, None)?.0 / rhs;
            let v2 = seminorm_d_cached(&f, s, p, &half, None)?.0 / rhs;
            let (v3, strata) = seminorm_d_cached(&f, s, p, &cache, None)?;
            let v3 = v3 / rhs;
            let drift1 = if v1 > 0.0 { (v2 - v1).abs() / v1 } else { 1.0 };
            let drift2 = if v2 > 0.0 { (v3 - v2).abs() / v2 } else { 1.0 };
            pass &= v3.is_finite() && v3 > 0.0 && drift1 <= stability && drift2 <= stability;
            report
                .set(format!("ratio_s{s}_p{p}"), v3)
                .set(format!("drift1_s{s}_p{p}"), drift1)
                .set(format!("drift2_s{s}_p{p}"), drift2);
            if report.strata.is_empty() {
                report.strata = strata;
            }
        }
    }
    report
        .metadata
        .counts
        .insert("accepted_pairs".into(), cache.samples.len() as u64);
    report
        .metadata
        .counts
        .insert("failed_distances".into(), cache.failed_count as u64);
    finish(&mut report, sc, pass)?;
    Ok(report)
}

/// Directional seminorms along every commutator of the basis, with the
/// fractional order divided by the word length; each ratio against the
/// Folland–Stein right-hand side must stabilize under doubling of the
/// x-sample count.
pub fn verify_commutator_directional(sc: &Scenario) -> Result<Report> {
    let basis = sc.basis()?;
    let gens = sc.generator_fields()?;
    let f = sc.f_expr()?;
    let icfg = sc.integrator();
    let quad = Quadrature::Midpoint { points_per_axis: 20 };
    let s = sc.s_values[0];
    let p = sc.p_values[0];
    let rhs = folland_stein_rhs(&f, &gens, &sc.omega0, p, &quad)?;
    let stability = sc.threshold("stability", 0.25);

    let mut report = Report::new("commutator_directional");
    report.threshold("stability", stability);
    let mut pass = true;
    for j in 1..=basis.len() {
        let l = basis.ell(j);
        let eps = s / l as f64;
        let base = DirConfig {
            x_count: sc.counts.x_count,
            t_points: sc.counts.t_points,
            seed: sc.seed,
            ..Default::default()
        };
        let doubled = DirConfig {
            x_count: 2 * sc.counts.x_count,
            ..base.clone()
        };
        let v1 = seminorm_dir(&f, basis.field(j), &sc.omega, eps, p, sc.r0, &base, &icfg)?;
        let v2 = seminorm_dir(&f, basis.field(j), &sc.omega, eps, p, sc.r0, &doubled, &icfg)?;
        let drift = if v1.max(v2) < 1e-12 {
            0.0 // the direction annihilates f; zero is stable
        } else if v1 > 0.0 {
            (v2 - v1).abs() / v1
        } else {
            1.0
        };
        pass &= drift <= stability && v2.is_finite();
        let w = basis.word(j);
        report
            .set(format!("ratio_{w}"), v2 / rhs)
            .set(format!("drift_{w}"), drift);
    }
    finish(&mut report, sc, pass)?;
    Ok(report)
}

/// Pointwise Hölder bound along the deepest commutator: the sup of
/// |f(e^{tau X_w} x) - f(x)| / |tau|^{1/|w|} over x in Omega and |tau| <= r0
/// must be controlled by the sup of sum_j |X_j f| over Omega0.
pub fn verify_sup_holder(sc: &Scenario) -> Result<Report> {
    let basis = sc.basis()?;
    let gens = sc.generator_fields()?;
    let f = sc.f_expr()?;
    let icfg = sc.integrator();
    // first basis entry of maximal word length
    let deepest = (1..=basis.len())
        .max_by_key(|&j| basis.ell(j))
        .expect("basis is nonempty");
    let j = (1..=basis.len())
        .find(|&j| basis.ell(j) == basis.ell(deepest))
        .unwrap();
    let l = basis.ell(j);
    let z = basis.field(j);

    // geometric tau grid up to r0, both signs, incremental flows
    let m = 16usize;
    let tau_min = sc.r0 / 64.0;
    let g = (sc.r0 / tau_min).powf(1.0 / (m - 1) as f64);
    let taus: Vec<f64> = (0..m).map(|k| tau_min * g.powi(k as i32)).collect();
    let xs = sample_points(sc, sc.counts.sample_points, 2);
    let mut sup_ratio = 0.0f64;
    for x in &xs {
        let fx = f.eval_raw(x);
        for sign in [1.0f64, -1.0] {
            let mut pt = x.clone();
            let mut prev = 0.0;
            for &tau in &taus {
                pt = flow(z, &pt, sign * (tau - prev), &icfg)?;
                prev = tau;
                if !sc.omega0.contains(&pt) {
                    continue;
                }
                let ratio = (f.eval_raw(&pt) - fx).abs() / tau.powf(1.0 / l as f64);
                sup_ratio = sup_ratio.max(ratio);
            }
        }
    }

    // sup of the horizontal gradient bound over Omega0: Monte Carlo plus the
    // corners, where affine-in-each-variable integrands attain their maxima
    let grads: Vec<_> = gens.iter().map(|g| g.apply_to(&f).simplify()).collect();
    let bound_at = |x: &[f64]| grads.iter().map(|g| g.eval_raw(x).abs()).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(3);
    let mut sup_grad = 0.0f64;
    for _ in 0..sc.counts.x_count {
        sup_grad = sup_grad.max(bound_at(&sc.omega0.sample(&mut rng)));
    }
    let n = sc.dimension;
    for mask in 0..(1usize << n) {
        let corner: Vec<f64> = (0..n)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    sc.omega0.hi[i]
                } else {
                    sc.omega0.lo[i]
                }
            })
            .collect();
        sup_grad = sup_grad.max(bound_at(&corner));
    }

    let c = sc.threshold("sup_holder_c", 1.0);
    let mut report = Report::new("sup_holder");
    report
        .set("sup_holder_ratio", sup_ratio)
        .set("sup_gradient_bound", sup_grad)
        .set("word_length", l as f64)
        .threshold("sup_holder_c", c);
    finish(&mut report, sc, sup_ratio <= c * sup_grad)?;
    Ok(report)
}

fn unit_ball_sample(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1.0 {
        for v in &mut u {
            *v /= norm;
        }
    }
    u
}

/// Structure of the ball-box map at maximal tuples: coordinate round-trips
/// (injectivity spot-check), inclusion of rho-reachable sets in the box
/// image, and the Jacobian determinant sandwich against |lambda_I(x)|.
pub fn verify_ballbox(sc: &Scenario) -> Result<Report> {
    let basis = sc.basis()?;
    let consts = sc.consts()?;
    let icfg = sc.integrator();
    let radii = [sc.r0 / 4.0, sc.r0 / 2.0, sc.r0];
    let xs = sample_points(sc, sc.counts.sample_points, 4);

    let roundtrip_tol = sc.threshold("roundtrip_tol", 1e-6);
    let inclusion_slack = sc.threshold("inclusion_slack", 1.05);
    let jacobian_c = sc.threshold("jacobian_c", 4.0);

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(5);
    let mut max_roundtrip = 0.0f64;
    let mut max_inclusion = 0.0f64;
    let mut min_jac = f64::INFINITY;
    let mut max_jac = 0.0f64;
    let mut select_failures = 0usize;
    let mut solve_failures = 0usize;

    for x in &xs {
        for &r in &radii {
            let index: MultiIndex = match select_maximal(&basis, x, r) {
                Ok(i) => i,
                Err(_) => {
                    select_failures += 1;
                    continue;
                }
            };
            let scale_j: Vec<f64> = index
                .entries()
                .iter()
                .map(|&i| r.powi(basis.ell(i) as i32))
                .collect();

            // (i) round-trip: h -> E(h) -> E^{-1} recovers h in scaled units
            for h in sample_box(&basis, &index, consts.eps_hat * r, 8, rng.gen()) {
                let y = e_map(&basis, &index, x, &h, &icfg)?;
                match e_inverse(&basis, &index, x, &y, r, &icfg, sc.tolerances.newton) {
                    Ok(hr) => {
                        for ((a, b), w) in hr.iter().zip(&h).zip(&scale_j) {
                            max_roundtrip = max_roundtrip.max((a - b).abs() / w);
                        }
                    }
                    Err(_) => solve_failures += 1,
                }
            }

            // (ii) inclusion: endpoints of admissible rho-paths of budget
            // r / c_hat must land in the box image Q_I(eps_hat * r)
            for _ in 0..8 {
                let segs: Vec<Vec<f64>> = (0..4)
                    .map(|_| unit_ball_sample(&mut rng, basis.len()))
                    .collect();
                let path = ControlPath::uniform(ControlKind::Rho, r / consts.c_hat, segs);
                let y = path.endpoint(&basis, x, &icfg)?;
                match e_inverse(&basis, &index, x, &y, r, &icfg, sc.tolerances.newton) {
                    Ok(h) => {
                        let norm = crate::ballbox::box_norm(&basis, &index, &h);
                        max_inclusion = max_inclusion.max(norm / (consts.eps_hat * r));
                    }
                    Err(_) => solve_failures += 1,
                }
            }

            // (iii) Jacobian sandwich: |det dE/dh| against |lambda_I(x)|
            let lam = lambda_i(&basis, &index, x).abs();
            for h in sample_box(&basis, &index, consts.eps_hat * r, 4, rng.gen()) {
                let det = fd_det(&basis, &index, x, &h, &scale_j, &icfg)?.abs();
                let ratio = det / lam;
                min_jac = min_jac.min(ratio);
                max_jac = max_jac.max(ratio);
            }
        }
    }

    let jac_c_emp = if min_jac > 0.0 && min_jac.is_finite() {
        max_jac.max(1.0 / min_jac)
    } else {
        f64::INFINITY
    };
    let pass = solve_failures == 0
        && max_roundtrip <= roundtrip_tol
        && max_inclusion <= inclusion_slack
        && jac_c_emp.is_finite()
        && jac_c_emp <= jacobian_c;

    let mut report = Report::new("ballbox");
    report
        .set("max_roundtrip_error", max_roundtrip)
        .set("max_inclusion_ratio", max_inclusion)
        .set(
            "jacobian_c_empirical",
            if jac_c_emp.is_finite() { jac_c_emp } else { -1.0 },
        )
        .threshold("roundtrip_tol", roundtrip_tol)
        .threshold("inclusion_slack", inclusion_slack)
        .threshold("jacobian_c", jacobian_c);
    report
        .metadata
        .counts
        .insert("select_failures".into(), select_failures as u64);
    report
        .metadata
        .counts
        .insert("solve_failures".into(), solve_failures as u64);
    finish(&mut report, sc, pass)?;
    Ok(report)
}

/// Monte Carlo Lebesgue volume of proxy metric balls against the two-sided
/// proxy max_I |lambda_I| r^{l(I)}: the log-log slopes must agree and the
/// values must stay within a constant factor.
pub fn verify_volume(sc: &Scenario) -> Result<Report> {
    let basis = sc.basis()?;
    let consts = sc.consts()?;
    let icfg = sc.integrator();
    let x = sc.omega.center();
    let radii = [sc.r0 / 8.0, sc.r0 / 4.0, sc.r0 / 2.0];

    let mut mcs = Vec::new();
    let mut proxies = Vec::new();
    let mut ratio_max = 0.0f64;
    for (k, &r) in radii.iter().enumerate() {
        // anisotropic bounding box from images of the covering box Q_I(r)
        let index = select_maximal(&basis, &x, consts.c_hat * r)?;
        let mut lo = vec![f64::INFINITY; sc.dimension];
        let mut hi = vec![f64::NEG_INFINITY; sc.dimension];
        for h in sample_box(&basis, &index, 1.05 * r, 128, sc.seed ^ 0x9e37) {
            let y = e_map(&basis, &index, &x, &h, &icfg)?;
            for i in 0..sc.dimension {
                lo[i] = lo[i].min(y[i]);
                hi[i] = hi[i].max(y[i]);
            }
        }
        for i in 0..sc.dimension {
            let pad = 0.1 * (hi[i] - lo[i]).max(1e-9);
            lo[i] -= pad;
            hi[i] += pad;
        }
        let mc = crate::ballbox::ball_volume_mc(
            &x,
            r,
            &lo,
            &hi,
            sc.counts.mc_samples,
            sc.seed + k as u64,
            |a, b| {
                if ball_contains(&basis, a, b, r, &consts, &icfg) {
                    Some(0.0)
                } else {
                    None
                }
            },
        );
        let px = volume_proxy(&basis, &x, r);
        if mc > 0.0 && px > 0.0 {
            ratio_max = ratio_max.max(mc / px).max(px / mc);
        } else {
            ratio_max = f64::INFINITY;
        }
        mcs.push(mc);
        proxies.push(px);
    }
    let slope_mc = fit_loglog_slope(&radii, &mcs).unwrap_or(f64::NAN);
    let slope_px = fit_loglog_slope(&radii, &proxies).unwrap_or(f64::NAN);

    let slope_tol = sc.threshold("volume_slope_tol", 0.3);
    let ratio_factor = sc.threshold("volume_ratio_factor", 10.0);
    let pass = slope_mc.is_finite()
        && slope_px.is_finite()
        && (slope_mc - slope_px).abs() <= slope_tol
        && ratio_max <= ratio_factor;

    let mut report = Report::new("volume");
    report
        .set("slope_mc", if slope_mc.is_finite() { slope_mc } else { -1.0 })
        .set("slope_proxy", if slope_px.is_finite() { slope_px } else { -1.0 })
        .set("ratio_max", if ratio_max.is_finite() { ratio_max } else { -1.0 })
        .threshold("volume_slope_tol", slope_tol)
        .threshold("volume_ratio_factor", ratio_factor);
    for (k, &r) in radii.iter().enumerate() {
        report
            .set(format!("mc_r{r}"), mcs[k])
            .set(format!("proxy_r{r}"), proxies[k]);
    }
    report
        .metadata
        .counts
        .insert("mc_samples_per_radius".into(), sc.counts.mc_samples as u64);
    finish(&mut report, sc, pass)?;
    Ok(report)
}

/// Convergence order of the approximate exponentials: for each basis word w
/// the endpoint error against the exact flow of X_w must decay like
/// t^{(|w|+1)/|w|}, unless the construction is exact on this system (errors
/// at integrator noise level), which counts as a pass.
pub fn convergence_order_suite(sc: &Scenario) -> Result<Report> {
    let basis = sc.basis()?;
    let gens = sc.generator_fields()?;
    let icfg = sc.integrator();
    let mut xs = vec![sc.omega.center()];
    xs.extend(sample_points(sc, 2, 6));
    let ts: Vec<f64> = (0..7).map(|k| 0.4 * 0.5f64.powi(k)).collect();
    let floor = sc.threshold("exactness_floor", 1e-7);
    let slack = sc.threshold("order_slack", 0.2);

    let mut report = Report::new("convergence");
    report.threshold("exactness_floor", floor).threshold("order_slack", slack);
    let mut pass = true;
    for j in 1..=basis.len() {
        let w = basis.word(j);
        let l = basis.ell(j);
        let mut errs = Vec::with_capacity(ts.len());
        for &t in &ts {
            let mut worst = 0.0f64;
            for x in &xs {
                let approx = approx_exp(&gens, w, t, x, &icfg)?;
                let exact = flow(basis.field(j), x, t, &icfg)?;
                let err: f64 = approx
                    .iter()
                    .zip(&exact)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(err);
            }
            errs.push(worst);
        }
        let max_err = errs.iter().cloned().fold(0.0f64, f64::max);
        if max_err <= floor {
            report.set(format!("exact_{w}"), 1.0);
            continue;
        }
        // fit only above the noise floor
        let pts: Vec<(f64, f64)> = ts
            .iter()
            .zip(&errs)
            .filter(|(_, &e)| e > floor)
            .map(|(&t, &e)| (t, e))
            .collect();
        let (txs, tys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let slope = fit_loglog_slope(&txs, &tys).unwrap_or(f64::NAN);
        let target = (l as f64 + 1.0) / l as f64 - slack;
        let ok = slope.is_finite() && slope >= target;
        pass &= ok;
        report
            .set(format!("slope_{w}"), if slope.is_finite() { slope } else { -1.0 })
            .set(format!("order_target_{w}"), target);
    }
    finish(&mut report, sc, pass)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::bundled;

    fn light(name: &str) -> Scenario {
        let mut sc = bundled(name).unwrap();
        sc.counts.pairs = 400;
        sc.counts.x_count = 120;
        sc.counts.mc_samples = 4000;
        sc.counts.sample_points = 8;
        sc.counts.shells = 8;
        sc
    }

    #[test]
    fn heisenberg_identity_suite_passes() {
        let sc = light("heisenberg");
        let rep = verify_heisenberg_identity(&sc).unwrap();
        assert_eq!(rep.passed, Some(true));
        assert!(rep.get("max_error").unwrap() < 1e-8);
    }

    #[test]
    fn heisenberg_identity_rejects_wrong_shape() {
        let sc = bundled("euclidean2").unwrap();
        assert!(verify_heisenberg_identity(&sc).is_err());
    }

    #[test]
    fn sup_holder_suite_heisenberg() {
        let sc = light("heisenberg");
        let rep = verify_sup_holder(&sc).unwrap();
        assert_eq!(rep.passed, Some(true));
        // the ratio along [X1,X2] is 4 sqrt(tau); the domain restriction on
        // the flow endpoint caps tau strictly below r0
        let s = rep.get("sup_holder_ratio").unwrap();
        assert!(s > 1.5 && s <= 4.0 * sc.r0.sqrt() + 1e-9, "s = {s}");
    }

    #[test]
    fn ballbox_suite_euclidean() {
        let sc = light("euclidean2");
        let rep = verify_ballbox(&sc).unwrap();
        assert_eq!(rep.passed, Some(true), "{:?}", rep.values);
        assert!(rep.get("jacobian_c_empirical").unwrap() < 1.01);
    }

    #[test]
    fn ballbox_suite_heisenberg() {
        let sc = light("heisenberg");
        let rep = verify_ballbox(&sc).unwrap();
        assert_eq!(rep.passed, Some(true), "{:?}", rep.values);
    }

    #[test]
    fn volume_suite_euclidean2_slope_two() {
        let sc = light("euclidean2");
        let rep = verify_volume(&sc).unwrap();
        assert_eq!(rep.passed, Some(true), "{:?}", rep.values);
        assert!((rep.get("slope_mc").unwrap() - 2.0).abs() < 0.3);
        assert_eq!(rep.get("slope_proxy").unwrap(), 2.0);
    }

    #[test]
    fn volume_suite_heisenberg_slope_four() {
        let sc = light("heisenberg");
        let rep = verify_volume(&sc).unwrap();
        assert_eq!(rep.passed, Some(true), "{:?}", rep.values);
        assert!((rep.get("slope_proxy").unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn convergence_suite_heisenberg_is_exact() {
        let sc = light("heisenberg");
        let rep = convergence_order_suite(&sc).unwrap();
        assert_eq!(rep.passed, Some(true), "{:?}", rep.values);
        assert_eq!(rep.get("exact_12"), Some(1.0));
    }

    #[test]
    fn convergence_suite_step3() {
        let sc = light("step3");
        let rep = convergence_order_suite(&sc).unwrap();
        assert_eq!(rep.passed, Some(true), "{:?}", rep.values);
    }

    #[test]
    fn convergence_suite_sine_step3_has_genuine_order() {
        let mut sc = light("step3");
        sc.generators[1][2] = "sin(x1)".into();
        let rep = convergence_order_suite(&sc).unwrap();
        assert_eq!(rep.passed, Some(true), "{:?}", rep.values);
        // at least one word must exhibit a genuinely fitted order
        assert!(rep.values.keys().any(|k| k.starts_with("slope_")));
    }

    #[test]
    fn commutator_directional_suite_heisenberg() {
        let sc = light("heisenberg");
        let rep = verify_commutator_directional(&sc).unwrap();
        assert_eq!(rep.passed, Some(true), "{:?}", rep.values);
        assert!(rep.get("ratio_12").unwrap() > 0.0);
    }

    #[test]
    fn anisotropic_suite_heisenberg() {
        let sc = light("heisenberg");
        let rep = verify_anisotropic(&sc).unwrap();
        assert_eq!(rep.passed, Some(true), "{:?}", rep.values);
    }

    #[test]
    fn run_all_respects_suite_list() {
        let mut sc = light("euclidean1");
        sc.suites = vec!["convergence".into()];
        let reps = run_all(&sc).unwrap();
        assert_eq!(reps.len(), 1);
        assert_eq!(reps[0].name, "convergence");
        assert!(run_suite(&sc, "bogus").is_err());
    }
}
