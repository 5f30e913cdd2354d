//! Property tests for the algebraic and geometric invariants: bracket
//! identities, flow composition laws, box-norm homogeneity, seminorm
//! invariances, and the rho <= d ordering.

use carnot_lab::ballbox::{box_norm, sample_box, BallBoxConstants, MultiIndex};
use carnot_lab::expr::parse_expr;
use carnot_lab::flows::{approx_exp, e_map, flow, IntegratorConfig};
use carnot_lab::metric::{
    cc_distance_upper, embed_cc_witness, rho_distance_upper_with_candidates, MetricConfig,
};
use carnot_lab::seminorms::{seminorm_dir, DirConfig};
use carnot_lab::vf::{
    commutator_field, enumerate_basis, eval_field, lie_bracket, systems, VectorField, Word,
};
use proptest::prelude::*;

fn field_pool() -> Vec<VectorField> {
    let mut pool = systems::heisenberg();
    pool.extend(systems::step3());
    pool.push(VectorField::parse(3, &["x2", "x1^2", "1"]).unwrap());
    pool.push(VectorField::parse(3, &["x3", "-x1", "x1*x2"]).unwrap());
    pool
}

fn norm_l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn point3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bracket_antisymmetry(x in point3(), i in 0usize..6, j in 0usize..6) {
        let pool = field_pool();
        let ab = lie_bracket(&pool[i], &pool[j]).unwrap();
        let ba = lie_bracket(&pool[j], &pool[i]).unwrap();
        let vab = eval_field(&ab, &x).unwrap();
        let vba = eval_field(&ba, &x).unwrap();
        for k in 0..3 {
            prop_assert!((vab[k] + vba[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn jacobi_identity(x in point3(), i in 0usize..6, j in 0usize..6, k in 0usize..6) {
        let pool = field_pool();
        let (a, b, c) = (&pool[i], &pool[j], &pool[k]);
        let t1 = lie_bracket(a, &lie_bracket(b, c).unwrap()).unwrap();
        let t2 = lie_bracket(b, &lie_bracket(c, a).unwrap()).unwrap();
        let t3 = lie_bracket(c, &lie_bracket(a, b).unwrap()).unwrap();
        let (v1, v2, v3) = (
            eval_field(&t1, &x).unwrap(),
            eval_field(&t2, &x).unwrap(),
            eval_field(&t3, &x).unwrap(),
        );
        for d in 0..3 {
            prop_assert!((v1[d] + v2[d] + v3[d]).abs() <= 1e-10);
        }
    }

    #[test]
    fn symbolic_derivative_matches_finite_differences(x in point3(), which in 0usize..4, i in 0usize..3) {
        let texts = ["x1^2*x2 + sin(x3)", "exp(x1*x2/4)", "x1*x2*x3", "cos(x1) - x2^3"];
        let f = parse_expr(texts[which], 3).unwrap();
        let df = f.diff(i);
        let h = 1e-5;
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (f.eval_raw(&xp) - f.eval_raw(&xm)) / (2.0 * h);
        let sym = df.eval_raw(&x);
        prop_assert!((fd - sym).abs() <= 1e-6 * (1.0 + sym.abs()), "fd={fd} sym={sym}");
    }

    #[test]
    fn basis_enumeration_is_deterministic(kappa in 2usize..4) {
        let a = enumerate_basis(&systems::step3(), kappa, true).unwrap();
        let b = enumerate_basis(&systems::step3(), kappa, true).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for j in 1..=a.len() {
            prop_assert_eq!(a.word(j).letters(), b.word(j).letters());
        }
    }

    #[test]
    fn flow_composition_law(x in point3(), s in -0.5..0.5f64, t in -0.5..0.5f64, which in 0usize..2) {
        let gens = systems::heisenberg();
        let z = &gens[which];
        let cfg = IntegratorConfig::default();
        let two_step = flow(z, &flow(z, &x, s, &cfg).unwrap(), t, &cfg).unwrap();
        let one_step = flow(z, &x, s + t, &cfg).unwrap();
        for k in 0..3 {
            prop_assert!((two_step[k] - one_step[k]).abs() <= 1e-8);
        }
    }

    #[test]
    fn approx_exp_cancels_with_negated_time(x in point3(), t in 0.01..0.3f64, which in 0usize..3) {
        let gens = systems::heisenberg();
        let words = ["12", "21", "112"];
        let w = Word::parse(words[which], 2).unwrap();
        let cfg = IntegratorConfig::default();
        let fwd = approx_exp(&gens, &w, t, &x, &cfg).unwrap();
        let back = approx_exp(&gens, &w, -t, &fwd, &cfg).unwrap();
        for k in 0..3 {
            prop_assert!((back[k] - x[k]).abs() <= 1e-8);
        }
    }

    #[test]
    fn box_norm_is_homogeneous(h in prop::collection::vec(-1.0..1.0f64, 3), lam in 0.1..2.0f64) {
        let basis = enumerate_basis(&systems::heisenberg(), 2, true).unwrap();
        let index = MultiIndex::new(vec![1, 2, 3], basis.len()).unwrap();
        let scaled: Vec<f64> = index
            .entries()
            .iter()
            .zip(&h)
            .map(|(&i, &hj)| hj * lam.powi(basis.ell(i) as i32))
            .collect();
        let a = box_norm(&basis, &index, &scaled);
        let b = lam * box_norm(&basis, &index, &h);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn sampled_box_points_have_bounded_norm(r in 0.05..1.0f64, seed in 0u64..1000) {
        let basis = enumerate_basis(&systems::heisenberg(), 2, true).unwrap();
        let index = MultiIndex::new(vec![1, 2, 3], basis.len()).unwrap();
        for h in sample_box(&basis, &index, r, 16, seed) {
            prop_assert!(box_norm(&basis, &index, &h) <= r * (1.0 + 1e-12));
        }
    }

    #[test]
    fn directional_seminorm_is_shift_invariant_and_homogeneous(a in 0.5..3.0f64) {
        let gens = systems::heisenberg();
        let basis = enumerate_basis(&gens, 2, true).unwrap();
        let omega = carnot_lab::domain::Domain::cube(3, 1.0);
        let f = parse_expr("x3", 3).unwrap();
        let shifted = parse_expr("x3 + 5", 3).unwrap();
        let scaled = parse_expr(&format!("{a}*x3"), 3).unwrap();
        let cfg = DirConfig { x_count: 24, t_points: 8, ..Default::default() };
        let icfg = IntegratorConfig::default();
        let z = basis.field(3);
        let v = seminorm_dir(&f, z, &omega, 0.25, 2.0, 0.5, &cfg, &icfg).unwrap();
        let vs = seminorm_dir(&shifted, z, &omega, 0.25, 2.0, 0.5, &cfg, &icfg).unwrap();
        let va = seminorm_dir(&scaled, z, &omega, 0.25, 2.0, 0.5, &cfg, &icfg).unwrap();
        prop_assert!((v - vs).abs() <= 1e-10 * (1.0 + v));
        prop_assert!((va - a * v).abs() <= 1e-10 * (1.0 + va));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rho_is_below_d_and_witnesses_replay(
        x in point3(),
        h1 in -0.2..0.2f64,
        h2 in -0.2..0.2f64,
        h3 in -0.04..0.04f64,
    ) {
        let basis = enumerate_basis(&systems::heisenberg(), 2, true).unwrap();
        let index = MultiIndex::new(vec![1, 2, 3], basis.len()).unwrap();
        let icfg = IntegratorConfig::default();
        let y = e_map(&basis, &index, &x, &[h1, h2, h3], &icfg).unwrap();
        let cfg = MetricConfig {
            multi_starts: 2,
            nm_evals: 60,
            bisect_iters: 6,
            ballbox: Some(BallBoxConstants::with_defaults(0.9, 2.0, 4.0).unwrap()),
            ..Default::default()
        };
        let d = cc_distance_upper(&basis, &x, &y, &cfg, 7).unwrap();
        let tol = cfg.endpoint_tol * (1.0 + norm_l2(&y));

        // witness replay reaches y within the endpoint tolerance
        let end = d.witness.endpoint(&basis, &x, &cfg.integrator).unwrap();
        let err: f64 = end.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= tol, "replay error {err} > {tol}");

        // the embedded d-witness makes rho <= d structural
        let embedded = embed_cc_witness(&basis, &d.witness);
        let rho = rho_distance_upper_with_candidates(&basis, &x, &y, &cfg, 7, &[embedded]).unwrap();
        prop_assert!(rho.value <= d.value + 2.0 * tol, "rho {} > d {}", rho.value, d.value);
    }
}

#[test]
fn commutator_field_matches_nested_brackets() {
    let gens = systems::step3();
    let w = Word::parse("112", 2).unwrap();
    let direct = commutator_field(&gens, &w).unwrap();
    let nested = lie_bracket(&gens[0], &lie_bracket(&gens[0], &gens[1]).unwrap()).unwrap();
    let x = [0.3, -0.7, 0.2];
    assert_eq!(eval_field(&direct, &x).unwrap(), eval_field(&nested, &x).unwrap());
}
