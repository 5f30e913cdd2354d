//! Vector fields on R^n, nested Lie brackets and the commutator basis.
//!
//! Bracket convention: a word `w = w_1 w_2 ... w_l` names the right-nested
//! commutator `X_w = [X_{w_1}, [X_{w_2}, ... [X_{w_{l-1}}, X_{w_l}] ... ]]`.
//! Note that left-nesting is also common in the literature; everything in
//! this crate uses the right-nested convention above.

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::MAX_DIM;

/// A smooth vector field on R^n given by `n` coefficient expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dim: usize,
    coeffs: Vec<Expr>,
}

impl VectorField {
    pub fn new(dim: usize, coeffs: Vec<Expr>) -> Result<VectorField> {
        if dim > MAX_DIM {
            return Err(Error::DimensionTooLarge(dim));
        }
        if coeffs.len() != dim {
            return Err(Error::DimensionMismatch(coeffs.len(), dim));
        }
        for c in &coeffs {
            if let Some(v) = c.max_var() {
                if v >= dim {
                    return Err(Error::VariableOutOfRange {
                        index: v + 1,
                        dim,
                    });
                }
            }
        }
        Ok(VectorField { dim, coeffs })
    }

    /// Parse the `n` coefficient strings of a field.
    pub fn parse(dim: usize, coeffs: &[&str]) -> Result<VectorField> {
        let exprs = coeffs
            .iter()
            .map(|s| parse_expr(s, dim))
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(dim, exprs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[Expr] {
        &self.coeffs
    }

    pub fn zero(dim: usize) -> VectorField {
        VectorField {
            dim,
            coeffs: vec![Expr::zero(); dim],
        }
    }

    /// The i-th Euclidean frame field `d/dx_{i+1}`.
    pub fn frame(dim: usize, i: usize) -> VectorField {
        let mut coeffs = vec![Expr::zero(); dim];
        coeffs[i] = Expr::one();
        VectorField { dim, coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Evaluate into a caller-provided buffer without finiteness checks.
    #[inline]
    pub fn eval_into_raw(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out[..self.dim].iter_mut().zip(&self.coeffs) {
            *o = c.eval_raw(x);
        }
    }

    /// Evaluate the field at a point; errors on non-finite components.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.coeffs.iter().map(|c| c.eval(x)).collect()
    }

    /// Symbolic Jacobian matrix `J[i][j] = d coeffs[i] / d x_{j+1}`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.coeffs
            .iter()
            .map(|c| (0..self.dim).map(|j| c.diff(j).simplify()).collect())
            .collect()
    }

    /// Directional derivative of a scalar expression: `(Xf)(x) = sum_i X_i d_i f`.
    pub fn apply_to(&self, f: &Expr) -> Expr {
        let terms = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| Expr::Prod(vec![c.clone(), f.diff(i)]))
            .collect();
        Expr::Sum(terms).simplify()
    }
}

/// Evaluate a field at a point (free-function form of [`VectorField::eval`]).
pub fn eval_field(field: &VectorField, x: &[f64]) -> Result<Vec<f64>> {
    field.eval(x)
}

/// Lie bracket `[X, Y]_i = sum_j (X_j d_j Y_i - Y_j d_j X_i)`, simplified.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch(x.dim, y.dim));
    }
    let n = x.dim;
    let mut coeffs = Vec::with_capacity(n);
    for i in 0..n {
        let mut terms = Vec::with_capacity(2 * n);
        for j in 0..n {
            terms.push(Expr::Prod(vec![x.coeffs[j].clone(), y.coeffs[i].diff(j)]));
            terms.push(Expr::Neg(Box::new(Expr::Prod(vec![
                y.coeffs[j].clone(),
                x.coeffs[i].diff(j),
            ]))));
        }
        coeffs.push(Expr::Sum(terms).simplify());
    }
    VectorField::new(n, coeffs)
}

/// A nonempty word over the generator alphabet `{1..m}` (letters 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    letters: Vec<usize>,
}

impl Word {
    pub fn new(letters: Vec<usize>, m: usize) -> Result<Word> {
        if letters.is_empty() {
            return Err(Error::EmptyWord);
        }
        for &l in &letters {
            if l == 0 || l > m {
                return Err(Error::LetterOutOfRange { letter: l, m });
            }
        }
        Ok(Word { letters })
    }

    /// Parse a word from its digit string, e.g. `"12"`.
    pub fn parse(text: &str, m: usize) -> Result<Word> {
        let letters = text
            .chars()
            .map(|c| {
                c.to_digit(10).map(|d| d as usize).ok_or(Error::Syntax {
                    offset: 0,
                    msg: format!("invalid word character `{}`", c),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Word::new(letters, m)
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for l in &self.letters {
            write!(f, "{}", l)?;
        }
        Ok(())
    }
}

/// The right-nested commutator field `X_w`.
pub fn commutator_field(generators: &[VectorField], w: &Word) -> Result<VectorField> {
    let letters = w.letters();
    for &l in letters {
        if l == 0 || l > generators.len() {
            return Err(Error::LetterOutOfRange {
                letter: l,
                m: generators.len(),
            });
        }
    }
    let mut field = generators[letters[letters.len() - 1] - 1].clone();
    for &l in letters[..letters.len() - 1].iter().rev() {
        field = lie_bracket(&generators[l - 1], &field)?;
    }
    Ok(field)
}

/// The enumerated commutator family `Y_1..Y_q` of step `kappa`.
///
/// Entries are ordered by (word length, lexicographic word), so the first `m`
/// entries are the generators themselves. Basis indices are 1-based, matching
/// the multi-index convention used throughout.
#[derive(Debug, Clone)]
pub struct CommutatorBasis {
    generators: Vec<VectorField>,
    step: usize,
    entries: Vec<(Word, VectorField)>,
}

/// Enumerate every word of length `1..=kappa`; with `prune` set, entries whose
/// field simplifies to the literal zero field are dropped.
pub fn enumerate_basis(
    generators: &[VectorField],
    kappa: usize,
    prune: bool,
) -> Result<CommutatorBasis> {
    assert!(kappa >= 1, "step must be at least 1");
    let m = generators.len();
    let mut entries = Vec::new();
    let mut words: Vec<Vec<usize>> = vec![vec![]];
    for _len in 1..=kappa {
        let mut next = Vec::with_capacity(words.len() * m);
        for w in &words {
            for l in 1..=m {
                let mut nw = w.clone();
                nw.push(l);
                next.push(nw);
            }
        }
        // lexicographic within fixed length by construction
        for letters in &next {
            let word = Word::new(letters.clone(), m)?;
            let field = commutator_field(generators, &word)?;
            if !(prune && field.is_zero()) {
                entries.push((word, field));
            }
        }
        words = next;
    }
    Ok(CommutatorBasis {
        generators: generators.to_vec(),
        step: kappa,
        entries,
    })
}

impl CommutatorBasis {
    pub fn generators(&self) -> &[VectorField] {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.generators[0].dim()
    }

    /// Number of entries `q`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Word, VectorField)] {
        &self.entries
    }

    /// Entry accessors take the 1-based basis index `j` of `Y_j`.
    pub fn word(&self, j: usize) -> &Word {
        &self.entries[j - 1].0
    }

    pub fn field(&self, j: usize) -> &VectorField {
        &self.entries[j - 1].1
    }

    /// Commutator length `l_j` of `Y_j`.
    pub fn ell(&self, j: usize) -> usize {
        self.entries[j - 1].0.len()
    }
}

/// Per-point numerical rank data from a Hormander-condition check.
#[derive(Debug, Clone)]
pub struct HormanderReport {
    pub ok: bool,
    /// Numerical rank at each sample point.
    pub ranks: Vec<usize>,
    /// Indices of sample points where the rank is below `n`.
    pub failing: Vec<usize>,
}

/// True iff the span of `Y_1(x)..Y_q(x)` is all of R^n at every sample point,
/// judged by singular values above `tol` times the largest.
pub fn check_hormander(basis: &CommutatorBasis, points: &[Vec<f64>], tol: f64) -> HormanderReport {
    assert!(!points.is_empty(), "nonempty sample set required");
    let n = basis.dim();
    let q = basis.len();
    let mut ranks = Vec::with_capacity(points.len());
    let mut failing = Vec::new();
    for (pi, x) in points.iter().enumerate() {
        let mut mat = nalgebra::DMatrix::<f64>::zeros(n, q);
        let mut col = vec![0.0; n];
        for j in 1..=q {
            basis.field(j).eval_into_raw(x, &mut col);
            for i in 0..n {
                mat[(i, j - 1)] = col[i];
            }
        }
        let svd = mat.svd(false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let rank = if smax == 0.0 {
            0
        } else {
            svd.singular_values
                .iter()
                .filter(|&&s| s > tol * smax)
                .count()
        };
        ranks.push(rank);
        if rank < n {
            failing.push(pi);
        }
    }
    HormanderReport {
        ok: failing.is_empty(),
        ranks,
        failing,
    }
}

/// Bundled example systems used by the scenarios and throughout the tests.
pub mod systems {
    use super::VectorField;

    /// Heisenberg generators `X = d/dx + 2y d/dt`, `Y = d/dy - 2x d/dt`.
    pub fn heisenberg() -> Vec<VectorField> {
        vec![
            VectorField::parse(3, &["1", "0", "2*x2"]).unwrap(),
            VectorField::parse(3, &["0", "1", "-2*x1"]).unwrap(),
        ]
    }

    /// Grushin generators `X1 = d/dx`, `X2 = x d/dy`.
    pub fn grushin() -> Vec<VectorField> {
        vec![
            VectorField::parse(2, &["1", "0"]).unwrap(),
            VectorField::parse(2, &["0", "x1"]).unwrap(),
        ]
    }

    /// Step-3 polynomial system `X1 = d/dx`, `X2 = d/dy + x^2 d/dz`.
    pub fn step3() -> Vec<VectorField> {
        vec![
            VectorField::parse(3, &["1", "0", "0"]).unwrap(),
            VectorField::parse(3, &["0", "1", "x1^2"]).unwrap(),
        ]
    }

    /// Non-polynomial step-3 system `X1 = d/dx`, `X2 = d/dy + sin(x) d/dz`.
    /// Unlike the polynomial examples, its approximate exponentials are not
    /// exact, so genuine convergence orders can be measured on it.
    pub fn sine_step3() -> Vec<VectorField> {
        vec![
            VectorField::parse(3, &["1", "0", "0"]).unwrap(),
            VectorField::parse(3, &["0", "1", "sin(x1)"]).unwrap(),
        ]
    }

    /// The Euclidean frame `d/dx_1 .. d/dx_n`.
    pub fn euclidean(n: usize) -> Vec<VectorField> {
        (0..n).map(|i| VectorField::frame(n, i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::systems::*;
    use super::*;

    #[test]
    fn eval_field_heisenberg() {
        let x = &heisenberg()[0];
        let v = eval_field(x, &[0.3, -0.2, 0.1]).unwrap();
        assert_eq!(v, vec![1.0, 0.0, -0.4]);
    }

    #[test]
    fn eval_field_zero_and_frame() {
        let z = VectorField::zero(3);
        assert_eq!(eval_field(&z, &[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
        let e1 = VectorField::frame(4, 0);
        assert_eq!(
            eval_field(&e1, &[0.5; 4]).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn heisenberg_bracket_is_minus_four_dt() {
        let gens = heisenberg();
        let b = lie_bracket(&gens[0], &gens[1]).unwrap();
        assert_eq!(
            b.coeffs(),
            &[Expr::Const(0.0), Expr::Const(0.0), Expr::Const(-4.0)]
        );
    }

    #[test]
    fn bracket_with_self_is_zero() {
        let gens = heisenberg();
        let b = lie_bracket(&gens[0], &gens[0]).unwrap();
        assert!(b.is_zero());
    }

    #[test]
    fn grushin_bracket_is_dy() {
        let gens = grushin();
        let b = lie_bracket(&gens[0], &gens[1]).unwrap();
        assert_eq!(b.coeffs(), &[Expr::Const(0.0), Expr::Const(1.0)]);
    }

    #[test]
    fn commutator_field_cases() {
        let gens = heisenberg();
        let w1 = Word::parse("1", 2).unwrap();
        assert_eq!(&commutator_field(&gens, &w1).unwrap(), &gens[0]);

        let w12 = Word::parse("12", 2).unwrap();
        let f12 = commutator_field(&gens, &w12).unwrap();
        assert_eq!(f12.eval(&[0.0; 3]).unwrap(), vec![0.0, 0.0, -4.0]);

        let w21 = Word::parse("21", 2).unwrap();
        let f21 = commutator_field(&gens, &w21).unwrap();
        assert_eq!(f21.eval(&[0.0; 3]).unwrap(), vec![0.0, 0.0, 4.0]);
    }

    #[test]
    fn empty_word_rejected() {
        assert!(matches!(Word::new(vec![], 2), Err(Error::EmptyWord)));
    }

    #[test]
    fn enumerate_basis_heisenberg_pruned() {
        let basis = enumerate_basis(&heisenberg(), 2, true).unwrap();
        assert_eq!(basis.len(), 4);
        let words: Vec<String> = basis
            .entries()
            .iter()
            .map(|(w, _)| w.to_string())
            .collect();
        assert_eq!(words, vec!["1", "2", "12", "21"]);
        assert_eq!(basis.ell(3), 2);
    }

    #[test]
    fn enumerate_basis_step_one_is_generators() {
        let gens = grushin();
        let basis = enumerate_basis(&gens, 1, true).unwrap();
        assert_eq!(basis.len(), 2);
        assert_eq!(basis.field(1), &gens[0]);
        assert_eq!(basis.field(2), &gens[1]);
    }

    #[test]
    fn enumerate_basis_unpruned_count() {
        let basis = enumerate_basis(&heisenberg(), 3, false).unwrap();
        assert_eq!(basis.len(), 2 + 4 + 8);
    }

    #[test]
    fn enumerate_basis_is_deterministic() {
        let a = enumerate_basis(&grushin(), 2, true).unwrap();
        let b = enumerate_basis(&grushin(), 2, true).unwrap();
        let wa: Vec<_> = a.entries().iter().map(|(w, _)| w.clone()).collect();
        let wb: Vec<_> = b.entries().iter().map(|(w, _)| w.clone()).collect();
        assert_eq!(wa, wb);
    }

    #[test]
    fn hormander_heisenberg() {
        let basis = enumerate_basis(&heisenberg(), 2, true).unwrap();
        let pts = vec![vec![0.0; 3], vec![0.3, -0.2, 0.1], vec![-1.0, 1.0, 0.5]];
        let rep = check_hormander(&basis, &pts, 1e-10);
        assert!(rep.ok);
        assert!(rep.ranks.iter().all(|&r| r == 3));
    }

    #[test]
    fn hormander_fails_at_step_one() {
        let basis = enumerate_basis(&heisenberg(), 1, true).unwrap();
        let rep = check_hormander(&basis, &[vec![0.3, -0.2, 0.1]], 1e-10);
        assert!(!rep.ok);
        assert_eq!(rep.ranks, vec![2]);
    }

    #[test]
    fn hormander_euclidean_frame() {
        let basis = enumerate_basis(&euclidean(3), 1, true).unwrap();
        let rep = check_hormander(&basis, &[vec![0.1, 0.2, 0.3]], 1e-10);
        assert!(rep.ok);
    }
}
