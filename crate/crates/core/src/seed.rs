//! Seeds, the exchange relation, and g-vector / c-vector / F-polynomial extraction.
//!
//! Cluster variables are stored fully expanded in the initial variables
//! `x_1..x_n` and coefficients `y_1..y_{m-n}`. For a principal seed the
//! extended matrix starts as `[B; I_n]` and the grading
//! `deg x_i = e_i`, `deg y_j = -b_j` (column `j` of the initial `B`) is fixed
//! at construction and never changes.

use std::collections::HashMap;
use std::fmt;

use num_traits::One;
use thiserror::Error;

use crate::exchange::{positive_part, ExchangeError, ExchangeMatrix, MutationSequence};
use crate::laurent::{Grading, Homogeneity, LaurentError, LaurentPoly, Monomial, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeedError {
    #[error("invalid initial matrix: {0}")]
    InvalidMatrix(String),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
    #[error("exchange division at {k} is not exact after [{history}]")]
    NonExactDivision { k: usize, history: String },
    #[error("cluster variable at {position} is not homogeneous after [{history}]: {first} vs {second}")]
    InhomogeneityBug { position: usize, history: String, first: String, second: String },
    #[error("seed has no principal grading")]
    NotPrincipal,
    #[error("term budget of {limit} exceeded mutating at {k} after [{history}]")]
    BudgetExceeded { limit: usize, k: usize, history: String },
    #[error("seed dump: {0}")]
    Parse(String),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
}

/// Degree of a cluster variable under the initial grading.
pub type GVector = Vec<i64>;

/// The g-vectors of one seed, one per cluster position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GMatrix {
    pub columns: Vec<GVector>,
}

impl GMatrix {
    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    /// Entry `(i, j)`: coordinate `i` of the g-vector at position `j`.
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.columns[j][i]
    }

    pub fn row(&self, i: usize) -> Vec<i64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rank()).map(|i| self.row(i)).collect()
    }
}

/// Canonical form of an unlabeled seed, used for deduplication.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeedKey {
    pub cluster: Vec<LaurentPoly>,
    pub matrix: ExchangeMatrix,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seed {
    matrix: ExchangeMatrix,
    cluster: Vec<LaurentPoly>,
    history: MutationSequence,
    grading: Option<Grading>,
}

impl Seed {
    /// Principal seed at an acyclic sign-skew-symmetric `B`.
    pub fn initial(b: &ExchangeMatrix) -> Result<Seed, SeedError> {
        if !b.is_square() {
            return Err(SeedError::InvalidMatrix("exchange matrix must be square".into()));
        }
        if !b.is_acyclic() {
            return Err(SeedError::InvalidMatrix("exchange matrix is not acyclic".into()));
        }
        Seed::principal(b)
    }

    /// Principal seed at any sign-skew-symmetric square `B`; mutations may
    /// later fail with `NotMutable` if `B` is not totally mutable.
    pub fn principal(b: &ExchangeMatrix) -> Result<Seed, SeedError> {
        if !b.is_square() {
            return Err(SeedError::InvalidMatrix("exchange matrix must be square".into()));
        }
        if !b.is_sign_skew_symmetric() {
            return Err(SeedError::InvalidMatrix("exchange matrix is not sign-skew-symmetric".into()));
        }
        let n = b.rank();
        let mut grading = Grading::new(n);
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 1;
            grading.set(Var::x(i), e);
            grading.set(Var::y(i), b.column(i).iter().map(|v| -v).collect());
        }
        Ok(Seed {
            matrix: b.principal_extension(),
            cluster: (0..n).map(|i| LaurentPoly::var(Var::x(i))).collect(),
            history: MutationSequence::new(),
            grading: Some(grading),
        })
    }

    /// Seed with arbitrary frozen rows; frozen row `n + j` is coefficient `y_{j+1}`.
    /// Such a seed carries no grading.
    pub fn from_extended(matrix: &ExchangeMatrix) -> Result<Seed, SeedError> {
        if !matrix.is_sign_skew_symmetric() {
            return Err(SeedError::InvalidMatrix("exchange block is not sign-skew-symmetric".into()));
        }
        let n = matrix.rank();
        Ok(Seed {
            matrix: matrix.clone(),
            cluster: (0..n).map(|i| LaurentPoly::var(Var::x(i))).collect(),
            history: MutationSequence::new(),
            grading: None,
        })
    }

    pub fn rank(&self) -> usize {
        self.matrix.rank()
    }

    pub fn matrix(&self) -> &ExchangeMatrix {
        &self.matrix
    }

    pub fn cluster(&self) -> &[LaurentPoly] {
        &self.cluster
    }

    pub fn history(&self) -> &MutationSequence {
        &self.history
    }

    pub fn grading(&self) -> Option<&Grading> {
        self.grading.as_ref()
    }

    pub fn is_principal(&self) -> bool {
        self.grading.is_some()
    }

    /// The exchange matrix this seed's history started from.
    pub fn initial_matrix(&self) -> ExchangeMatrix {
        let mut m = self.matrix.clone();
        for &k in self.history.indices().iter().rev() {
            m = m.mutate(k).expect("inverse of a successful mutation");
        }
        m
    }

    pub fn mutate(&self, k: usize) -> Result<Seed, SeedError> {
        self.mutate_with_budget(k, None)
    }

    /// Mutation at `k` (0-based) with an optional term budget. The budget
    /// bounds the unmerged term count of every product and of the exact
    /// division (quotient terms times divisor terms), so the cost of one
    /// mutation is linear in the budget.
    pub fn mutate_with_budget(&self, k: usize, budget: Option<usize>) -> Result<Seed, SeedError> {
        let n = self.rank();
        if k >= n {
            return Err(ExchangeError::IndexOutOfRange { index: k + 1, n }.into());
        }
        let matrix = self.matrix.mutate(k)?;
        let over_budget =
            |limit: usize| SeedError::BudgetExceeded { limit, k: k + 1, history: self.history.to_one_based() };

        let mut binomial = LaurentPoly::zero();
        for sign in [1i64, -1] {
            let mut term = LaurentPoly::one();
            for i in 0..n {
                let e = positive_part(sign * self.matrix.get(i, k));
                if e == 0 {
                    continue;
                }
                let factor = budgeted_pow(&self.cluster[i], e as u32, budget).map_err(&over_budget)?;
                term = budgeted_mul(&term, &factor, budget).map_err(&over_budget)?;
            }
            let y = Monomial::from_pairs(
                (n..self.matrix.rows()).map(|j| (Var::y(j - n), positive_part(sign * self.matrix.get(j, k)) as i32)),
            );
            binomial = &binomial + &term.mul_monomial(&y);
        }

        let replaced = binomial.div_exact_limited(&self.cluster[k], budget).map_err(|e| match e {
            LaurentError::NonExactDivision => {
                SeedError::NonExactDivision { k: k + 1, history: self.history.to_one_based() }
            }
            LaurentError::SizeLimit { limit } => over_budget(limit),
            other => other.into(),
        })?;
        debug_assert!(replaced.is_admissible());

        let mut cluster = self.cluster.clone();
        cluster[k] = replaced;
        Ok(Seed { matrix, cluster, history: self.history.pushed(k), grading: self.grading.clone() })
    }

    pub fn mutate_sequence(&self, seq: &[usize]) -> Result<Seed, SeedError> {
        seq.iter().try_fold(self.clone(), |s, &k| s.mutate(k))
    }

    pub fn mutate_sequence_with_budget(&self, seq: &[usize], budget: Option<usize>) -> Result<Seed, SeedError> {
        seq.iter().try_fold(self.clone(), |s, &k| s.mutate_with_budget(k, budget))
    }

    /// Degree of the cluster variable at `position` under the initial grading.
    pub fn g_vector(&self, position: usize) -> Result<GVector, SeedError> {
        let grading = self.grading.as_ref().ok_or(SeedError::NotPrincipal)?;
        match self.cluster[position].degree_vector(grading)? {
            Homogeneity::Homogeneous(g) => Ok(g),
            Homogeneity::Inhomogeneous { first, second } => Err(SeedError::InhomogeneityBug {
                position: position + 1,
                history: self.history.to_one_based(),
                first: first.to_string(),
                second: second.to_string(),
            }),
            Homogeneity::Zero => unreachable!("cluster variables are nonzero"),
        }
    }

    pub fn g_matrix(&self) -> Result<GMatrix, SeedError> {
        let columns = (0..self.rank()).map(|a| self.g_vector(a)).collect::<Result<_, _>>()?;
        Ok(GMatrix { columns })
    }

    /// Bottom block of the extended matrix; its columns are the c-vectors.
    pub fn c_matrix(&self) -> Vec<Vec<i64>> {
        self.matrix.frozen_rows()
    }

    /// The cluster variable at `position` with every `x_i` set to 1.
    pub fn f_polynomial(&self, position: usize) -> LaurentPoly {
        let ones: HashMap<Var, LaurentPoly> = self.cluster[position]
            .variables()
            .into_iter()
            .filter(|v| !v.is_coefficient())
            .map(|v| (v, LaurentPoly::one()))
            .collect();
        self.cluster[position].substitute(&ones).expect("unit images")
    }

    /// Cluster sorted canonically with the matrix permuted to match.
    pub fn canonical_key(&self) -> SeedKey {
        let mut perm: Vec<usize> = (0..self.rank()).collect();
        perm.sort_by(|&a, &b| self.cluster[a].cmp(&self.cluster[b]));
        SeedKey { cluster: perm.iter().map(|&a| self.cluster[a].clone()).collect(), matrix: self.matrix.permute(&perm) }
    }

    /// Sorted cluster only.
    pub fn sorted_cluster(&self) -> Vec<LaurentPoly> {
        let mut c = self.cluster.clone();
        c.sort();
        c
    }

    /// Seed dump text: `seed`, `hist ...`, matrix block, `var i: ...` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::from("seed\n");
        let hist = self.history.to_one_based();
        if hist.is_empty() {
            s.push_str("hist\n");
        } else {
            s.push_str(&format!("hist {hist}\n"));
        }
        s.push_str(&self.matrix.to_text());
        for (i, x) in self.cluster.iter().enumerate() {
            s.push_str(&format!("var {}: {}\n", i + 1, x));
        }
        s
    }

    /// Parses a seed dump. The principal grading is recovered when undoing
    /// the history yields a `[B; I_n]` matrix.
    pub fn parse(text: &str) -> Result<Seed, SeedError> {
        let err = |s: &str| SeedError::Parse(s.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("seed") {
            return Err(err("expected `seed` header"));
        }
        let hist_line = lines.next().ok_or_else(|| err("missing hist line"))?.trim();
        let rest = hist_line.strip_prefix("hist").ok_or_else(|| err("expected `hist` line"))?;
        let matrix = ExchangeMatrix::parse_lines(&mut lines)?;
        let n = matrix.rank();
        let history = MutationSequence::parse_one_based(rest, n)?;
        let mut cluster = Vec::with_capacity(n);
        for i in 0..n {
            let line = lines.next().ok_or_else(|| err("missing var line"))?.trim();
            let prefix = format!("var {}:", i + 1);
            let body = line.strip_prefix(&prefix).ok_or_else(|| err("bad var line"))?;
            cluster.push(body.trim().parse::<LaurentPoly>()?);
        }
        if lines.next().is_some() {
            return Err(err("trailing content"));
        }
        let mut seed = Seed { matrix, cluster, history, grading: None };
        let initial = seed.initial_matrix();
        if initial.rows() == 2 * n && initial == initial.principal_part().principal_extension() {
            seed.grading = Seed::principal(&initial.principal_part()).ok().and_then(|s| s.grading);
        }
        Ok(seed)
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Product whose unmerged term count `|a| * |b|` must stay within the budget.
fn budgeted_mul(a: &LaurentPoly, b: &LaurentPoly, budget: Option<usize>) -> Result<LaurentPoly, usize> {
    match budget {
        Some(limit) if a.len() as u128 * b.len() as u128 > limit as u128 => Err(limit),
        _ => Ok(a * b),
    }
}

fn budgeted_pow(a: &LaurentPoly, e: u32, budget: Option<usize>) -> Result<LaurentPoly, usize> {
    if e == 1 || a.len() == 1 {
        return Ok(a.pow(e));
    }
    let mut result = LaurentPoly::one();
    let mut base = a.clone();
    let mut e = e;
    loop {
        if e & 1 == 1 {
            result = budgeted_mul(&result, &base, budget)?;
        }
        e >>= 1;
        if e == 0 {
            return Ok(result);
        }
        base = budgeted_mul(&base, &base, budget)?;
    }
}

/// One step of the g-vector base change: `g` is taken with respect to a
/// principal seed with exchange matrix `b1`; the result is with respect to
/// its neighbour in direction `k`.
pub fn g_recurrence_step(g: &[i64], b1: &ExchangeMatrix, k: usize) -> GVector {
    let gk = g[k];
    g.iter()
        .enumerate()
        .map(|(i, &gi)| {
            if i == k {
                -gk
            } else {
                let bik = b1.get(i, k);
                gi + positive_part(bik) * gk - bik * gk.min(0)
            }
        })
        .collect()
}

/// True when the constant term is exactly 1.
pub fn has_unit_constant_term(f: &LaurentPoly) -> bool {
    f.constant_term().is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> ExchangeMatrix {
        ExchangeMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn p(s: &str) -> LaurentPoly {
        s.parse().unwrap()
    }

    fn a2() -> ExchangeMatrix {
        m(&[&[0, 1], &[-1, 0]])
    }

    #[test]
    fn initial_seed_shape() {
        let s = Seed::initial(&a2()).unwrap();
        assert_eq!(s.cluster(), &[p("x1"), p("x2")]);
        assert_eq!(s.g_matrix().unwrap().to_rows(), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(s.c_matrix(), vec![vec![1, 0], vec![0, 1]]);
        assert!(s.history().is_empty());
    }

    #[test]
    fn initial_seed_rejects_bad_input() {
        assert!(matches!(Seed::initial(&m(&[&[0, 1], &[1, 0]])), Err(SeedError::InvalidMatrix(_))));
        let cyclic = m(&[&[0, 1, -1], &[-1, 0, 1], &[1, -1, 0]]);
        assert!(matches!(Seed::initial(&cyclic), Err(SeedError::InvalidMatrix(_))));
        assert!(Seed::principal(&cyclic).is_ok());
        assert!(matches!(Seed::initial(&a2().principal_extension()), Err(SeedError::InvalidMatrix(_))));
    }

    #[test]
    fn a2_first_mutation() {
        let s = Seed::initial(&a2()).unwrap().mutate(0).unwrap();
        assert_eq!(s.cluster()[0], p("x1^-1*y1 + x1^-1*x2"));
        assert_eq!(s.g_vector(0).unwrap(), vec![-1, 1]);
        assert_eq!(s.c_matrix(), vec![vec![-1, 1], vec![0, 1]]);
        assert_eq!(s.f_polynomial(0), p("1 + y1"));
        assert_eq!(s.f_polynomial(1), LaurentPoly::one());
    }

    #[test]
    fn mutation_is_an_involution() {
        let s0 = Seed::initial(&m(&[&[0, 1, 2], &[-2, 0, 3], &[-1, -1, 0]])).unwrap();
        let s1 = s0.mutate_sequence(&[1, 0]).unwrap();
        for k in 0..3 {
            let back = s1.mutate(k).unwrap().mutate(k).unwrap();
            assert_eq!(back.cluster(), s1.cluster());
            assert_eq!(back.matrix(), s1.matrix());
        }
    }

    #[test]
    fn a2_pentagon_is_periodic() {
        let s0 = Seed::initial(&a2()).unwrap();
        // alternating mutations return to the initial cluster with positions swapped after 5 steps
        let s5 = s0.mutate_sequence(&[0, 1, 0, 1, 0]).unwrap();
        assert_eq!(s5.sorted_cluster(), s0.sorted_cluster());
        assert_eq!(s5.cluster()[0], p("x2"));
        assert_eq!(s5.cluster()[1], p("x1"));
        let s10 = s5.mutate_sequence(&[1, 0, 1, 0, 1]).unwrap();
        assert_eq!(s10.cluster(), s0.cluster());
        assert_eq!(s10.matrix(), s0.matrix());
    }

    #[test]
    fn a2_g_vectors_and_f_polynomials() {
        let s0 = Seed::initial(&a2()).unwrap();
        let mut gs = std::collections::BTreeSet::new();
        let mut s = s0.clone();
        for k in [0, 1, 0, 1, 0] {
            s = s.mutate(k).unwrap();
            for a in 0..2 {
                gs.insert(s.g_vector(a).unwrap());
                assert!(has_unit_constant_term(&s.f_polynomial(a)));
            }
        }
        let expected: std::collections::BTreeSet<GVector> =
            [vec![1, 0], vec![0, 1], vec![-1, 1], vec![-1, 0], vec![0, -1]].into_iter().collect();
        assert_eq!(gs, expected);
    }

    #[test]
    fn g_recurrence_examples() {
        assert_eq!(g_recurrence_step(&[-1, 1], &a2(), 0), vec![1, 0]);
        let b = m(&[&[0, 1, 2], &[-2, 0, 3], &[-1, -1, 0]]);
        for k in 0..3 {
            let mut e = vec![0; 3];
            e[k] = 1;
            let step = g_recurrence_step(&e, &b, k);
            for i in 0..3 {
                let want = if i == k { -1 } else { positive_part(b.get(i, k)) };
                assert_eq!(step[i], want);
            }
        }
    }

    #[test]
    fn g_recurrence_round_trip() {
        let b = m(&[&[0, 1, 2], &[-2, 0, 3], &[-1, -1, 0]]);
        for k in 0..3 {
            let b2 = b.mutate(k).unwrap();
            for g in [[3, -2, 1], [-1, -4, 0], [0, 0, -5], [2, 2, 2]] {
                let there = g_recurrence_step(&g, &b, k);
                assert_eq!(g_recurrence_step(&there, &b2, k), g.to_vec());
            }
        }
    }

    #[test]
    fn budget_aborts_large_mutations() {
        let b = m(&[&[0, 3, 3], &[-3, 0, 3], &[-3, -3, 0]]);
        let s = Seed::initial(&b).unwrap();
        let err = s.mutate_sequence_with_budget(&[0, 1, 2, 0, 1, 2], Some(50)).unwrap_err();
        assert!(matches!(err, SeedError::BudgetExceeded { limit: 50, .. }), "{err}");
    }

    #[test]
    fn non_principal_seed_mutates_without_grading() {
        let ext = m(&[&[0, 1], &[-1, 0], &[2, -1]]);
        let s = Seed::from_extended(&ext).unwrap().mutate(0).unwrap();
        assert_eq!(s.cluster()[0], p("x1^-1*y1^2 + x1^-1*x2"));
        assert_eq!(s.g_vector(0), Err(SeedError::NotPrincipal));
    }

    #[test]
    fn dump_round_trip() {
        let b = m(&[&[0, 1, 2], &[-2, 0, 3], &[-1, -1, 0]]);
        let s = Seed::initial(&b).unwrap().mutate_sequence(&[1, 0, 2]).unwrap();
        let text = s.to_text();
        assert!(text.starts_with("seed\nhist 2 1 3\nexchange 6 3\n"));
        let back = Seed::parse(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text(), text);
        let s0 = Seed::initial(&b).unwrap();
        assert_eq!(Seed::parse(&s0.to_text()).unwrap(), s0);
        assert!(Seed::parse("seed\nhist\nexchange 2 1\n0\n1\n").is_err());
    }

    #[test]
    fn canonical_key_is_labeling_invariant() {
        let s = Seed::initial(&a2()).unwrap();
        let swapped = s.mutate_sequence(&[0, 1, 0, 1, 0]).unwrap();
        assert_eq!(s.canonical_key(), swapped.canonical_key());
        assert_ne!(s.canonical_key(), s.mutate(0).unwrap().canonical_key());
    }
}
