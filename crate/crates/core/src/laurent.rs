//! Multivariate Laurent polynomials over the integers.
//!
//! A [`LaurentPoly`] lives in `Z[y_1, y_2, ...][x_1^{±1}, x_2^{±1}, ...]`: cluster
//! variables may carry negative exponents, coefficient variables may not.
//! Values are kept in canonical form (sorted monomials, no zero coefficients),
//! so structural equality is ring equality.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use thiserror::Error;

/// A formal variable. Indices are 0-based internally and rendered 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Cluster variable, invertible.
    X(u32),
    /// Coefficient variable, never inverted.
    Y(u32),
}

impl Var {
    pub fn x(index: usize) -> Var {
        Var::X(index as u32)
    }

    pub fn y(index: usize) -> Var {
        Var::Y(index as u32)
    }

    pub fn index(self) -> usize {
        match self {
            Var::X(i) | Var::Y(i) => i as usize,
        }
    }

    pub fn is_coefficient(self) -> bool {
        matches!(self, Var::Y(_))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::Y(i) => write!(f, "y{}", i + 1),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LaurentError {
    #[error("variable {var} has a negative exponent but maps to {image}, which is not a unit monomial")]
    NonMonomialInverse { var: Var, image: String },
    #[error("division is not exact in the Laurent ring")]
    NonExactDivision,
    #[error("coefficient variable {0} would get a negative exponent")]
    NegativeCoefficientExponent(Var),
    #[error("variable {0} has no degree in the grading")]
    UngradedVariable(Var),
    #[error("term count exceeds the budget of {limit}")]
    SizeLimit { limit: usize },
    #[error("cannot parse Laurent polynomial: {0}")]
    Parse(String),
}

/// A Laurent monomial stored as sorted `(variable, exponent)` pairs with no
/// zero exponents. The derived order is the canonical term order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    exps: SmallVec<[(Var, i32); 12]>,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial::default()
    }

    pub fn var(v: Var) -> Monomial {
        Monomial::var_pow(v, 1)
    }

    pub fn var_pow(v: Var, e: i32) -> Monomial {
        let mut exps = SmallVec::new();
        if e != 0 {
            exps.push((v, e));
        }
        Monomial { exps }
    }

    /// Builds a monomial from arbitrary pairs, merging repeats and dropping zeros.
    pub fn from_pairs<I: IntoIterator<Item = (Var, i32)>>(pairs: I) -> Monomial {
        let mut map: BTreeMap<Var, i32> = BTreeMap::new();
        for (v, e) in pairs {
            *map.entry(v).or_insert(0) += e;
        }
        Monomial { exps: map.into_iter().filter(|&(_, e)| e != 0).collect() }
    }

    pub fn is_one(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponent(&self, v: Var) -> i32 {
        self.exps.binary_search_by(|&(w, _)| w.cmp(&v)).map(|i| self.exps[i].1).unwrap_or(0)
    }

    pub fn pairs(&self) -> &[(Var, i32)] {
        &self.exps
    }

    /// True when no coefficient variable has a negative exponent.
    pub fn is_admissible(&self) -> bool {
        self.exps.iter().all(|&(v, e)| !v.is_coefficient() || e >= 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        self.combine(other, 1)
    }

    pub fn div(&self, other: &Monomial) -> Monomial {
        self.combine(other, -1)
    }

    pub fn pow(&self, e: i32) -> Monomial {
        if e == 0 {
            return Monomial::one();
        }
        Monomial { exps: self.exps.iter().map(|&(v, a)| (v, a * e)).collect() }
    }

    fn combine(&self, other: &Monomial, sign: i32) -> Monomial {
        let (a, b) = (&self.exps, &other.exps);
        let mut exps = SmallVec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    exps.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    exps.push((b[j].0, sign * b[j].1));
                    j += 1;
                }
                Ordering::Equal => {
                    let e = a[i].1 + sign * b[j].1;
                    if e != 0 {
                        exps.push((a[i].0, e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        exps.extend_from_slice(&a[i..]);
        exps.extend(b[j..].iter().map(|&(v, e)| (v, sign * e)));
        Monomial { exps }
    }

    /// Lexicographic comparison of dense exponent vectors (absent = 0).
    /// Unlike the canonical order this is a group order: it is preserved
    /// under multiplication by any monomial.
    pub fn dense_cmp(&self, other: &Monomial) -> Ordering {
        let (a, b) = (&self.exps, &other.exps);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(&(_, ea)), None) => return ea.cmp(&0),
                (None, Some(&(_, eb))) => return 0.cmp(&eb),
                (Some(&(va, ea)), Some(&(vb, eb))) => match va.cmp(&vb) {
                    Ordering::Less => return ea.cmp(&0),
                    Ordering::Greater => return 0.cmp(&eb),
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(&eb);
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exps.is_empty() {
            return write!(f, "1");
        }
        for (n, &(v, e)) in self.exps.iter().enumerate() {
            if n > 0 {
                write!(f, "*")?;
            }
            if e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct DenseKey(Monomial);

impl PartialOrd for DenseKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DenseKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.dense_cmp(&other.0)
    }
}

/// Degree assignment `Var -> Z^d` used to extract g-vectors.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Grading {
    dim: usize,
    degrees: BTreeMap<Var, Vec<i64>>,
}

impl Grading {
    pub fn new(dim: usize) -> Grading {
        Grading { dim, degrees: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&mut self, v: Var, degree: Vec<i64>) {
        assert_eq!(degree.len(), self.dim, "degree has wrong length");
        self.degrees.insert(v, degree);
    }

    pub fn get(&self, v: Var) -> Option<&[i64]> {
        self.degrees.get(&v).map(Vec::as_slice)
    }

    pub fn monomial_degree(&self, m: &Monomial) -> Result<Vec<i64>, LaurentError> {
        let mut deg = vec![0i64; self.dim];
        for &(v, e) in m.pairs() {
            let d = self.get(v).ok_or(LaurentError::UngradedVariable(v))?;
            for (acc, &di) in deg.iter_mut().zip(d) {
                *acc += di * e as i64;
            }
        }
        Ok(deg)
    }
}

/// Outcome of [`LaurentPoly::degree_vector`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Homogeneity {
    Homogeneous(Vec<i64>),
    /// Two terms with different degrees.
    Inhomogeneous {
        first: Monomial,
        second: Monomial,
    },
    /// The zero polynomial has every degree.
    Zero,
}

/// Canonical Laurent polynomial: terms sorted by [`Monomial`] order, no zero
/// coefficients, no repeated monomials.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LaurentPoly {
    terms: Vec<(Monomial, BigInt)>,
}

impl LaurentPoly {
    pub fn zero() -> LaurentPoly {
        LaurentPoly::default()
    }

    pub fn one() -> LaurentPoly {
        LaurentPoly::constant(1)
    }

    pub fn constant<C: Into<BigInt>>(c: C) -> LaurentPoly {
        LaurentPoly::term(Monomial::one(), c)
    }

    pub fn var(v: Var) -> LaurentPoly {
        LaurentPoly::term(Monomial::var(v), 1)
    }

    pub fn term<C: Into<BigInt>>(m: Monomial, c: C) -> LaurentPoly {
        let c = c.into();
        if c.is_zero() {
            LaurentPoly::zero()
        } else {
            LaurentPoly { terms: vec![(m, c)] }
        }
    }

    pub fn from_monomial(m: Monomial) -> LaurentPoly {
        LaurentPoly::term(m, 1)
    }

    /// Collects terms into canonical form.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, BigInt)>>(terms: I) -> LaurentPoly {
        let mut map: FxHashMap<Monomial, BigInt> = FxHashMap::default();
        for (m, c) in terms {
            *map.entry(m).or_insert_with(BigInt::zero) += c;
        }
        LaurentPoly::from_map(map)
    }

    fn from_map(map: FxHashMap<Monomial, BigInt>) -> LaurentPoly {
        let mut terms: Vec<(Monomial, BigInt)> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        LaurentPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0.is_one() && self.terms[0].1.is_one()
    }

    /// Number of terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter().map(|(m, c)| (m, c))
    }

    /// The single term, if there is exactly one.
    pub fn as_term(&self) -> Option<(&Monomial, &BigInt)> {
        match self.terms.as_slice() {
            [(m, c)] => Some((m, c)),
            _ => None,
        }
    }

    pub fn coefficient(&self, m: &Monomial) -> BigInt {
        self.terms
            .binary_search_by(|(t, _)| t.cmp(m))
            .map(|i| self.terms[i].1.clone())
            .unwrap_or_else(|_| BigInt::zero())
    }

    pub fn constant_term(&self) -> BigInt {
        self.coefficient(&Monomial::one())
    }

    /// True when every coefficient-variable exponent is non-negative.
    pub fn is_admissible(&self) -> bool {
        self.terms.iter().all(|(m, _)| m.is_admissible())
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        self.terms.iter().flat_map(|(m, _)| m.pairs().iter().map(|&(v, _)| v)).collect()
    }

    /// Per-variable `(min, max)` exponent over all terms, absent exponents
    /// counting as zero.
    pub fn exponent_bounds(&self) -> BTreeMap<Var, (i32, i32)> {
        let mut bounds: BTreeMap<Var, (i32, i32)> = self.variables().into_iter().map(|v| (v, (0, 0))).collect();
        if self.terms.is_empty() {
            return bounds;
        }
        let mut seen: BTreeMap<Var, usize> = BTreeMap::new();
        for (m, _) in &self.terms {
            for &(v, e) in m.pairs() {
                let b = bounds.get_mut(&v).expect("collected above");
                let count = seen.entry(v).or_insert(0);
                if *count == 0 {
                    *b = (e, e);
                } else {
                    b.0 = b.0.min(e);
                    b.1 = b.1.max(e);
                }
                *count += 1;
            }
        }
        for (v, count) in seen {
            if count < self.terms.len() {
                let b = bounds.get_mut(&v).expect("collected above");
                b.0 = b.0.min(0);
                b.1 = b.1.max(0);
            }
        }
        bounds
    }

    pub fn scale(&self, c: &BigInt) -> LaurentPoly {
        if c.is_zero() {
            return LaurentPoly::zero();
        }
        LaurentPoly { terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect() }
    }

    /// Multiplies by a monomial; canonical order is not preserved under
    /// shifting, so terms are re-sorted.
    pub fn mul_monomial(&self, m: &Monomial) -> LaurentPoly {
        if m.is_one() {
            return self.clone();
        }
        let mut terms: Vec<(Monomial, BigInt)> = self.terms.iter().map(|(t, c)| (t.mul(m), c.clone())).collect();
        terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        LaurentPoly { terms }
    }

    /// Exact division by a monomial. Always succeeds for cluster variables;
    /// fails if a coefficient variable would go negative.
    pub fn div_monomial(&self, m: &Monomial) -> Result<LaurentPoly, LaurentError> {
        let out = self.mul_monomial(&m.pow(-1));
        for (t, _) in &out.terms {
            if let Some(&(v, _)) = t.pairs().iter().find(|&&(v, e)| v.is_coefficient() && e < 0) {
                return Err(LaurentError::NegativeCoefficientExponent(v));
            }
        }
        Ok(out)
    }

    /// Product, aborting with [`LaurentError::SizeLimit`] as soon as the
    /// partial result holds more than `limit` terms.
    pub fn mul_limited(&self, other: &LaurentPoly, limit: Option<usize>) -> Result<LaurentPoly, LaurentError> {
        if self.is_zero() || other.is_zero() {
            return Ok(LaurentPoly::zero());
        }
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        if small.len() == 1 {
            let (m, c) = &small.terms[0];
            let out = large.mul_monomial(m);
            return Ok(if c.is_one() { out } else { out.scale(c) });
        }
        if let Some(out) = mul_packed(small, large, limit) {
            return out;
        }
        mul_general(small, large, limit)
    }

    /// Non-negative power by repeated squaring.
    pub fn pow_limited(&self, e: u32, limit: Option<usize>) -> Result<LaurentPoly, LaurentError> {
        if e == 0 {
            return Ok(LaurentPoly::one());
        }
        if let Some((m, c)) = self.as_term() {
            return Ok(LaurentPoly::term(m.pow(e as i32), num_traits::pow(c.clone(), e as usize)));
        }
        let mut result: Option<LaurentPoly> = None;
        let mut base = self.clone();
        let mut e = e;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.mul_limited(&base, limit)?,
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.mul_limited(&base, limit)?;
        }
        Ok(result.expect("e > 0"))
    }

    pub fn pow(&self, e: u32) -> LaurentPoly {
        self.pow_limited(e, None).expect("no limit")
    }

    /// Exact division `self / divisor` in `Z[y][x^{±1}]`.
    ///
    /// Runs leading-term division under the dense lexicographic group order.
    /// Every candidate quotient exponent must lie in the box
    /// `[min(self) - min(divisor), max(self) - max(divisor)]` per variable,
    /// which any exact quotient satisfies; this makes the loop terminate on
    /// inexact input.
    pub fn div_exact(&self, divisor: &LaurentPoly) -> Result<LaurentPoly, LaurentError> {
        self.div_exact_limited(divisor, None)
    }

    /// [`div_exact`](Self::div_exact) that gives up with
    /// [`LaurentError::SizeLimit`] once quotient terms times divisor terms
    /// exceeds `limit`.
    pub fn div_exact_limited(&self, divisor: &LaurentPoly, limit: Option<usize>) -> Result<LaurentPoly, LaurentError> {
        if divisor.is_zero() {
            return Err(LaurentError::NonExactDivision);
        }
        if self.is_zero() {
            return Ok(LaurentPoly::zero());
        }
        if let Some((m, c)) = divisor.as_term() {
            if self.terms.iter().any(|(_, a)| !a.is_multiple_of(c)) {
                return Err(LaurentError::NonExactDivision);
            }
            let out = self.div_monomial(m).map_err(|_| LaurentError::NonExactDivision)?;
            return Ok(LaurentPoly { terms: out.terms.into_iter().map(|(t, a)| (t, a / c)).collect() });
        }

        let num_bounds = self.exponent_bounds();
        let den_bounds = divisor.exponent_bounds();
        let vars: BTreeSet<Var> = num_bounds.keys().chain(den_bounds.keys()).copied().collect();
        let mut window: BTreeMap<Var, (i32, i32)> = BTreeMap::new();
        for &v in &vars {
            let (nlo, nhi) = num_bounds.get(&v).copied().unwrap_or((0, 0));
            let (dlo, dhi) = den_bounds.get(&v).copied().unwrap_or((0, 0));
            let (lo, hi) = (nlo - dlo, nhi - dhi);
            if lo > hi {
                return Err(LaurentError::NonExactDivision);
            }
            window.insert(v, (lo, hi));
        }
        if self.len() < divisor.len() {
            return Err(LaurentError::NonExactDivision);
        }
        let vars: Vec<Var> = vars.into_iter().collect();
        let bound = |b: &BTreeMap<Var, (i32, i32)>, v: &Var| b.get(v).copied().unwrap_or((0, 0));
        let num_low: Vec<i32> = vars.iter().map(|v| bound(&num_bounds, v).0).collect();
        let num_span: Vec<i64> = vars.iter().map(|v| bound(&num_bounds, v)).map(|(l, h)| h as i64 - l as i64).collect();
        let den_low: Vec<i32> = vars.iter().map(|v| bound(&den_bounds, v).0).collect();
        let win: Vec<(i32, i32)> = vars.iter().map(|v| window[v]).collect();
        if let Some(out) = div_packed(self, divisor, &vars, &num_low, &num_span, &den_low, &win, limit) {
            return out;
        }

        let (lead_m, lead_c) = divisor.terms.iter().max_by(|a, b| a.0.dense_cmp(&b.0)).expect("divisor is nonzero");
        let mut rem: BTreeMap<DenseKey, BigInt> =
            self.terms.iter().map(|(m, c)| (DenseKey(m.clone()), c.clone())).collect();
        let mut quotient: Vec<(Monomial, BigInt)> = Vec::new();
        while let Some((key, c)) = rem.pop_last() {
            let qm = key.0.div(lead_m);
            let in_window = window.iter().all(|(&v, &(lo, hi))| {
                let e = qm.exponent(v);
                lo <= e && e <= hi
            });
            if !in_window || !qm.is_admissible() {
                return Err(LaurentError::NonExactDivision);
            }
            let (qc, r) = c.div_rem(lead_c);
            if !r.is_zero() {
                return Err(LaurentError::NonExactDivision);
            }
            for (dm, dc) in &divisor.terms {
                if std::ptr::eq(dm, lead_m) {
                    continue;
                }
                let k = DenseKey(dm.mul(&qm));
                let delta = dc * &qc;
                match rem.get_mut(&k) {
                    Some(e) => {
                        *e -= delta;
                        if e.is_zero() {
                            rem.remove(&k);
                        }
                    }
                    None => {
                        rem.insert(k, -delta);
                    }
                }
            }
            quotient.push((qm, qc));
            if let Some(limit) = limit {
                if quotient.len() as u128 * divisor.len() as u128 > limit as u128 {
                    return Err(LaurentError::SizeLimit { limit });
                }
            }
        }
        quotient.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Ok(LaurentPoly { terms: quotient })
    }

    /// Ring homomorphism sending each variable in `images` to its image and
    /// fixing the rest. A variable with a negative exponent must map to a
    /// unit monomial (coefficient ±1).
    pub fn substitute(&self, images: &HashMap<Var, LaurentPoly>) -> Result<LaurentPoly, LaurentError> {
        for (m, _) in &self.terms {
            for &(v, e) in m.pairs() {
                if e < 0 {
                    if let Some(img) = images.get(&v) {
                        let unit = img.as_term().map(|(_, c)| c.abs().is_one()).unwrap_or(false);
                        if !unit {
                            return Err(LaurentError::NonMonomialInverse { var: v, image: img.to_string() });
                        }
                    }
                }
            }
        }

        let all_monomial = images.values().all(|p| p.len() == 1);
        if all_monomial {
            let mapped = self.terms.iter().map(|(m, c)| {
                let mut coeff = c.clone();
                let mut pairs: Vec<(Var, i32)> = Vec::new();
                for &(v, e) in m.pairs() {
                    match images.get(&v).and_then(|p| p.as_term()) {
                        Some((im, ic)) => {
                            if e >= 0 {
                                coeff *= num_traits::pow(ic.clone(), e as usize);
                            } else if ic.is_negative() && e % 2 != 0 {
                                coeff = -coeff;
                            }
                            pairs.extend(im.pairs().iter().map(|&(w, a)| (w, a * e)));
                        }
                        None => pairs.push((v, e)),
                    }
                }
                (Monomial::from_pairs(pairs), coeff)
            });
            return Ok(LaurentPoly::from_terms(mapped));
        }

        let mut power_cache: HashMap<(Var, i32), LaurentPoly> = HashMap::new();
        let mut acc = LaurentPoly::zero();
        for (m, c) in &self.terms {
            let mut term = LaurentPoly::constant(c.clone());
            let mut kept: Vec<(Var, i32)> = Vec::new();
            for &(v, e) in m.pairs() {
                let Some(img) = images.get(&v) else {
                    kept.push((v, e));
                    continue;
                };
                let factor = power_cache.entry((v, e)).or_insert_with(|| {
                    if e >= 0 {
                        img.pow(e as u32)
                    } else {
                        let (im, ic) = img.as_term().expect("checked unit above");
                        LaurentPoly::term(im.pow(e), num_traits::pow(ic.clone(), (-e) as usize))
                    }
                });
                term = &term * &*factor;
            }
            acc = &acc + &term.mul_monomial(&Monomial::from_pairs(kept));
        }
        Ok(acc)
    }

    /// Common degree of all terms, or two witnesses of different degree.
    pub fn degree_vector(&self, grading: &Grading) -> Result<Homogeneity, LaurentError> {
        let mut iter = self.terms.iter();
        let Some((first, _)) = iter.next() else {
            return Ok(Homogeneity::Zero);
        };
        let deg = grading.monomial_degree(first)?;
        for (m, _) in iter {
            if grading.monomial_degree(m)? != deg {
                return Ok(Homogeneity::Inhomogeneous { first: first.clone(), second: m.clone() });
            }
        }
        Ok(Homogeneity::Homogeneous(deg))
    }

    fn add_signed(&self, other: &LaurentPoly, negate: bool) -> LaurentPoly {
        let (a, b) = (&self.terms, &other.terms);
        let mut terms = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        let sign = |c: &BigInt| if negate { -c } else { c.clone() };
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    terms.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    terms.push((b[j].0.clone(), sign(&b[j].1)));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = if negate { &a[i].1 - &b[j].1 } else { &a[i].1 + &b[j].1 };
                    if !c.is_zero() {
                        terms.push((a[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        terms.extend_from_slice(&a[i..]);
        terms.extend(b[j..].iter().map(|(m, c)| (m.clone(), sign(c))));
        LaurentPoly { terms }
    }
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.add_signed(rhs, false)
    }
}

impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.add_signed(rhs, true)
    }
}

impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.mul_limited(rhs, None).expect("no limit")
    }
}

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        LaurentPoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for LaurentPoly {
            type Output = LaurentPoly;
            fn $method(self, rhs: LaurentPoly) -> LaurentPoly {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (m, c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            match (n, c.is_negative()) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if m.is_one() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag}*{m}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for LaurentPoly {
    type Err = LaurentError;

    /// Parses the rendering grammar, e.g. `5*x1*x2^-1 - y3 + 2`.
    fn from_str(s: &str) -> Result<LaurentPoly, LaurentError> {
        let err = |msg: &str| LaurentError::Parse(format!("{msg} in {s:?}"));
        let src: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if src.is_empty() {
            return Err(err("empty input"));
        }
        if src == "0" {
            return Ok(LaurentPoly::zero());
        }
        // Split into signed terms; a '-' directly after '^' belongs to an exponent.
        let bytes = src.as_bytes();
        let mut pieces: Vec<(bool, &str)> = Vec::new();
        let mut start = 0;
        let mut negative = false;
        for i in 0..=bytes.len() {
            let boundary =
                i == bytes.len() || ((bytes[i] == b'+' || bytes[i] == b'-') && i > 0 && bytes[i - 1] != b'^');
            if i == 0 && !bytes.is_empty() && (bytes[0] == b'+' || bytes[0] == b'-') {
                negative = bytes[0] == b'-';
                start = 1;
                continue;
            }
            if boundary {
                pieces.push((negative, &src[start..i]));
                if i < bytes.len() {
                    negative = bytes[i] == b'-';
                    start = i + 1;
                }
            }
        }
        let mut terms = Vec::new();
        for (neg, piece) in pieces {
            if piece.is_empty() {
                return Err(err("empty term"));
            }
            let mut coeff = BigInt::one();
            let mut pairs = Vec::new();
            for factor in piece.split('*') {
                if factor.is_empty() {
                    return Err(err("empty factor"));
                }
                let first = factor.as_bytes()[0];
                if first.is_ascii_digit() {
                    let c: BigInt = factor.parse().map_err(|_| err("bad coefficient"))?;
                    coeff *= c;
                    continue;
                }
                let (name, exp) = match factor.split_once('^') {
                    Some((name, e)) => (name, e.parse::<i32>().map_err(|_| err("bad exponent"))?),
                    None => (factor, 1),
                };
                let index: u32 = name
                    .get(1..)
                    .and_then(|d| d.parse().ok())
                    .filter(|&i: &u32| i >= 1)
                    .ok_or_else(|| err("bad variable"))?;
                let v = match first {
                    b'x' => Var::X(index - 1),
                    b'y' => Var::Y(index - 1),
                    _ => return Err(err("bad variable")),
                };
                pairs.push((v, exp));
            }
            if neg {
                coeff = -coeff;
            }
            terms.push((Monomial::from_pairs(pairs), coeff));
        }
        Ok(LaurentPoly::from_terms(terms))
    }
}

fn mul_general(small: &LaurentPoly, large: &LaurentPoly, limit: Option<usize>) -> Result<LaurentPoly, LaurentError> {
    let cap = (small.len() * large.len()).min(limit.unwrap_or(usize::MAX)).min(1 << 20);
    let mut acc: FxHashMap<Monomial, BigInt> = FxHashMap::with_capacity_and_hasher(cap, Default::default());
    for (ms, cs) in &small.terms {
        for (ml, cl) in &large.terms {
            let prod = cs * cl;
            match acc.get_mut(&ms.mul(ml)) {
                Some(e) => *e += prod,
                None => {
                    acc.insert(ms.mul(ml), prod);
                }
            }
        }
        if let Some(limit) = limit {
            if acc.len() > limit {
                return Err(LaurentError::SizeLimit { limit });
            }
        }
    }
    let out = LaurentPoly::from_map(acc);
    match limit {
        Some(limit) if out.len() > limit => Err(LaurentError::SizeLimit { limit }),
        _ => Ok(out),
    }
}

/// Fixed-width exponent fields packed into one `u64`, each field holding an
/// exponent minus a per-variable offset. With `descending` the first
/// variable takes the highest bits, so key order is dense lexicographic order.
struct Layout {
    vars: Vec<Var>,
    shifts: Vec<u32>,
    widths: Vec<u32>,
}

impl Layout {
    fn new(vars: Vec<Var>, spans: &[i64], descending: bool) -> Option<Layout> {
        let widths: Vec<u32> = spans.iter().map(|&s| 64 - (s as u64).leading_zeros()).collect();
        let total: u32 = widths.iter().sum();
        if total > 64 {
            return None;
        }
        let mut shifts = Vec::with_capacity(widths.len());
        let mut shift = if descending { total } else { 0 };
        for &w in &widths {
            if descending {
                shift -= w;
                shifts.push(shift);
            } else {
                shifts.push(shift);
                shift += w;
            }
        }
        Some(Layout { vars, shifts, widths })
    }

    fn key(&self, m: &Monomial, low: &[i32]) -> u64 {
        let mut key = 0u64;
        let mut slot = 0;
        for &(v, e) in m.pairs() {
            while self.vars[slot] != v {
                key += ((-low[slot]) as u64) << self.shifts[slot];
                slot += 1;
            }
            key += ((e - low[slot]) as u64) << self.shifts[slot];
            slot += 1;
        }
        for rest in slot..self.vars.len() {
            key += ((-low[rest]) as u64) << self.shifts[rest];
        }
        key
    }

    fn field(&self, key: u64, slot: usize) -> u64 {
        match self.widths[slot] {
            0 => 0,
            w => (key >> self.shifts[slot]) & (u64::MAX >> (64 - w)),
        }
    }

    fn unpack(&self, key: u64, low: impl Fn(usize) -> i32) -> Monomial {
        let mut exps = SmallVec::new();
        for (slot, &v) in self.vars.iter().enumerate() {
            let e = self.field(key, slot) as i32 + low(slot);
            if e != 0 {
                exps.push((v, e));
            }
        }
        Monomial { exps }
    }
}

/// Layout for a product: a key of `a` plus a key of `b` is the key of the
/// product monomial.
struct Packing {
    layout: Layout,
    low_a: Vec<i32>,
    low_b: Vec<i32>,
}

impl Packing {
    fn new(a: &LaurentPoly, b: &LaurentPoly) -> Option<Packing> {
        let (ba, bb) = (a.exponent_bounds(), b.exponent_bounds());
        let vars: Vec<Var> = ba.keys().chain(bb.keys()).copied().collect::<BTreeSet<_>>().into_iter().collect();
        let (mut low_a, mut low_b, mut spans) = (Vec::new(), Vec::new(), Vec::new());
        for v in &vars {
            let (la, ha) = ba.get(v).copied().unwrap_or((0, 0));
            let (lb, hb) = bb.get(v).copied().unwrap_or((0, 0));
            spans.push((ha as i64 - la as i64) + (hb as i64 - lb as i64));
            low_a.push(la);
            low_b.push(lb);
        }
        Some(Packing { layout: Layout::new(vars, &spans, false)?, low_a, low_b })
    }

    fn key(&self, m: &Monomial, low: &[i32]) -> u64 {
        self.layout.key(m, low)
    }

    fn unpack(&self, key: u64) -> Monomial {
        self.layout.unpack(key, |slot| self.low_a[slot] + self.low_b[slot])
    }
}

/// Exact division over machine integers with packed exponents. Every
/// remainder monomial stays inside the numerator's exponent box, so keys
/// are offset by the numerator's lower bounds; `None` when the operands do
/// not fit or a coefficient overflows.
fn div_packed(
    num: &LaurentPoly,
    den: &LaurentPoly,
    vars: &[Var],
    num_low: &[i32],
    num_span: &[i64],
    den_low: &[i32],
    window: &[(i32, i32)],
    limit: Option<usize>,
) -> Option<Result<LaurentPoly, LaurentError>> {
    use num_traits::ToPrimitive;
    let layout = Layout::new(vars.to_vec(), num_span, true)?;
    let rem_terms: Vec<(u64, i128)> =
        num.terms.iter().map(|(m, c)| Some((layout.key(m, num_low), c.to_i128()?))).collect::<Option<_>>()?;
    let den_terms: Vec<(u64, i128)> =
        den.terms.iter().map(|(m, c)| Some((layout.key(m, den_low), c.to_i128()?))).collect::<Option<_>>()?;
    let &(lead_k, lead_c) = den_terms.iter().max_by_key(|t| t.0).expect("divisor is nonzero");
    let lead_fields: Vec<u64> = (0..vars.len()).map(|s| layout.field(lead_k, s)).collect();

    let mut rem: BTreeMap<u64, i128> = rem_terms.into_iter().collect();
    let mut quotient: Vec<(u64, i128)> = Vec::new();
    while let Some((key, c)) = rem.pop_last() {
        // Quotient field = exponent minus the window's lower bound.
        for (slot, &lf) in lead_fields.iter().enumerate() {
            let f = layout.field(key, slot);
            let (lo, hi) = window[slot];
            if f < lf || f - lf > (hi - lo) as u64 || (vars[slot].is_coefficient() && (f - lf) as i64 + (lo as i64) < 0)
            {
                return Some(Err(LaurentError::NonExactDivision));
            }
        }
        if c % lead_c != 0 {
            return Some(Err(LaurentError::NonExactDivision));
        }
        let (qk, qc) = (key - lead_k, c / lead_c);
        for &(dk, dc) in &den_terms {
            if dk == lead_k {
                continue;
            }
            let delta = dc.checked_mul(qc)?;
            let slot = rem.entry(qk + dk).or_insert(0);
            *slot = slot.checked_sub(delta)?;
            if *slot == 0 {
                rem.remove(&(qk + dk));
            }
        }
        quotient.push((qk, qc));
        if let Some(limit) = limit {
            if quotient.len() as u128 * den_terms.len() as u128 > limit as u128 {
                return Some(Err(LaurentError::SizeLimit { limit }));
            }
        }
    }
    let mut terms: Vec<(Monomial, BigInt)> =
        quotient.into_iter().map(|(k, c)| (layout.unpack(k, |slot| window[slot].0), BigInt::from(c))).collect();
    terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    Some(Ok(LaurentPoly { terms }))
}

/// Product over machine integers with packed exponents; `None` when the
/// operands do not fit, in which case the general path runs.
fn mul_packed(
    small: &LaurentPoly,
    large: &LaurentPoly,
    limit: Option<usize>,
) -> Option<Result<LaurentPoly, LaurentError>> {
    use num_traits::ToPrimitive;
    let packing = Packing::new(small, large)?;
    let pack = |p: &LaurentPoly, low: &[i32]| -> Option<Vec<(u64, i128)>> {
        p.terms.iter().map(|(m, c)| Some((packing.key(m, low), c.to_i128()?))).collect()
    };
    let a = pack(small, &packing.low_a)?;
    let b = pack(large, &packing.low_b)?;
    let cap = (a.len() * b.len()).min(limit.unwrap_or(usize::MAX)).min(1 << 20);
    let mut acc: FxHashMap<u64, i128> = FxHashMap::with_capacity_and_hasher(cap, Default::default());
    // Slots whose running sum left the i128 range.
    let mut spill: FxHashMap<u64, BigInt> = FxHashMap::default();
    for &(ka, ca) in &a {
        for &(kb, cb) in &b {
            let key = ka + kb;
            let slot = acc.entry(key).or_insert(0);
            match ca.checked_mul(cb).and_then(|p| slot.checked_add(p)) {
                Some(v) => *slot = v,
                None => {
                    *spill.entry(key).or_default() += BigInt::from(ca) * BigInt::from(cb);
                }
            }
        }
        if let Some(limit) = limit {
            if acc.len() > limit {
                return Some(Err(LaurentError::SizeLimit { limit }));
            }
        }
    }
    let mut terms: Vec<(Monomial, BigInt)> = acc
        .into_iter()
        .filter_map(|(k, c)| {
            let c = match spill.remove(&k) {
                Some(big) => big + c,
                None => BigInt::from(c),
            };
            (!c.is_zero()).then(|| (packing.unpack(k), c))
        })
        .collect();
    if let Some(limit) = limit {
        if terms.len() > limit {
            return Some(Err(LaurentError::SizeLimit { limit }));
        }
    }
    terms.sort_unstable_by(|x, y| x.0.cmp(&y.0));
    Some(Ok(LaurentPoly { terms }))
}
