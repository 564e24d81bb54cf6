use std::collections::HashMap;

use num_bigint::BigInt;
use proptest::prelude::*;

use clusterfold::unfolding::{standard_covering, verify_covering};
use clusterfold::{Covering, ExchangeMatrix, Grading, Homogeneity, LaurentPoly, Monomial, Seed, Var};

fn var() -> impl Strategy<Value = Var> {
    prop_oneof![(1usize..=3).prop_map(Var::x), (1usize..=2).prop_map(Var::y)]
}

fn monomial() -> impl Strategy<Value = Monomial> {
    prop::collection::vec((var(), -3i32..=3), 0..4).prop_map(Monomial::from_pairs)
}

fn poly() -> impl Strategy<Value = LaurentPoly> {
    prop::collection::vec((monomial(), -5i64..=5), 0..5)
        .prop_map(|terms| LaurentPoly::from_terms(terms.into_iter().map(|(m, c)| (m, BigInt::from(c)))))
}

/// Polynomials in which no coefficient variable has a negative exponent.
fn admissible_poly() -> impl Strategy<Value = LaurentPoly> {
    let monomial =
        (prop::collection::vec((1usize..=3, -3i32..=3), 0..3), prop::collection::vec((1usize..=2, 0i32..=3), 0..2))
            .prop_map(|(xs, ys)| {
                Monomial::from_pairs(
                    xs.into_iter().map(|(i, e)| (Var::x(i), e)).chain(ys.into_iter().map(|(i, e)| (Var::y(i), e))),
                )
            });
    prop::collection::vec((monomial, -5i64..=5), 0..5)
        .prop_map(|terms| LaurentPoly::from_terms(terms.into_iter().map(|(m, c)| (m, BigInt::from(c)))))
}

/// Acyclic sign-skew-symmetric matrices: arrows only go from lower to
/// higher index, with independent magnitudes in each direction.
fn acyclic_matrix(n: usize) -> impl Strategy<Value = ExchangeMatrix> {
    let pairs = n * (n - 1) / 2;
    (prop::collection::vec((0i64..=3, 1i64..=3), pairs), Just(n)).prop_map(|(entries, n)| {
        let mut rows = vec![vec![0i64; n]; n];
        let mut it = entries.into_iter();
        for i in 0..n {
            for j in i + 1..n {
                let (a, m) = it.next().unwrap();
                rows[i][j] = a;
                rows[j][i] = -a.signum() * m;
            }
        }
        ExchangeMatrix::from_rows(&rows).unwrap()
    })
}

/// Acyclic skew-symmetrizable matrices `b_ij = s_ij d_j`.
fn symmetrizable_matrix(n: usize) -> impl Strategy<Value = ExchangeMatrix> {
    let pairs = n * (n - 1) / 2;
    (prop::collection::vec(0i64..=2, pairs), prop::collection::vec(1i64..=3, n)).prop_map(move |(s, d)| {
        let mut rows = vec![vec![0i64; n]; n];
        let mut it = s.into_iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = it.next().unwrap();
                rows[i][j] = v * d[j];
                rows[j][i] = -v * d[i];
            }
        }
        ExchangeMatrix::from_rows(&rows).unwrap()
    })
}

fn covering() -> impl Strategy<Value = Covering> {
    prop_oneof![symmetrizable_matrix(2), symmetrizable_matrix(3)]
        .prop_filter_map("standard covering exists", |b| standard_covering(&b).ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(a in poly(), b in poly(), c in poly()) {
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert!((&a - &a).is_zero());
        prop_assert_eq!(&a * &LaurentPoly::one(), a.clone());
    }

    #[test]
    fn exact_division_inverts_multiplication(
        a in admissible_poly(),
        b in admissible_poly().prop_filter("nonzero", |p| !p.is_zero()),
    ) {
        let product = &a * &b;
        prop_assert_eq!(product.div_exact(&b).unwrap(), a);
    }

    #[test]
    fn polynomial_text_round_trips(a in poly()) {
        let text = a.to_string();
        let parsed: LaurentPoly = text.parse().unwrap();
        prop_assert_eq!(parsed.to_string(), text);
        prop_assert_eq!(parsed, a);
    }

    #[test]
    fn substitution_is_a_ring_homomorphism(
        a in poly(),
        b in poly(),
        images in prop::collection::vec((monomial(), prop::bool::ANY), 5),
    ) {
        let vars = [Var::x(1), Var::x(2), Var::x(3), Var::y(1), Var::y(2)];
        let images: HashMap<Var, LaurentPoly> = vars
            .iter()
            .zip(images)
            .map(|(&v, (m, negative))| (v, LaurentPoly::term(m, if negative { -1 } else { 1 })))
            .collect();
        let s = |p: &LaurentPoly| p.substitute(&images).unwrap();
        prop_assert_eq!(s(&(&a * &b)), &s(&a) * &s(&b));
        prop_assert_eq!(s(&(&a + &b)), &s(&a) + &s(&b));
    }

    #[test]
    fn degree_is_additive(m1 in monomial(), m2 in monomial(), degrees in prop::collection::vec(prop::collection::vec(-2i64..=2, 2), 5)) {
        let mut grading = Grading::new(2);
        for (v, d) in [Var::x(1), Var::x(2), Var::x(3), Var::y(1), Var::y(2)].into_iter().zip(degrees) {
            grading.set(v, d);
        }
        let d1 = grading.monomial_degree(&m1).unwrap();
        let d2 = grading.monomial_degree(&m2).unwrap();
        let sum: Vec<i64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
        prop_assert_eq!(grading.monomial_degree(&m1.mul(&m2)).unwrap(), sum.clone());
        let p = LaurentPoly::from_monomial(m1.mul(&m2)).scale(&BigInt::from(7));
        prop_assert_eq!(p.degree_vector(&grading).unwrap(), Homogeneity::Homogeneous(sum));
    }

    #[test]
    fn matrix_mutation_is_an_involution(b in prop_oneof![acyclic_matrix(3), acyclic_matrix(4)], k in 0usize..3) {
        let once = b.mutate(k).unwrap();
        prop_assert_eq!(once.mutate(k).unwrap(), b.clone());
        let extended = b.principal_extension();
        prop_assert_eq!(extended.mutate(k).unwrap().mutate(k).unwrap(), extended);
    }

    #[test]
    fn seed_mutation_is_an_involution(b in acyclic_matrix(3), k in 0usize..3, path in prop::collection::vec(0usize..3, 0..3)) {
        let seed = Seed::initial(&b).unwrap().mutate_sequence(&path).unwrap();
        let back = seed.mutate(k).unwrap().mutate(k).unwrap();
        prop_assert_eq!(back.cluster(), seed.cluster());
        prop_assert_eq!(back.matrix(), seed.matrix());
    }

    #[test]
    fn matrix_and_seed_text_round_trip(b in acyclic_matrix(3), path in prop::collection::vec(0usize..3, 0..3)) {
        let text = b.to_text();
        let parsed: ExchangeMatrix = text.parse().unwrap();
        prop_assert_eq!(parsed.to_text(), text);

        let seed = Seed::initial(&b).unwrap().mutate_sequence(&path).unwrap();
        let dump = seed.to_text();
        prop_assert_eq!(Seed::parse(&dump).unwrap().to_text(), dump);
    }

    #[test]
    fn orbit_mutation_is_an_equivariant_involution(c in covering(), picks in prop::collection::vec(0usize..3, 1..4)) {
        let n = c.folded_rank();
        let seq: Vec<usize> = picks.into_iter().map(|k| k % n).collect();
        let mut current = c.clone();
        for &o in &seq {
            let mutated = current.orbit_mutate(o).unwrap();
            mutated.action().check_compatible(mutated.quiver()).unwrap();
            prop_assert_eq!(mutated.orbit_mutate(o).unwrap().to_text(), current.to_text());
            current = mutated;
        }
        prop_assert!(verify_covering(&c, &seq).unwrap().divergence.is_none());
    }

    #[test]
    fn covering_text_round_trips(c in covering()) {
        let text = c.to_text();
        let parsed = Covering::parse(&text).unwrap();
        prop_assert_eq!(parsed.to_text(), text);
        prop_assert_eq!(parsed.folded(), c.folded());
    }
}
