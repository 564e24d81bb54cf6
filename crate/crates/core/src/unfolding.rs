//! Ice quivers with finite group actions, orbit mutation, folding, and the
//! projection from a covering cluster algebra onto its folded one.
//!
//! Vertices are indexed `0..nv` in the order they were declared. Within a
//! covering, exchangeable vertices keep that order as seed positions, and
//! orbits are numbered with exchangeable orbits first, each block sorted by
//! minimal vertex.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use num_integer::Integer;
use thiserror::Error;

use crate::exchange::{ExchangeError, ExchangeMatrix};
use crate::laurent::{LaurentPoly, Var};
use crate::seed::{GVector, Seed, SeedError};

/// Largest group the enumeration will build.
pub const GROUP_CAP: usize = 10_000;

/// Largest symmetrizer entry tried by [`standard_covering`].
pub const MAX_SYMMETRIZER: i64 = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UnfoldingError {
    #[error("quiver: {0}")]
    InvalidQuiver(String),
    #[error("generator {generator} is not a permutation of the {n} vertices")]
    InvalidPermutation { generator: usize, n: usize },
    #[error("group generated exceeds {cap} elements")]
    GroupTooLarge { cap: usize },
    #[error("the frozen set is not stable under generator {generator}")]
    FrozenNotStable { generator: usize },
    #[error("generator {generator} does not preserve b at ({i}, {j})")]
    NotEquivariant { generator: usize, i: String, j: String },
    #[error("orbit sum b[{row}][{col}] depends on the representative of {col}")]
    RepresentativeDependent { row: String, col: String },
    #[error("folded matrix is not sign-skew-symmetric at ({i}, {j})")]
    NotSignSkewSymmetric { i: usize, j: usize },
    #[error("orbit of {vertex} is not mutable: {reason}")]
    OrbitNotMutable { vertex: String, reason: String },
    #[error("orbit of {0} is frozen")]
    FrozenOrbit(String),
    #[error("unknown vertex or orbit {0:?}")]
    UnknownOrbit(String),
    #[error("orbit mutation at {vertex} depends on the order of its vertices")]
    OrderDependent { vertex: String },
    #[error("no standard covering: {0}")]
    Unsupported(String),
    #[error("quiver file: {0}")]
    Parse(String),
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
}

/// Finite ice quiver stored as a skew-symmetric matrix over its vertices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IceQuiver {
    names: Vec<String>,
    b: Vec<i64>,
    frozen: Vec<bool>,
}

impl IceQuiver {
    /// Builds a quiver from `b` rows; rejects non-skew-symmetric input and
    /// arrows between frozen vertices.
    pub fn new(names: Vec<String>, b: Vec<Vec<i64>>, frozen: Vec<bool>) -> Result<IceQuiver, UnfoldingError> {
        let nv = names.len();
        let bad = |s: String| Err(UnfoldingError::InvalidQuiver(s));
        if b.len() != nv || b.iter().any(|r| r.len() != nv) || frozen.len() != nv {
            return bad(format!("expected {nv} rows of {nv} entries and {nv} frozen flags"));
        }
        let unique: HashSet<&String> = names.iter().collect();
        if unique.len() != nv {
            return bad("duplicate vertex name".into());
        }
        if let Some(name) =
            names.iter().find(|n| n.is_empty() || n.contains(|c: char| c.is_whitespace() || "()[]".contains(c)))
        {
            return bad(format!("bad vertex name {name:?}"));
        }
        for i in 0..nv {
            for j in 0..nv {
                if b[i][j] != -b[j][i] {
                    return bad(format!("b is not skew-symmetric at ({}, {})", names[i], names[j]));
                }
                if frozen[i] && frozen[j] && b[i][j] != 0 {
                    return bad(format!("arrow between frozen vertices {} and {}", names[i], names[j]));
                }
            }
        }
        Ok(IceQuiver { names, b: b.concat(), frozen })
    }

    /// Quiver of a skew-symmetric `B` with vertices named `1..n`.
    pub fn from_matrix(b: &ExchangeMatrix) -> Result<IceQuiver, UnfoldingError> {
        if !b.is_square() || !b.is_skew_symmetric() {
            return Err(UnfoldingError::InvalidQuiver("matrix is not square skew-symmetric".into()));
        }
        let n = b.rank();
        IceQuiver::new((1..=n).map(|i| i.to_string()).collect(), b.to_rows(), vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.b[i * self.len() + j]
    }

    pub fn is_frozen(&self, v: usize) -> bool {
        self.frozen[v]
    }

    pub fn has_frozen(&self) -> bool {
        self.frozen.iter().any(|&f| f)
    }

    pub fn unfrozen(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| !self.frozen[v]).collect()
    }

    pub fn frozen(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.frozen[v]).collect()
    }

    /// Extended exchange matrix: rows are exchangeable then frozen vertices,
    /// columns are exchangeable vertices, both in vertex order.
    pub fn exchange_matrix(&self) -> ExchangeMatrix {
        let cols = self.unfrozen();
        let rows: Vec<Vec<i64>> =
            cols.iter().chain(self.frozen().iter()).map(|&i| cols.iter().map(|&j| self.get(i, j)).collect()).collect();
        ExchangeMatrix::from_rows(&rows).expect("rows are at least columns")
    }

    /// Applies the simultaneous mutation rule at every vertex of `orbit`.
    fn mutate_set(&self, orbit: &[usize]) -> IceQuiver {
        let nv = self.len();
        let inside: Vec<bool> = (0..nv).map(|v| orbit.contains(&v)).collect();
        let mut b = vec![0i64; nv * nv];
        for j in 0..nv {
            for k in 0..nv {
                let bjk = self.get(j, k);
                b[j * nv + k] = if inside[j] || inside[k] {
                    -bjk
                } else if self.frozen[j] && self.frozen[k] {
                    0
                } else {
                    bjk + orbit
                        .iter()
                        .map(|&i| {
                            let (bji, bik) = (self.get(j, i), self.get(i, k));
                            (bji.abs() * bik + bji * bik.abs()) / 2
                        })
                        .sum::<i64>()
                };
            }
        }
        IceQuiver { names: self.names.clone(), b, frozen: self.frozen.clone() }
    }

    /// Ordinary mutation at one exchangeable vertex.
    pub fn mutate(&self, k: usize) -> Result<IceQuiver, UnfoldingError> {
        if self.frozen[k] {
            return Err(UnfoldingError::FrozenOrbit(self.names[k].clone()));
        }
        Ok(self.mutate_set(&[k]))
    }

    /// Adds a frozen vertex `v'` with a single arrow `v' -> v` for every
    /// exchangeable vertex `v`.
    pub fn principalized(&self) -> Result<IceQuiver, UnfoldingError> {
        if self.has_frozen() {
            return Err(UnfoldingError::InvalidQuiver("quiver already has frozen vertices".into()));
        }
        let n = self.len();
        let mut names = self.names.clone();
        names.extend(self.names.iter().map(|v| format!("{v}'")));
        let mut b = vec![vec![0i64; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                b[i][j] = self.get(i, j);
            }
            b[n + i][i] = 1;
            b[i][n + i] = -1;
        }
        let mut frozen = vec![false; n];
        frozen.extend(vec![true; n]);
        IceQuiver::new(names, b, frozen)
    }
}

/// A finite permutation group on the vertex set, given by generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupAction {
    generators: Vec<Vec<usize>>,
    elements: Vec<Vec<usize>>,
    orbits: Vec<Vec<usize>>,
    orbit_of: Vec<usize>,
}

impl GroupAction {
    /// Enumerates the group generated by `generators` on `nv` points.
    pub fn new(nv: usize, generators: Vec<Vec<usize>>) -> Result<GroupAction, UnfoldingError> {
        for (g, perm) in generators.iter().enumerate() {
            let mut seen = vec![false; nv];
            if perm.len() != nv || perm.iter().any(|&p| p >= nv || std::mem::replace(&mut seen[p], true)) {
                return Err(UnfoldingError::InvalidPermutation { generator: g + 1, n: nv });
            }
        }
        let identity: Vec<usize> = (0..nv).collect();
        let mut elements = vec![identity.clone()];
        let mut known: HashSet<Vec<usize>> = HashSet::from([identity]);
        let mut queue: VecDeque<usize> = VecDeque::from([0]);
        while let Some(e) = queue.pop_front() {
            for g in &generators {
                let composed: Vec<usize> = elements[e].iter().map(|&p| g[p]).collect();
                if known.insert(composed.clone()) {
                    if elements.len() == GROUP_CAP {
                        return Err(UnfoldingError::GroupTooLarge { cap: GROUP_CAP });
                    }
                    elements.push(composed);
                    queue.push_back(elements.len() - 1);
                }
            }
        }

        let mut orbit_of = vec![usize::MAX; nv];
        let mut orbits: Vec<Vec<usize>> = Vec::new();
        for v in 0..nv {
            if orbit_of[v] != usize::MAX {
                continue;
            }
            let mut orbit: Vec<usize> = elements.iter().map(|e| e[v]).collect();
            orbit.sort_unstable();
            orbit.dedup();
            for &u in &orbit {
                orbit_of[u] = orbits.len();
            }
            orbits.push(orbit);
        }
        Ok(GroupAction { generators, elements, orbits, orbit_of })
    }

    pub fn trivial(nv: usize) -> GroupAction {
        GroupAction::new(nv, Vec::new()).expect("trivial group")
    }

    pub fn degree(&self) -> usize {
        self.orbit_of.len()
    }

    pub fn generators(&self) -> &[Vec<usize>] {
        &self.generators
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Orbits sorted by minimal vertex, each sorted.
    pub fn orbits(&self) -> &[Vec<usize>] {
        &self.orbits
    }

    pub fn orbit(&self, v: usize) -> &[usize] {
        &self.orbits[self.orbit_of[v]]
    }

    /// Same action extended to a principalized quiver: vertex `n + v` moves
    /// like `v`.
    pub fn doubled(&self) -> GroupAction {
        let n = self.degree();
        let generators =
            self.generators.iter().map(|g| g.iter().copied().chain(g.iter().map(|&p| p + n)).collect()).collect();
        GroupAction::new(2 * n, generators).expect("doubling keeps the group")
    }

    /// Verifies the generators preserve the frozen set and `b`.
    pub fn check_compatible(&self, q: &IceQuiver) -> Result<(), UnfoldingError> {
        if self.degree() != q.len() {
            return Err(UnfoldingError::InvalidQuiver(format!(
                "group acts on {} points but the quiver has {} vertices",
                self.degree(),
                q.len()
            )));
        }
        for (g, perm) in self.generators.iter().enumerate() {
            if (0..q.len()).any(|v| q.is_frozen(v) != q.is_frozen(perm[v])) {
                return Err(UnfoldingError::FrozenNotStable { generator: g + 1 });
            }
        }
        Ok(())
    }

    fn check_equivariant(&self, q: &IceQuiver) -> Result<(), UnfoldingError> {
        for (g, perm) in self.generators.iter().enumerate() {
            for i in 0..q.len() {
                for j in 0..q.len() {
                    if q.get(perm[i], perm[j]) != q.get(i, j) {
                        return Err(UnfoldingError::NotEquivariant {
                            generator: g + 1,
                            i: q.name(i).to_string(),
                            j: q.name(j).to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// True iff some arrow joins two vertices of the orbit of `i`.
pub fn has_gamma_loop(q: &IceQuiver, a: &GroupAction, i: usize) -> bool {
    let orbit = a.orbit(i);
    orbit.iter().any(|&u| orbit.iter().any(|&v| q.get(u, v) != 0))
}

/// True iff there are arrows `i' -> j -> i''` with `i', i''` in the orbit of
/// `i` and `j` outside it.
pub fn has_gamma_two_cycle(q: &IceQuiver, a: &GroupAction, i: usize) -> bool {
    let orbit = a.orbit(i);
    (0..q.len())
        .filter(|j| !orbit.contains(j))
        .any(|j| orbit.iter().any(|&u| q.get(u, j) > 0) && orbit.iter().any(|&u| q.get(j, u) > 0))
}

/// Mutation at the whole orbit of `i`.
pub fn orbit_mutate(q: &IceQuiver, a: &GroupAction, i: usize) -> Result<IceQuiver, UnfoldingError> {
    if q.is_frozen(i) {
        return Err(UnfoldingError::FrozenOrbit(q.name(i).to_string()));
    }
    let not_mutable =
        |reason: &str| UnfoldingError::OrbitNotMutable { vertex: q.name(i).to_string(), reason: reason.to_string() };
    if has_gamma_loop(q, a, i) {
        return Err(not_mutable("arrow inside the orbit"));
    }
    if has_gamma_two_cycle(q, a, i) {
        return Err(not_mutable("2-cycle through the orbit"));
    }
    Ok(q.mutate_set(a.orbit(i)))
}

/// Orbits in folded order: exchangeable orbits, then frozen orbits.
fn folded_orbits(q: &IceQuiver, a: &GroupAction) -> Vec<Vec<usize>> {
    let (mut live, frozen): (Vec<Vec<usize>>, Vec<Vec<usize>>) =
        a.orbits().iter().cloned().partition(|o| !q.is_frozen(o[0]));
    live.extend(frozen);
    live
}

/// Orbit-summed matrix: rows are all orbits, columns exchangeable orbits.
pub fn fold(q: &IceQuiver, a: &GroupAction) -> Result<ExchangeMatrix, UnfoldingError> {
    a.check_compatible(q)?;
    let orbits = folded_orbits(q, a);
    let n = orbits.iter().filter(|o| !q.is_frozen(o[0])).count();
    let mut rows = Vec::with_capacity(orbits.len());
    for row in &orbits {
        let mut entries = Vec::with_capacity(n);
        for col in &orbits[..n] {
            let sums: Vec<i64> = col.iter().map(|&j| row.iter().map(|&i| q.get(i, j)).sum()).collect();
            if sums.iter().any(|&s| s != sums[0]) {
                return Err(UnfoldingError::RepresentativeDependent {
                    row: q.name(row[0]).to_string(),
                    col: q.name(col[0]).to_string(),
                });
            }
            entries.push(sums[0]);
        }
        rows.push(entries);
    }
    for o in &orbits[..n] {
        let i = o[0];
        if has_gamma_loop(q, a, i) || has_gamma_two_cycle(q, a, i) {
            return Err(UnfoldingError::OrbitNotMutable {
                vertex: q.name(i).to_string(),
                reason: "fold needs a quiver without orbit loops or 2-cycles".into(),
            });
        }
    }
    a.check_equivariant(q)?;
    let folded = ExchangeMatrix::from_rows(&rows)?;
    for i in 0..n {
        for j in 0..n {
            let (bij, bji) = (folded.get(i, j), folded.get(j, i));
            if (i == j && bij != 0) || bij.signum() != -bji.signum() {
                return Err(UnfoldingError::NotSignSkewSymmetric { i: i + 1, j: j + 1 });
            }
        }
    }
    Ok(folded)
}

/// A quiver with a group action folding to a sign-skew-symmetric matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Covering {
    quiver: IceQuiver,
    action: GroupAction,
    folded: ExchangeMatrix,
    orbits: Vec<Vec<usize>>,
    folded_index: Vec<usize>,
    position: Vec<Option<usize>>,
}

impl Covering {
    pub fn new(quiver: IceQuiver, action: GroupAction) -> Result<Covering, UnfoldingError> {
        let folded = fold(&quiver, &action)?;
        let orbits = folded_orbits(&quiver, &action);
        let mut folded_index = vec![0; quiver.len()];
        for (o, orbit) in orbits.iter().enumerate() {
            for &v in orbit {
                folded_index[v] = o;
            }
        }
        let mut position = vec![None; quiver.len()];
        for (p, v) in quiver.unfrozen().into_iter().enumerate() {
            position[v] = Some(p);
        }
        Ok(Covering { quiver, action, folded, orbits, folded_index, position })
    }

    /// The covering of a skew-symmetric matrix by its own quiver.
    pub fn trivial(b: &ExchangeMatrix) -> Result<Covering, UnfoldingError> {
        let q = IceQuiver::from_matrix(b)?;
        let a = GroupAction::trivial(q.len());
        Covering::new(q, a)
    }

    pub fn quiver(&self) -> &IceQuiver {
        &self.quiver
    }

    pub fn action(&self) -> &GroupAction {
        &self.action
    }

    pub fn folded(&self) -> &ExchangeMatrix {
        &self.folded
    }

    /// Number of exchangeable orbits.
    pub fn folded_rank(&self) -> usize {
        self.folded.rank()
    }

    /// Orbits in folded order.
    pub fn orbits(&self) -> &[Vec<usize>] {
        &self.orbits
    }

    pub fn folded_index(&self, v: usize) -> usize {
        self.folded_index[v]
    }

    /// Seed position of an exchangeable vertex.
    pub fn position(&self, v: usize) -> Option<usize> {
        self.position[v]
    }

    /// Seed positions of the exchangeable orbit with folded index `o`.
    pub fn orbit_positions(&self, o: usize) -> Vec<usize> {
        self.orbits[o].iter().filter_map(|&v| self.position[v]).collect()
    }

    /// Resolves an orbit reference: a vertex name, else a 1-based folded index.
    pub fn resolve_orbit(&self, token: &str) -> Result<usize, UnfoldingError> {
        let o = match self.quiver.index_of(token) {
            Some(v) => self.folded_index[v],
            None => match token.parse::<usize>() {
                Ok(k) if (1..=self.orbits.len()).contains(&k) => k - 1,
                _ => return Err(UnfoldingError::UnknownOrbit(token.to_string())),
            },
        };
        if o >= self.folded_rank() {
            return Err(UnfoldingError::FrozenOrbit(token.to_string()));
        }
        Ok(o)
    }

    /// Name of an orbit: its minimal vertex.
    pub fn orbit_name(&self, o: usize) -> &str {
        self.quiver.name(self.orbits[o][0])
    }

    /// Orbit mutation of the quiver at folded index `o`.
    pub fn orbit_mutate(&self, o: usize) -> Result<Covering, UnfoldingError> {
        self.check_live(o)?;
        let quiver = orbit_mutate(&self.quiver, &self.action, self.orbits[o][0])?;
        Covering::new(quiver, self.action.clone())
    }

    fn check_live(&self, o: usize) -> Result<(), UnfoldingError> {
        if o >= self.orbits.len() {
            return Err(UnfoldingError::UnknownOrbit((o + 1).to_string()));
        }
        if o >= self.folded_rank() {
            return Err(UnfoldingError::FrozenOrbit(self.orbit_name(o).to_string()));
        }
        Ok(())
    }

    /// True when the quiver has no frozen vertices, so seeds on both sides
    /// carry principal coefficients.
    pub fn is_principal(&self) -> bool {
        !self.quiver.has_frozen()
    }

    /// The covering with a principal frozen vertex attached to every
    /// exchangeable vertex.
    pub fn principalized(&self) -> Result<Covering, UnfoldingError> {
        Covering::new(self.quiver.principalized()?, self.action.doubled())
    }

    /// Initial seed of the covering cluster algebra.
    pub fn covering_seed(&self) -> Result<Seed, UnfoldingError> {
        let m = self.quiver.exchange_matrix();
        Ok(if self.is_principal() { Seed::principal(&m)? } else { Seed::from_extended(&m)? })
    }

    /// Initial seed of the folded cluster algebra.
    pub fn folded_seed(&self) -> Result<Seed, UnfoldingError> {
        Ok(if self.is_principal() { Seed::principal(&self.folded)? } else { Seed::from_extended(&self.folded)? })
    }

    /// The projection `x_v -> x_[v]`, `y_v -> y_[v]` onto folded variables.
    pub fn project_pi(&self, p: &LaurentPoly) -> Result<LaurentPoly, UnfoldingError> {
        let live = self.quiver.unfrozen();
        let frozen = self.quiver.frozen();
        let n = self.folded_rank();
        let mut images: HashMap<Var, LaurentPoly> = HashMap::new();
        for v in p.variables() {
            let target = match v {
                Var::X(i) => Var::x(self.folded_index[live[i as usize]]),
                Var::Y(j) if self.is_principal() => Var::y(self.folded_index[live[j as usize]]),
                Var::Y(j) => Var::y(self.folded_index[frozen[j as usize]] - n),
            };
            images.insert(v, LaurentPoly::var(target));
        }
        Ok(p.substitute(&images).map_err(SeedError::from)?)
    }

    /// Sums covering coordinates over each exchangeable orbit.
    pub fn lambda_degree(&self, g: &[i64]) -> GVector {
        (0..self.folded_rank()).map(|o| self.orbit_positions(o).iter().map(|&p| g[p]).sum()).collect()
    }

    /// Mutates a covering seed at every vertex of orbit `o`. Orbits with
    /// more than one vertex are also mutated in reverse order and the two
    /// results compared.
    pub fn orbit_mutate_seed(&self, seed: &Seed, o: usize, budget: Option<usize>) -> Result<Seed, UnfoldingError> {
        self.check_live(o)?;
        let positions = self.orbit_positions(o);
        let m = seed.matrix();
        if positions.iter().any(|&u| positions.iter().any(|&v| m.get(u, v) != 0)) {
            return Err(UnfoldingError::OrbitNotMutable {
                vertex: self.orbit_name(o).to_string(),
                reason: "arrow inside the orbit".into(),
            });
        }
        let forward = seed.mutate_sequence_with_budget(&positions, budget)?;
        if positions.len() > 1 {
            let reversed: Vec<usize> = positions.iter().rev().copied().collect();
            let backward = seed.mutate_sequence_with_budget(&reversed, budget)?;
            if backward.cluster() != forward.cluster() || backward.matrix() != forward.matrix() {
                return Err(UnfoldingError::OrderDependent { vertex: self.orbit_name(o).to_string() });
            }
        }
        Ok(forward)
    }

    /// Quiver file text; see [`Covering::parse`].
    pub fn to_text(&self) -> String {
        let q = &self.quiver;
        let mut s = format!("quiver {}\n", q.len());
        s.push_str(&format!("vertices {}\n", q.names().join(" ")));
        let frozen: Vec<&str> = q.frozen().into_iter().map(|v| q.name(v)).collect();
        s.push_str(&format!("frozen{}{}\n", if frozen.is_empty() { "" } else { " " }, frozen.join(" ")));
        s.push_str("arrows\n");
        for i in 0..q.len() {
            for j in i + 1..q.len() {
                if q.get(i, j) != 0 {
                    s.push_str(&format!("{} {} {}\n", q.name(i), q.name(j), q.get(i, j)));
                }
            }
        }
        s.push_str("group\n");
        for g in self.action.generators() {
            s.push_str(&cycle_notation(g, q.names()));
            s.push('\n');
        }
        s
    }

    /// Parses the quiver file format:
    ///
    /// ```text
    /// quiver 3
    /// vertices 1 2a 2b
    /// frozen
    /// arrows
    /// 1 2a 1
    /// 1 2b 1
    /// group
    /// (2a 2b)
    /// ```
    pub fn parse(text: &str) -> Result<Covering, UnfoldingError> {
        let err = |s: String| UnfoldingError::Parse(s);
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| err(format!("missing {what}")));

        let header = next("header")?;
        let nv = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["quiver", n] => n.parse::<usize>().map_err(|_| err(format!("bad vertex count {n:?}")))?,
            _ => return Err(err(format!("expected `quiver <nv>`, got {header:?}"))),
        };
        let vertices = next("vertices line")?;
        let names: Vec<String> = match vertices.split_whitespace().collect::<Vec<_>>().split_first() {
            Some((&"vertices", rest)) => rest.iter().map(|s| s.to_string()).collect(),
            _ => return Err(err(format!("expected `vertices ...`, got {vertices:?}"))),
        };
        if names.len() != nv {
            return Err(err(format!("declared {nv} vertices, listed {}", names.len())));
        }
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let lookup = |name: &str| index.get(name).copied().ok_or_else(|| err(format!("unknown vertex {name:?}")));

        let frozen_line = next("frozen line")?;
        let mut frozen = vec![false; nv];
        match frozen_line.split_whitespace().collect::<Vec<_>>().split_first() {
            Some((&"frozen", rest)) => {
                for name in rest {
                    frozen[lookup(name)?] = true;
                }
            }
            _ => return Err(err(format!("expected `frozen ...`, got {frozen_line:?}"))),
        }
        if next("arrows line")? != "arrows" {
            return Err(err("expected `arrows`".into()));
        }

        let mut b = vec![vec![0i64; nv]; nv];
        let mut seen_group = false;
        let mut generators = Vec::new();
        for line in lines {
            if !seen_group {
                if line == "group" {
                    seen_group = true;
                    continue;
                }
                let fields: Vec<&str> = line.split_whitespace().collect();
                let [i, j, m] = fields.as_slice() else {
                    return Err(err(format!("expected `i j m`, got {line:?}")));
                };
                let (i, j) = (lookup(i)?, lookup(j)?);
                let m: i64 = m.parse().map_err(|_| err(format!("bad multiplicity {m:?}")))?;
                if i == j {
                    return Err(err(format!("loop at {}", names[i])));
                }
                if b[i][j] != 0 {
                    return Err(err(format!("pair {} {} listed twice", names[i], names[j])));
                }
                b[i][j] = m;
                b[j][i] = -m;
            } else {
                generators.push(parse_cycles(line, &lookup, nv)?);
            }
        }
        if !seen_group {
            return Err(err("missing `group` section".into()));
        }
        let quiver = IceQuiver::new(names, b, frozen)?;
        let action = GroupAction::new(nv, generators)?;
        action.check_compatible(&quiver)?;
        Covering::new(quiver, action)
    }
}

impl fmt::Display for Covering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn cycle_notation(perm: &[usize], names: &[String]) -> String {
    let mut done = vec![false; perm.len()];
    let mut out = String::new();
    for start in 0..perm.len() {
        if done[start] || perm[start] == start {
            continue;
        }
        let mut cycle = Vec::new();
        let mut v = start;
        while !done[v] {
            done[v] = true;
            cycle.push(names[v].as_str());
            v = perm[v];
        }
        out.push_str(&format!("({})", cycle.join(" ")));
    }
    if out.is_empty() {
        out.push_str("()");
    }
    out
}

fn parse_cycles(
    line: &str,
    lookup: &impl Fn(&str) -> Result<usize, UnfoldingError>,
    nv: usize,
) -> Result<Vec<usize>, UnfoldingError> {
    let err = |s: String| UnfoldingError::Parse(s);
    let mut perm: Vec<usize> = (0..nv).collect();
    let mut moved = vec![false; nv];
    let mut rest = line.trim();
    while !rest.is_empty() {
        let body = rest.strip_prefix('(').ok_or_else(|| err(format!("expected `(` in {line:?}")))?;
        let close = body.find(')').ok_or_else(|| err(format!("unclosed cycle in {line:?}")))?;
        let cycle: Vec<usize> = body[..close].split_whitespace().map(lookup).collect::<Result<_, _>>()?;
        for (k, &v) in cycle.iter().enumerate() {
            if std::mem::replace(&mut moved[v], true) {
                return Err(err(format!("vertex repeated in {line:?}")));
            }
            perm[v] = cycle[(k + 1) % cycle.len()];
        }
        rest = body[close + 1..].trim_start();
    }
    Ok(perm)
}

/// Outcome of checking that folding commutes with orbit mutation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoveringCheck {
    pub steps: usize,
    pub divergence: Option<Divergence>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    /// Number of orbit mutations applied when the two sides first differ.
    pub step: usize,
    pub folded_after_orbit_mutation: ExchangeMatrix,
    pub mutated_fold: ExchangeMatrix,
}

/// Applies the orbit mutations `seq` (folded indices) to the covering and
/// the matching mutations to its fold, comparing after every step.
pub fn verify_covering(c: &Covering, seq: &[usize]) -> Result<CoveringCheck, UnfoldingError> {
    let mut cover = c.clone();
    let mut folded = c.folded().clone();
    for (step, &o) in seq.iter().enumerate() {
        cover = cover.orbit_mutate(o)?;
        folded = folded.mutate(o)?;
        if cover.folded() != &folded {
            return Ok(CoveringCheck {
                steps: step + 1,
                divergence: Some(Divergence {
                    step: step + 1,
                    folded_after_orbit_mutation: cover.folded().clone(),
                    mutated_fold: folded,
                }),
            });
        }
    }
    Ok(CoveringCheck { steps: seq.len(), divergence: None })
}

/// Both sides of the projection identity for one covering vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectionCheck {
    pub projected: LaurentPoly,
    pub folded: LaurentPoly,
}

impl ProjectionCheck {
    pub fn holds(&self) -> bool {
        self.projected == self.folded
    }
}

/// Compares `pi` of the covering variable at `vertex` after the orbit
/// mutations `seq` with the folded variable at its orbit after `seq`.
pub fn verify_projection(
    c: &Covering,
    seq: &[usize],
    vertex: usize,
    budget: Option<usize>,
) -> Result<ProjectionCheck, UnfoldingError> {
    let position =
        c.position(vertex).ok_or_else(|| UnfoldingError::FrozenOrbit(c.quiver().name(vertex).to_string()))?;
    let mut cov = c.covering_seed()?;
    let mut fol = c.folded_seed()?;
    for &o in seq {
        cov = c.orbit_mutate_seed(&cov, o, budget)?;
        fol = fol.mutate_with_budget(o, budget)?;
    }
    Ok(ProjectionCheck {
        projected: c.project_pi(&cov.cluster()[position])?,
        folded: fol.cluster()[c.folded_index(vertex)].clone(),
    })
}

/// Positive diagonal `D` with `DB` skew-symmetric, normalized per connected
/// component to coprime entries; `None` if no such `D` exists.
pub fn skew_symmetrizer(b: &ExchangeMatrix) -> Option<Vec<i64>> {
    let n = b.rank();
    // d_i as a reduced fraction (num, den).
    let mut d: Vec<Option<(i64, i64)>> = vec![None; n];
    let mut component = vec![usize::MAX; n];
    let mut components = 0;
    for root in 0..n {
        if d[root].is_some() {
            continue;
        }
        d[root] = Some((1, 1));
        component[root] = components;
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            let (p, q) = d[i].expect("assigned before push");
            for j in 0..n {
                let (bij, bji) = (b.get(i, j), b.get(j, i));
                if i == j || (bij == 0 && bji == 0) {
                    continue;
                }
                if bij == 0 || bji == 0 || bij.signum() == bji.signum() {
                    return None;
                }
                // d_i b_ij = -d_j b_ji
                let (num, den) = (p * bij, q * -bji);
                let g = num.gcd(&den) * den.signum();
                let dj = (num / g, den / g);
                match d[j] {
                    None => {
                        d[j] = Some(dj);
                        component[j] = components;
                        stack.push(j);
                    }
                    Some(existing) if existing != dj => return None,
                    Some(_) => {}
                }
            }
        }
        components += 1;
    }
    let mut out = vec![0i64; n];
    for c in 0..components {
        let members: Vec<usize> = (0..n).filter(|&i| component[i] == c).collect();
        let lcm = members.iter().fold(1i64, |acc, &i| acc.lcm(&d[i].expect("assigned").1));
        let scaled: Vec<i64> = members.iter().map(|&i| d[i].map(|(p, q)| p * (lcm / q)).expect("assigned")).collect();
        let g = scaled.iter().fold(0i64, |acc, &v| acc.gcd(&v));
        for (&i, &v) in members.iter().zip(&scaled) {
            out[i] = v / g;
        }
    }
    Some(out)
}

fn copy_name(base: usize, r: usize, copies: i64) -> String {
    if copies == 1 {
        return (base + 1).to_string();
    }
    let mut suffix = String::new();
    let mut k = r;
    loop {
        suffix.insert(0, (b'a' + (k % 26) as u8) as char);
        if k < 26 {
            break;
        }
        k = k / 26 - 1;
    }
    format!("{}{}", base + 1, suffix)
}

/// A finite covering of a square sign-skew-symmetric `B`: the quiver itself
/// when `B` is skew-symmetric, otherwise the cyclic blow-up along a small
/// diagonal skew-symmetrizer.
pub fn standard_covering(b: &ExchangeMatrix) -> Result<Covering, UnfoldingError> {
    if !b.is_square() || !b.is_sign_skew_symmetric() {
        return Err(UnfoldingError::Unsupported("matrix is not square sign-skew-symmetric".into()));
    }
    if b.is_skew_symmetric() {
        return Covering::trivial(b);
    }
    let d = skew_symmetrizer(b).ok_or_else(|| UnfoldingError::Unsupported("no diagonal skew-symmetrizer".into()))?;
    if let Some(&big) = d.iter().find(|&&v| v > MAX_SYMMETRIZER) {
        return Err(UnfoldingError::Unsupported(format!("skew-symmetrizer entry {big} exceeds {MAX_SYMMETRIZER}")));
    }
    let n = b.rank();
    let period = d.iter().fold(1i64, |acc, v| acc.lcm(v));
    let copies: Vec<i64> = d.iter().map(|&v| period / v).collect();

    // Vertex (i, r) for r in Z/copies[i]; one generator shifts every fiber.
    let mut vertex: BTreeMap<(usize, i64), usize> = BTreeMap::new();
    let mut names = Vec::new();
    for i in 0..n {
        for r in 0..copies[i] {
            vertex.insert((i, r), names.len());
            names.push(copy_name(i, r as usize, copies[i]));
        }
    }
    let nv = names.len();
    let mut q = vec![vec![0i64; nv]; nv];
    for i in 0..n {
        for j in 0..n {
            let bij = b.get(i, j);
            if i == j || bij == 0 {
                continue;
            }
            let g = copies[i].gcd(&copies[j]);
            if (bij * g) % copies[i] != 0 {
                return Err(UnfoldingError::Unsupported(format!(
                    "entry ({}, {}) does not spread evenly over the copies",
                    i + 1,
                    j + 1
                )));
            }
            let m = bij * g / copies[i];
            for r in 0..copies[i] {
                for s in 0..copies[j] {
                    if (r - s) % g == 0 {
                        q[vertex[&(i, r)]][vertex[&(j, s)]] = m;
                    }
                }
            }
        }
    }
    let generator: Vec<usize> = vertex.keys().map(|&(i, r)| vertex[&(i, (r + 1) % copies[i])]).collect();
    let quiver = IceQuiver::new(names, q, vec![false; nv])?;
    let action = GroupAction::new(nv, vec![generator])?;
    let covering = Covering::new(quiver, action)?;
    debug_assert_eq!(covering.folded(), b);
    Ok(covering)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> ExchangeMatrix {
        ExchangeMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    const C2: &str = "quiver 3\nvertices 1 2a 2b\nfrozen\narrows\n1 2a 1\n1 2b 1\ngroup\n(2a 2b)\n";

    fn c2() -> Covering {
        Covering::parse(C2).unwrap()
    }

    fn quiver(names: &[&str], arrows: &[(usize, usize, i64)]) -> IceQuiver {
        let nv = names.len();
        let mut b = vec![vec![0; nv]; nv];
        for &(i, j, k) in arrows {
            b[i][j] = k;
            b[j][i] = -k;
        }
        IceQuiver::new(names.iter().map(|s| s.to_string()).collect(), b, vec![false; nv]).unwrap()
    }

    #[test]
    fn c2_folds_and_round_trips() {
        let c = c2();
        assert_eq!(c.folded(), &m(&[&[0, 1], &[-2, 0]]));
        assert_eq!(c.to_text(), C2);
        assert_eq!(c.action().order(), 2);
        assert_eq!(c.orbits(), &[vec![0], vec![1, 2]]);
    }

    #[test]
    fn gamma_loops() {
        let c = c2();
        assert!(!has_gamma_loop(c.quiver(), c.action(), 1));
        let q = quiver(&["1", "2a", "2b"], &[(1, 2, 1)]);
        assert!(has_gamma_loop(&q, c.action(), 1));
        let a2 = Covering::trivial(&m(&[&[0, 1], &[-1, 0]])).unwrap();
        assert!(!has_gamma_loop(a2.quiver(), a2.action(), 0));
        // Z/4 rotating 1 -> 2 -> 3 -> 4 with an arrow 1 -> 2 inside the orbit.
        let q = quiver(&["1", "2", "3", "4"], &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 1)]);
        let a = GroupAction::new(4, vec![vec![1, 2, 3, 0]]).unwrap();
        assert_eq!(a.order(), 4);
        assert!(has_gamma_loop(&q, &a, 0));
    }

    #[test]
    fn gamma_two_cycles() {
        let c = c2();
        assert!(!has_gamma_two_cycle(c.quiver(), c.action(), 0));
        assert!(!has_gamma_two_cycle(c.quiver(), c.action(), 1));
        // 1a -> 2a -> 1b -> 2b -> 1a under the simultaneous swap.
        let q = quiver(&["1a", "1b", "2a", "2b"], &[(0, 2, 1), (2, 1, 1), (1, 3, 1), (3, 0, 1)]);
        let a = GroupAction::new(4, vec![vec![1, 0, 3, 2]]).unwrap();
        assert!(has_gamma_two_cycle(&q, &a, 0));
        assert!(matches!(orbit_mutate(&q, &a, 0), Err(UnfoldingError::OrbitNotMutable { .. })));
        let a3 = Covering::trivial(&m(&[&[0, 1, 0], &[-1, 0, 1], &[0, -1, 0]])).unwrap();
        assert!((0..3).all(|i| !has_gamma_two_cycle(a3.quiver(), a3.action(), i)));
    }

    #[test]
    fn orbit_mutation_reverses_and_commutes_with_fold() {
        let c = c2();
        let mutated = c.orbit_mutate(1).unwrap();
        assert_eq!(mutated.quiver().get(0, 1), -1);
        assert_eq!(mutated.quiver().get(0, 2), -1);
        assert_eq!(mutated.quiver().get(1, 2), 0);
        assert_eq!(mutated.folded(), &m(&[&[0, -1], &[2, 0]]));
        assert_eq!(mutated.folded(), &c.folded().mutate(1).unwrap());
        assert_eq!(mutated.orbit_mutate(1).unwrap(), c);
    }

    #[test]
    fn trivial_group_orbit_mutation_is_quiver_mutation() {
        let b = m(&[&[0, 1, 0], &[-1, 0, 2], &[0, -2, 0]]);
        let c = Covering::trivial(&b).unwrap();
        for k in 0..3 {
            let mutated = c.orbit_mutate(k).unwrap();
            assert_eq!(mutated.quiver(), &c.quiver().mutate(k).unwrap());
            assert_eq!(mutated.folded(), &b.mutate(k).unwrap());
        }
    }

    #[test]
    fn verify_covering_c2() {
        let c = c2();
        assert_eq!(verify_covering(&c, &[]).unwrap().divergence, None);
        let check = verify_covering(&c, &[1, 0, 1]).unwrap();
        assert_eq!(check.steps, 3);
        assert_eq!(check.divergence, None);
    }

    #[test]
    fn corrupted_covering_is_representative_dependent() {
        let text = "quiver 3\nvertices 1 2a 2b\nfrozen\narrows\n1 2a 1\n1 2b 2\ngroup\n(2a 2b)\n";
        assert!(matches!(Covering::parse(text), Err(UnfoldingError::RepresentativeDependent { .. })));
    }

    #[test]
    fn projection() {
        let c = c2();
        let p: LaurentPoly = "x2*x3".parse().unwrap();
        assert_eq!(c.project_pi(&p).unwrap(), "x2^2".parse().unwrap());

        let cov = c.covering_seed().unwrap().mutate(0).unwrap();
        let fol = c.folded_seed().unwrap().mutate(0).unwrap();
        assert_eq!(c.project_pi(&cov.cluster()[0]).unwrap(), fol.cluster()[0]);

        assert!(verify_projection(&c, &[], 0, None).unwrap().holds());
        assert!(verify_projection(&c, &[0], 0, None).unwrap().holds());
        let check = verify_projection(&c, &[1, 0], 1, None).unwrap();
        assert!(check.holds());
        assert_eq!(check.folded, "x1*x2^-1*y2 + x2^-1".parse().unwrap());
    }

    #[test]
    fn orbit_seed_mutation_is_order_independent() {
        let c = c2();
        let s = c.covering_seed().unwrap();
        let mutated = c.orbit_mutate_seed(&s, 1, None).unwrap();
        assert_eq!(mutated.cluster()[0], s.cluster()[0]);
        assert_ne!(mutated.cluster()[1], s.cluster()[1]);
        assert_eq!(mutated.cluster()[1], s.mutate(1).unwrap().cluster()[1]);
        assert_eq!(mutated.cluster()[2], s.mutate(2).unwrap().cluster()[2]);
        assert_eq!(c.orbit_mutate_seed(&s, 0, None).unwrap(), s.mutate(0).unwrap());
    }

    #[test]
    fn lambda() {
        let c = c2();
        assert_eq!(c.lambda_degree(&[0, 1, 0]), vec![0, 1]);
        assert_eq!(c.lambda_degree(&[2, -1, 3]), vec![2, 2]);
    }

    #[test]
    fn standard_coverings() {
        let a2 = m(&[&[0, 1], &[-1, 0]]);
        let c = standard_covering(&a2).unwrap();
        assert_eq!(c.action().order(), 1);
        assert_eq!(c.folded(), &a2);

        let c = standard_covering(&m(&[&[0, 1], &[-2, 0]])).unwrap();
        assert_eq!(c.to_text(), C2);

        let g2 = m(&[&[0, 1], &[-3, 0]]);
        let c = standard_covering(&g2).unwrap();
        assert_eq!(c.quiver().names(), &["1", "2a", "2b", "2c"]);
        assert_eq!(c.folded(), &g2);

        let mixed = m(&[&[0, 2], &[-3, 0]]);
        let c = standard_covering(&mixed).unwrap();
        assert_eq!(c.folded(), &mixed);
        for seq in [[0, 1, 0, 1], [1, 0, 1, 0]] {
            assert_eq!(verify_covering(&c, &seq).unwrap().divergence, None);
        }

        let strict = m(&[&[0, 1, 2], &[-2, 0, 3], &[-1, -1, 0]]);
        assert!(matches!(standard_covering(&strict), Err(UnfoldingError::Unsupported(_))));
    }

    #[test]
    fn symmetrizers() {
        assert_eq!(skew_symmetrizer(&m(&[&[0, 1], &[-2, 0]])), Some(vec![2, 1]));
        assert_eq!(skew_symmetrizer(&m(&[&[0, 2], &[-3, 0]])), Some(vec![3, 2]));
        assert_eq!(skew_symmetrizer(&m(&[&[0, 1, 2], &[-2, 0, 3], &[-1, -1, 0]])), None);
    }

    #[test]
    fn principalized_covering() {
        let c = c2().principalized().unwrap();
        assert_eq!(c.quiver().names(), &["1", "2a", "2b", "1'", "2a'", "2b'"]);
        assert_eq!(c.folded(), &m(&[&[0, 1], &[-2, 0]]).principal_extension());
    }

    #[test]
    fn quiver_file_errors() {
        assert!(matches!(
            Covering::parse("quiver 2\nvertices 1\nfrozen\narrows\ngroup\n"),
            Err(UnfoldingError::Parse(_))
        ));
        assert!(matches!(
            Covering::parse("quiver 2\nvertices 1 2\nfrozen\narrows\n1 3 1\ngroup\n"),
            Err(UnfoldingError::Parse(_))
        ));
        assert!(matches!(
            Covering::parse("quiver 2\nvertices 1 2\nfrozen 2\narrows\n1 2 1\ngroup\n(1 2)\n"),
            Err(UnfoldingError::FrozenNotStable { .. })
        ));
        let trivial = "quiver 2\nvertices 1 2\nfrozen\narrows\n1 2 1\ngroup\n()\n";
        assert_eq!(Covering::parse(trivial).unwrap().to_text(), trivial);
    }

    #[test]
    fn resolve_orbit_names() {
        let c = c2();
        assert_eq!(c.resolve_orbit("2b").unwrap(), 1);
        assert_eq!(c.resolve_orbit("1").unwrap(), 0);
        assert_eq!(c.resolve_orbit("2").unwrap(), 1);
        assert!(c.resolve_orbit("7").is_err());
    }
}
