//! Exchange-graph exploration and the property checkers run over it.
//!
//! Every checker is a pure function of the explored seeds, so results are
//! independent of the thread count: children of a BFS level are computed in
//! parallel but merged into the dedup table in a fixed order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::exchange::{ExchangeMatrix, MutationSequence};
use crate::laurent::{Homogeneity, LaurentPoly};
use crate::seed::{g_recurrence_step, has_unit_constant_term, GMatrix, Seed, SeedError, SeedKey};
use crate::unfolding::{verify_covering, Covering, UnfoldingError};

/// Default per-mutation term budget.
pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Default exploration depth.
pub const DEFAULT_DEPTH: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    SignCoherence,
    Basis,
    Recurrence,
    Laurent,
    FConst,
    CSign,
}

impl Check {
    pub const ALL: [Check; 6] =
        [Check::SignCoherence, Check::Basis, Check::Recurrence, Check::Laurent, Check::FConst, Check::CSign];

    pub fn name(self) -> &'static str {
        match self {
            Check::SignCoherence => "sign-coherence",
            Check::Basis => "basis",
            Check::Recurrence => "recurrence",
            Check::Laurent => "laurent",
            Check::FConst => "f-const",
            Check::CSign => "c-sign",
        }
    }

    /// Parses `all` or a comma-separated list of check names.
    pub fn parse_list(s: &str) -> Result<Vec<Check>, String> {
        if s.trim() == "all" {
            return Ok(Check::ALL.to_vec());
        }
        let mut out: Vec<Check> =
            s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect::<Result<_, _>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err("empty check list".into());
        }
        Ok(out)
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Check, String> {
        Check::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown check {s:?}"))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A replayable failure: the starting matrix and the mutation path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub matrix: ExchangeMatrix,
    pub history: MutationSequence,
    pub detail: String,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hist: Vec<String> = self.history.indices().iter().map(|k| (k + 1).to_string()).collect();
        write!(f, "witness=[{}] matrix={} {}", hist.join(","), self.matrix.inline(), self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail(Witness),
    Skip(String),
}

impl Status {
    pub fn is_fail(&self) -> bool {
        matches!(self, Status::Fail(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckEntry {
    pub name: String,
    pub status: Status,
}

impl fmt::Display for CheckEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.status {
            Status::Pass => write!(f, "CHECK {} PASS", self.name),
            Status::Fail(w) => write!(f, "CHECK {} FAIL {w}", self.name),
            Status::Skip(_) => write!(f, "CHECK {} SKIP", self.name),
        }
    }
}

/// Results for one initial matrix (or one covering).
#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub subject: String,
    pub depth: usize,
    pub seeds: usize,
    pub truncated: usize,
    pub entries: Vec<CheckEntry>,
    pub elapsed: Duration,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        !self.entries.iter().any(|e| e.status.is_fail())
    }

    pub fn entry(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Report text without timing; identical across runs and thread counts.
    pub fn canonical(&self) -> String {
        let mut s =
            format!("{} depth {}: {} seeds, {} truncated\n", self.subject, self.depth, self.seeds, self.truncated);
        for e in &self.entries {
            if let Status::Skip(reason) = &e.status {
                s.push_str(&format!("  {} skipped: {reason}\n", e.name));
            }
        }
        for e in &self.entries {
            s.push_str(&format!("{e}\n"));
        }
        s
    }
}

/// Aggregate over a matrix corpus.
#[derive(Clone, Debug)]
pub struct CorpusReport {
    pub reports: Vec<VerificationReport>,
    pub elapsed: Duration,
}

impl CorpusReport {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(VerificationReport::passed)
    }

    pub fn seeds(&self) -> usize {
        self.reports.iter().map(|r| r.seeds).sum()
    }

    pub fn truncated(&self) -> usize {
        self.reports.iter().map(|r| r.truncated).sum()
    }

    /// Per-check summary: the first failure in corpus order, else PASS if
    /// any matrix ran the check, else SKIP.
    pub fn summary(&self) -> Vec<CheckEntry> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.reports {
            for e in &r.entries {
                if !names.contains(&e.name) {
                    names.push(e.name.clone());
                }
            }
        }
        names
            .into_iter()
            .map(|name| {
                let statuses: Vec<&Status> =
                    self.reports.iter().filter_map(|r| r.entry(&name)).map(|e| &e.status).collect();
                let status = if let Some(fail) = statuses.iter().find(|s| s.is_fail()) {
                    (*fail).clone()
                } else if statuses.iter().any(|s| **s == Status::Pass) {
                    Status::Pass
                } else {
                    Status::Skip("skipped for every matrix".into())
                };
                CheckEntry { name, status }
            })
            .collect()
    }

    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for r in &self.reports {
            s.push_str(&r.canonical());
        }
        s.push_str(&format!(
            "corpus: {} matrices, {} seeds, {} truncated\n",
            self.reports.len(),
            self.seeds(),
            self.truncated()
        ));
        for e in self.summary() {
            s.push_str(&format!("{e}\n"));
        }
        s
    }
}

/// Runs `f` inside a rayon pool with `threads` workers.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool").install(f)
}

/// Deduplicated seeds reachable within the depth, in discovery order.
#[derive(Clone, Debug)]
pub struct Exploration {
    pub seeds: Vec<Seed>,
    /// `(from, to, k)` for every mutation that succeeded, `k` 0-based.
    pub edges: Vec<(usize, usize, usize)>,
    /// `(history, k)` for every mutation that exceeded the budget.
    pub truncated: Vec<(MutationSequence, usize)>,
}

impl Exploration {
    /// Graphviz rendering of the explored exchange graph.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph exchange {\n");
        for (i, seed) in self.seeds.iter().enumerate() {
            s.push_str(&format!("  s{i} [label=\"[{}]\"];\n", seed.history().to_one_based()));
        }
        let mut seen = std::collections::HashSet::new();
        // Labels are positions in the source seed, so one edge can be found
        // from both ends under different labels; keep the first.
        for &(a, b, k) in &self.edges {
            let key = (a.min(b), a.max(b));
            if seen.insert(key) {
                s.push_str(&format!("  s{} -- s{} [label=\"{}\"];\n", key.0, key.1, k + 1));
            }
        }
        s.push_str("}\n");
        s
    }
}

/// BFS from the principal seed at `b`, never undoing the mutation just
/// applied, deduplicating unlabeled seeds. Mutations over budget are
/// recorded as truncated; any other error aborts.
pub fn explore(b: &ExchangeMatrix, depth: usize, budget: Option<usize>) -> Result<Exploration, SeedError> {
    explore_from(Seed::initial(b)?, depth, budget)
}

pub fn explore_from(root: Seed, depth: usize, budget: Option<usize>) -> Result<Exploration, SeedError> {
    let n = root.rank();
    let mut index: HashMap<SeedKey, usize> = HashMap::from([(root.canonical_key(), 0)]);
    let mut out = Exploration { seeds: vec![root], edges: Vec::new(), truncated: Vec::new() };
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let seeds = &out.seeds;
        let children: Vec<Vec<(usize, usize, Result<Seed, SeedError>)>> = frontier
            .par_iter()
            .map(|&i| {
                let seed = &seeds[i];
                (0..n)
                    .filter(|&k| seed.history().last() != Some(k))
                    .map(|k| (i, k, seed.mutate_with_budget(k, budget)))
                    .collect()
            })
            .collect();
        let mut next = Vec::new();
        for (i, k, result) in children.into_iter().flatten() {
            match result {
                Ok(child) => {
                    let key = child.canonical_key();
                    let j = match index.get(&key) {
                        Some(&j) => j,
                        None => {
                            let j = out.seeds.len();
                            index.insert(key, j);
                            out.seeds.push(child);
                            next.push(j);
                            j
                        }
                    };
                    out.edges.push((i, j, k));
                }
                Err(SeedError::BudgetExceeded { .. }) => {
                    out.truncated.push((out.seeds[i].history().clone(), k));
                }
                Err(e) => return Err(e),
            }
        }
        frontier = next;
    }
    Ok(out)
}

/// Exact determinant by fraction-free (Bareiss) elimination.
pub fn determinant(rows: &[Vec<i64>]) -> BigInt {
    let n = rows.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Index of the first row mixing strictly positive and negative entries.
pub fn sign_incoherent_row(rows: &[Vec<i64>]) -> Option<usize> {
    rows.iter().position(|r| r.iter().any(|&v| v > 0) && r.iter().any(|&v| v < 0))
}

fn transpose(rows: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let cols = rows.first().map_or(0, Vec::len);
    (0..cols).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

/// Per-seed verdicts for the checks that look at one seed at a time.
fn seed_findings(seed: &Seed, checks: &[Check]) -> Result<Vec<(Check, Option<String>)>, SeedError> {
    let mut out = Vec::new();
    let g: Option<GMatrix> = if checks.contains(&Check::SignCoherence) || checks.contains(&Check::Basis) {
        Some(seed.g_matrix()?)
    } else {
        None
    };
    for &check in checks {
        let finding = match check {
            Check::SignCoherence => sign_incoherent_row(&g.as_ref().expect("computed above").to_rows())
                .map(|i| format!("g-matrix row {} mixes signs", i + 1)),
            Check::Basis => {
                let det = determinant(&g.as_ref().expect("computed above").to_rows());
                (!det.abs().is_one()).then(|| format!("det={det}"))
            }
            Check::CSign => {
                sign_incoherent_row(&transpose(&seed.c_matrix())).map(|j| format!("c-vector {} mixes signs", j + 1))
            }
            Check::FConst => (0..seed.rank())
                .find(|&a| !has_unit_constant_term(&seed.f_polynomial(a)))
                .map(|a| format!("F-polynomial {} has constant term {}", a + 1, seed.f_polynomial(a).constant_term())),
            Check::Laurent => (0..seed.rank())
                .find(|&a| !seed.cluster()[a].is_admissible())
                .map(|a| format!("variable {} has a negative coefficient exponent", a + 1)),
            Check::Recurrence => continue,
        };
        out.push((check, finding));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub depth: usize,
    pub budget: Option<usize>,
    pub checks: Vec<Check>,
    pub threads: usize,
}

impl Default for VerifyConfig {
    fn default() -> VerifyConfig {
        VerifyConfig { depth: DEFAULT_DEPTH, budget: Some(DEFAULT_BUDGET), checks: Check::ALL.to_vec(), threads: 1 }
    }
}

/// Explores `b` and runs the configured checks.
pub fn verify_matrix(b: &ExchangeMatrix, config: &VerifyConfig) -> Result<VerificationReport, SeedError> {
    with_threads(config.threads, || verify_matrix_in_pool(b, config))
}

fn verify_matrix_in_pool(b: &ExchangeMatrix, config: &VerifyConfig) -> Result<VerificationReport, SeedError> {
    let start = Instant::now();
    let fail = |history: MutationSequence, detail: String| Status::Fail(Witness { matrix: b.clone(), history, detail });
    let mut statuses: BTreeMap<Check, Status> = Check::ALL
        .into_iter()
        .map(|c| (c, if config.checks.contains(&c) { Status::Pass } else { Status::Skip("not requested".into()) }))
        .collect();

    let (seeds, truncated) = match explore(b, config.depth, config.budget) {
        Ok(exploration) => {
            let per_seed: Vec<Check> = config.checks.iter().copied().filter(|&c| c != Check::Recurrence).collect();
            let findings: Vec<Vec<(Check, Option<String>)>> =
                exploration.seeds.par_iter().map(|s| seed_findings(s, &per_seed)).collect::<Result<_, _>>()?;
            for (seed, found) in exploration.seeds.iter().zip(findings) {
                for (check, finding) in found {
                    if let (Some(detail), Status::Pass) = (finding, &statuses[&check]) {
                        statuses.insert(check, fail(seed.history().clone(), detail));
                    }
                }
            }
            (exploration.seeds.len(), exploration.truncated.len())
        }
        Err(SeedError::NonExactDivision { k, history }) if config.checks.contains(&Check::Laurent) => {
            let history = MutationSequence::parse_one_based(&history, b.rank())?.pushed(k - 1);
            statuses.insert(Check::Laurent, fail(history, format!("division at {k} is not exact")));
            for (c, s) in statuses.iter_mut() {
                if *c != Check::Laurent && *s == Status::Pass {
                    *s = Status::Skip("exploration aborted".into());
                }
            }
            (0, 0)
        }
        Err(e) => return Err(e),
    };

    if config.checks.contains(&Check::Recurrence) && statuses[&Check::Recurrence] == Status::Pass {
        let outcome = check_recurrence(b, config.depth, config.budget)?;
        if let Some(w) = outcome.mismatch {
            statuses.insert(Check::Recurrence, Status::Fail(w));
        }
    }
    Ok(VerificationReport {
        subject: format!("matrix {}", b.inline()),
        depth: config.depth,
        seeds,
        truncated,
        entries: statuses.into_iter().map(|(c, status)| CheckEntry { name: c.name().into(), status }).collect(),
        elapsed: start.elapsed(),
    })
}

/// Verifies every matrix of a corpus; reports come back in corpus order.
pub fn verify_corpus(corpus: &[ExchangeMatrix], config: &VerifyConfig) -> Result<CorpusReport, SeedError> {
    let start = Instant::now();
    let reports = with_threads(config.threads, || {
        corpus.par_iter().map(|b| verify_matrix_in_pool(b, config)).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(CorpusReport { reports, elapsed: start.elapsed() })
}

/// Outcome of the two-base-point g-vector recurrence check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecurrenceOutcome {
    /// Tree vertices visited.
    pub vertices: usize,
    /// Edge comparisons made (each edge in both directions counts once).
    pub comparisons: usize,
    /// Comparisons skipped because a side exceeded the budget.
    pub skipped: usize,
    pub mismatch: Option<Witness>,
}

/// g-matrices w.r.t. a fixed base for every non-backtracking continuation,
/// keyed by the full path from the root; `None` marks truncation.
fn rebased_g_matrices(
    base: &[usize],
    b: &ExchangeMatrix,
    depth: usize,
    budget: Option<usize>,
) -> Result<Vec<(Vec<usize>, Option<GMatrix>)>, SeedError> {
    let n = b.rank();
    let root = Seed::principal(&b.mutate_sequence(base)?)?;
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, Option<Seed>)> = vec![(base.to_vec(), Some(root))];
    while let Some((path, seed)) = stack.pop() {
        let g = match &seed {
            Some(s) => Some(s.g_matrix()?),
            None => None,
        };
        if path.len() < depth {
            for k in (0..n).rev().filter(|&k| path.last() != Some(&k)) {
                let child = match &seed {
                    Some(s) => match s.mutate_with_budget(k, budget) {
                        Ok(c) => Some(c),
                        Err(SeedError::BudgetExceeded { .. }) => None,
                        Err(e) => return Err(e),
                    },
                    None => None,
                };
                let mut p = path.clone();
                p.push(k);
                stack.push((p, child));
            }
        }
        out.push((path, g));
    }
    Ok(out)
}

/// For every tree vertex `t` within `depth` and every edge `t1 -k- t2` on the
/// path to `t`, compares the g-vectors of `t` with respect to `t2` against one
/// recurrence step from those with respect to `t1`, in both directions.
pub fn check_recurrence(
    b: &ExchangeMatrix,
    depth: usize,
    budget: Option<usize>,
) -> Result<RecurrenceOutcome, SeedError> {
    let n = b.rank();
    let mut vertices: Vec<Vec<usize>> = vec![Vec::new()];
    let mut level = vec![Vec::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for path in &level {
            for k in (0..n).filter(|&k| path.last() != Some(&k)) {
                let mut p: Vec<usize> = path.clone();
                p.push(k);
                next.push(p);
            }
        }
        vertices.extend(next.iter().cloned());
        level = next;
    }

    let tables: Vec<Vec<(Vec<usize>, Option<GMatrix>)>> =
        vertices.par_iter().map(|base| rebased_g_matrices(base, b, depth, budget)).collect::<Result<_, _>>()?;
    let mut g: HashMap<(usize, Vec<usize>), Option<GMatrix>> = HashMap::new();
    for (base, table) in vertices.iter().zip(tables) {
        for (path, gm) in table {
            g.insert((base.len(), path), gm);
        }
    }
    let matrices: HashMap<&[usize], ExchangeMatrix> =
        vertices.iter().map(|v| Ok((v.as_slice(), b.mutate_sequence(v)?))).collect::<Result<_, SeedError>>()?;

    let mut outcome = RecurrenceOutcome { vertices: vertices.len(), comparisons: 0, skipped: 0, mismatch: None };
    for t in &vertices {
        for p in 0..t.len() {
            let k = t[p];
            let (g1, g2) = (&g[&(p, t.clone())], &g[&(p + 1, t.clone())]);
            let (Some(g1), Some(g2)) = (g1, g2) else {
                outcome.skipped += 1;
                continue;
            };
            outcome.comparisons += 1;
            let (b1, b2) = (&matrices[&t[..p]], &matrices[&t[..p + 1]]);
            for a in 0..n {
                let forward = g_recurrence_step(&g1.columns[a], b1, k);
                let backward = g_recurrence_step(&g2.columns[a], b2, k);
                let detail = if forward != g2.columns[a] {
                    Some(format!(
                        "edge {} at step {}, position {}: {:?} vs {:?}",
                        k + 1,
                        p + 1,
                        a + 1,
                        forward,
                        g2.columns[a]
                    ))
                } else if backward != g1.columns[a] {
                    Some(format!(
                        "reverse edge {} at step {}, position {}: {:?} vs {:?}",
                        k + 1,
                        p + 1,
                        a + 1,
                        backward,
                        g1.columns[a]
                    ))
                } else {
                    None
                };
                if let (Some(detail), None) = (detail, &outcome.mismatch) {
                    outcome.mismatch = Some(Witness { matrix: b.clone(), history: t.clone().into(), detail });
                }
            }
        }
    }
    Ok(outcome)
}

/// Every sequence over `0..n` of length at most `depth`, shortest first.
fn all_sequences(n: usize, depth: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut level = vec![Vec::new()];
    for _ in 0..depth {
        let next: Vec<Vec<usize>> = level
            .iter()
            .flat_map(|p: &Vec<usize>| {
                (0..n).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// Names of the covering-suite checks, in report order.
pub const COVERING_CHECKS: [&str; 7] =
    ["covering", "projection", "lambda", "orbit-sign-coherence", "min-sum", "orbit-recurrence", "folded-recurrence"];

fn covering_witness(c: &Covering, seq: &[usize], detail: String) -> Witness {
    Witness { matrix: c.folded().clone(), history: seq.to_vec().into(), detail }
}

/// Covering-side findings for one orbit sequence, in `COVERING_CHECKS` order.
fn covering_findings(
    c: &Covering,
    seq: &[usize],
    budget: Option<usize>,
) -> Result<Vec<Option<String>>, UnfoldingError> {
    let mut found: Vec<Option<String>> = vec![None; COVERING_CHECKS.len()];

    let check = verify_covering(c, seq)?;
    if let Some(d) = check.divergence {
        found[0] = Some(format!(
            "step {}: fold gives {} but mutation gives {}",
            d.step,
            d.folded_after_orbit_mutation.inline(),
            d.mutated_fold.inline()
        ));
    }

    let mut cov = c.covering_seed()?;
    let mut fol = c.folded_seed()?;
    for &o in seq {
        cov = c.orbit_mutate_seed(&cov, o, budget)?;
        fol = fol.mutate_with_budget(o, budget)?;
    }
    for (v, name) in c.quiver().names().iter().enumerate() {
        let Some(p) = c.position(v) else { continue };
        let image = c.project_pi(&cov.cluster()[p])?;
        if image != fol.cluster()[c.folded_index(v)] && found[1].is_none() {
            found[1] = Some(format!("vertex {name}: {image} vs {}", fol.cluster()[c.folded_index(v)]));
        }
    }
    if !c.is_principal() {
        return Ok(found);
    }

    let n = c.folded_rank();
    let fol_grading = fol.grading().expect("principal folded seed").clone();
    let cov_g = cov.g_matrix()?;
    for (v, name) in c.quiver().names().iter().enumerate() {
        let Some(p) = c.position(v) else { continue };
        let g = &cov_g.columns[p];
        let lambda = c.lambda_degree(g);
        let image = c.project_pi(&cov.cluster()[p])?;
        let direct = match image.degree_vector(&fol_grading).map_err(SeedError::from)? {
            Homogeneity::Homogeneous(d) => Some(d),
            _ => None,
        };
        if direct.as_ref() != Some(&lambda) && found[2].is_none() {
            found[2] = Some(format!("vertex {name}: lambda {lambda:?} vs degree {direct:?}"));
        }
        for o in 0..n {
            let coords: Vec<i64> = c.orbit_positions(o).iter().map(|&q| g[q]).collect();
            if coords.iter().any(|&x| x > 0) && coords.iter().any(|&x| x < 0) && found[3].is_none() {
                found[3] = Some(format!("vertex {name}, orbit {}: {coords:?}", c.orbit_name(o)));
            }
            let split: i64 = coords.iter().map(|&x| x.min(0)).sum();
            let joined = coords.iter().sum::<i64>().min(0);
            if split != joined && found[4].is_none() {
                found[4] = Some(format!("vertex {name}, orbit {}: {split} vs {joined}", c.orbit_name(o)));
            }
        }
    }

    // Base change along each orbit mutation of the path.
    let mut bases = vec![c.clone()];
    for &o in seq {
        let next = bases.last().expect("nonempty").orbit_mutate(o)?;
        bases.push(next);
    }
    let rebased: Vec<(GMatrix, GMatrix)> = bases
        .iter()
        .enumerate()
        .map(|(p, base)| {
            let mut cs = base.covering_seed()?;
            let mut fs = base.folded_seed()?;
            for &o in &seq[p..] {
                cs = base.orbit_mutate_seed(&cs, o, budget)?;
                fs = fs.mutate_with_budget(o, budget)?;
            }
            Ok((cs.g_matrix()?, fs.g_matrix()?))
        })
        .collect::<Result<_, UnfoldingError>>()?;
    for (p, &o) in seq.iter().enumerate() {
        let (base, (g1, f1), (g2, f2)) = (&bases[p], &rebased[p], &rebased[p + 1]);
        let orbit = base.orbit_positions(o);
        let b1 = base.quiver().exchange_matrix();
        for (a, (col1, col2)) in g1.columns.iter().zip(&g2.columns).enumerate() {
            let expected: Vec<i64> = (0..col1.len())
                .map(|i| {
                    if orbit.contains(&i) {
                        -col1[i]
                    } else {
                        col1[i]
                            + orbit
                                .iter()
                                .map(|&k| b1.get(i, k).max(0) * col1[k] - b1.get(i, k) * col1[k].min(0))
                                .sum::<i64>()
                    }
                })
                .collect();
            if &expected != col2 && found[5].is_none() {
                found[5] = Some(format!("step {}, position {}: {expected:?} vs {col2:?}", p + 1, a + 1));
            }
        }
        for (a, (col1, col2)) in f1.columns.iter().zip(&f2.columns).enumerate() {
            let stepped = g_recurrence_step(col1, base.folded(), o);
            if &stepped != col2 && found[6].is_none() {
                found[6] = Some(format!("step {}, folded position {}: {stepped:?} vs {col2:?}", p + 1, a + 1));
            }
        }
        for (u, col1) in g1.columns.iter().enumerate() {
            let v = base.quiver().unfrozen()[u];
            let lam = base.lambda_degree(col1);
            if lam != f1.columns[base.folded_index(v)] && found[2].is_none() {
                found[2] = Some(format!(
                    "step {}, position {}: lambda {lam:?} vs folded {:?}",
                    p + 1,
                    u + 1,
                    f1.columns[base.folded_index(v)]
                ));
            }
        }
    }
    Ok(found)
}

/// Runs the covering checks over every orbit sequence of length at most
/// `depth`, repeats included. Construction errors surface as failures.
pub fn check_covering_suite(c: &Covering, depth: usize, budget: Option<usize>) -> VerificationReport {
    let start = Instant::now();
    let sequences = all_sequences(c.folded_rank(), depth);
    let results: Vec<Result<Vec<Option<String>>, UnfoldingError>> =
        sequences.par_iter().map(|seq| covering_findings(c, seq, budget)).collect();
    let mut statuses: Vec<Status> = vec![Status::Pass; COVERING_CHECKS.len()];
    if !c.is_principal() {
        for s in &mut statuses[2..] {
            *s = Status::Skip("covering has its own frozen vertices; no principal grading".into());
        }
    }
    let mut truncated = 0;
    for (seq, result) in sequences.iter().zip(results) {
        match result {
            Ok(found) => {
                for (status, finding) in statuses.iter_mut().zip(found) {
                    if let (Some(detail), Status::Pass) = (finding, &*status) {
                        *status = Status::Fail(covering_witness(c, seq, detail));
                    }
                }
            }
            Err(UnfoldingError::Seed(SeedError::BudgetExceeded { .. })) => truncated += 1,
            Err(e) => {
                if !statuses[0].is_fail() {
                    statuses[0] = Status::Fail(covering_witness(c, seq, e.to_string()));
                }
            }
        }
    }
    VerificationReport {
        subject: format!("covering of {}", c.folded().inline()),
        depth,
        seeds: sequences.len(),
        truncated,
        entries: COVERING_CHECKS
            .iter()
            .zip(statuses)
            .map(|(name, status)| CheckEntry { name: name.to_string(), status })
            .collect(),
        elapsed: start.elapsed(),
    }
}

/// Reports a covering that failed to construct.
pub fn failed_covering_report(subject: &str, depth: usize, error: &UnfoldingError) -> VerificationReport {
    let mut entries: Vec<CheckEntry> = COVERING_CHECKS
        .iter()
        .map(|name| CheckEntry { name: name.to_string(), status: Status::Skip("no covering".into()) })
        .collect();
    entries[0].status = Status::Fail(Witness {
        matrix: ExchangeMatrix::from_rows(&[]).expect("empty matrix"),
        history: MutationSequence::new(),
        detail: error.to_string(),
    });
    VerificationReport { subject: subject.to_string(), depth, seeds: 0, truncated: 0, entries, elapsed: Duration::ZERO }
}

/// Distinct folded clusters reached by orbit mutation of the covering,
/// each cluster taken as the sorted set of projected covering variables.
pub fn explore_covering(
    c: &Covering,
    depth: usize,
    budget: Option<usize>,
) -> Result<Vec<Vec<LaurentPoly>>, UnfoldingError> {
    let project = |s: &Seed| -> Result<Vec<LaurentPoly>, UnfoldingError> {
        let mut images: Vec<LaurentPoly> = s.cluster().iter().map(|x| c.project_pi(x)).collect::<Result<_, _>>()?;
        images.sort();
        images.dedup();
        Ok(images)
    };
    let root = c.covering_seed()?;
    let mut seen: HashMap<Vec<LaurentPoly>, ()> = HashMap::new();
    let mut clusters = vec![project(&root)?];
    seen.insert(clusters[0].clone(), ());
    let mut frontier = vec![(root, None::<usize>)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (seed, last) in &frontier {
            for o in (0..c.folded_rank()).filter(|&o| Some(o) != *last) {
                let child = match c.orbit_mutate_seed(seed, o, budget) {
                    Ok(s) => s,
                    Err(UnfoldingError::Seed(SeedError::BudgetExceeded { .. })) => continue,
                    Err(e) => return Err(e),
                };
                let key = project(&child)?;
                if seen.insert(key.clone(), ()).is_none() {
                    clusters.push(key);
                    next.push((child, Some(o)));
                }
            }
        }
        frontier = next;
    }
    Ok(clusters)
}

/// All acyclic sign-skew-symmetric 3x3 matrices with entries in `[-3, 3]`,
/// one per simultaneous-permutation class (the lexicographically least
/// representative), followed by two worked examples.
pub fn default_corpus() -> Vec<ExchangeMatrix> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let mut classes: std::collections::BTreeSet<Vec<i64>> = std::collections::BTreeSet::new();
    let values: Vec<(i64, i64)> = (-3..=3)
        .flat_map(|a| (-3..=3).map(move |b| (a, b)))
        .filter(|&(a, b): &(i64, i64)| a.signum() == -b.signum())
        .collect();
    for &p in &values {
        for &q in &values {
            for &r in &values {
                let mut e = [0i64; 9];
                for (&(i, j), &(bij, bji)) in pairs.iter().zip(&[p, q, r]) {
                    e[i * 3 + j] = bij;
                    e[j * 3 + i] = bji;
                }
                let m = ExchangeMatrix::from_entries(3, 3, e.to_vec()).expect("3x3");
                if !m.is_acyclic() {
                    continue;
                }
                let canonical = PERMS
                    .iter()
                    .map(|perm| {
                        let mut v = Vec::with_capacity(9);
                        for i in 0..3 {
                            for j in 0..3 {
                                v.push(e[perm[i] * 3 + perm[j]]);
                            }
                        }
                        v
                    })
                    .min()
                    .expect("six permutations");
                classes.insert(canonical);
            }
        }
    }
    let mut corpus: Vec<ExchangeMatrix> =
        classes.into_iter().map(|v| ExchangeMatrix::from_entries(3, 3, v).expect("3x3")).collect();
    corpus.push(ExchangeMatrix::from_rows(&[vec![0, 1], vec![-1, 0]]).expect("A2"));
    corpus.push(ExchangeMatrix::from_rows(&[vec![0, 1, 2], vec![-2, 0, 3], vec![-1, -1, 0]]).expect("example"));
    corpus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unfolding::standard_covering;

    fn m(rows: &[&[i64]]) -> ExchangeMatrix {
        ExchangeMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn a2() -> ExchangeMatrix {
        m(&[&[0, 1], &[-1, 0]])
    }

    fn leibniz(rows: &[Vec<i64>]) -> i64 {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for pos in 0..n {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
        let n = rows.len();
        perms(n)
            .into_iter()
            .map(|p| {
                let inversions =
                    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
                let sign = if inversions % 2 == 0 { 1 } else { -1 };
                sign * (0..n).map(|i| rows[i][p[i]]).product::<i64>()
            })
            .sum()
    }

    #[test]
    fn determinant_matches_leibniz() {
        let cases = vec![
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![0, 1], vec![1, 0]],
            vec![vec![2, 3, 1], vec![4, 1, -1], vec![0, 5, 2]],
            vec![vec![0, 0, 1], vec![0, 2, 0], vec![3, 0, 0]],
            vec![vec![1, 2, 3], vec![2, 4, 6], vec![1, 0, 1]],
            vec![vec![0, 2, -1, 3], vec![1, 0, 4, -2], vec![5, -3, 0, 1], vec![2, 2, 2, 0]],
        ];
        for c in cases {
            assert_eq!(determinant(&c), BigInt::from(leibniz(&c)), "{c:?}");
        }
        assert_eq!(determinant(&[]), BigInt::one());
    }

    #[test]
    fn finite_type_counts() {
        assert_eq!(explore(&a2(), 5, None).unwrap().seeds.len(), 5);
        assert_eq!(explore(&a2(), 0, None).unwrap().seeds.len(), 1);
        let a3 = m(&[&[0, 1, 0], &[-1, 0, 1], &[0, -1, 0]]);
        assert_eq!(explore(&a3, 10, None).unwrap().seeds.len(), 14);
        assert_eq!(explore(&m(&[&[0, 1], &[-2, 0]]), 8, None).unwrap().seeds.len(), 6);
    }

    #[test]
    fn exploration_is_thread_independent() {
        let b = m(&[&[0, 2, 1], &[-2, 0, 2], &[-1, -2, 0]]);
        let one = with_threads(1, || explore(&b, 4, Some(10_000)).unwrap());
        let four = with_threads(4, || explore(&b, 4, Some(10_000)).unwrap());
        assert_eq!(one.seeds, four.seeds);
        assert_eq!(one.edges, four.edges);
        assert_eq!(one.truncated, four.truncated);
    }

    #[test]
    fn sign_checks() {
        assert_eq!(sign_incoherent_row(&[vec![1, 0], vec![0, 1]]), None);
        assert_eq!(sign_incoherent_row(&[vec![1, 0], vec![-1, 2]]), Some(1));
        assert_eq!(sign_incoherent_row(&[vec![0, -1], vec![0, 0]]), None);
    }

    #[test]
    fn a2_full_suite_passes() {
        let config = VerifyConfig { depth: 5, ..VerifyConfig::default() };
        let report = verify_matrix(&a2(), &config).unwrap();
        assert!(report.passed(), "{}", report.canonical());
        assert_eq!(report.seeds, 5);
        assert!(report.canonical().contains("CHECK sign-coherence PASS"));
    }

    #[test]
    fn injected_failures_are_caught() {
        let seed = Seed::initial(&a2()).unwrap().mutate(0).unwrap();
        let findings = seed_findings(&seed, &[Check::SignCoherence, Check::Basis]).unwrap();
        assert!(findings.iter().all(|(_, f)| f.is_none()));
        let corrupted = vec![vec![1, -1], vec![0, 1]];
        assert_eq!(sign_incoherent_row(&corrupted), Some(0));
        assert_eq!(determinant(&[vec![2, 0], vec![0, 1]]), BigInt::from(2));
    }

    #[test]
    fn recurrence_on_small_examples() {
        let out = check_recurrence(&a2(), 4, None).unwrap();
        assert_eq!(out.mismatch, None);
        assert!(out.comparisons > 0);
        let b = m(&[&[0, 1, 2], &[-2, 0, 3], &[-1, -1, 0]]);
        let out = check_recurrence(&b, 2, Some(DEFAULT_BUDGET)).unwrap();
        assert_eq!(out.mismatch, None);
    }

    #[test]
    fn covering_suite_on_c2() {
        let c = standard_covering(&m(&[&[0, 1], &[-2, 0]])).unwrap();
        let report = check_covering_suite(&c, 3, None);
        assert!(report.passed(), "{}", report.canonical());
        assert_eq!(explore_covering(&c, 8, None).unwrap().len(), 6);
    }

    #[test]
    fn trivial_covering_suite_passes() {
        let c = Covering::trivial(&a2()).unwrap();
        let report = check_covering_suite(&c, 3, None);
        assert!(report.passed(), "{}", report.canonical());
    }

    #[test]
    fn corpus_shape() {
        let corpus = default_corpus();
        assert_eq!(corpus.len(), 912);
        assert!(corpus.iter().all(|b| b.is_acyclic() && b.is_sign_skew_symmetric()));
        let wild =
            corpus[..910].iter().filter(|b| (0..3).any(|i| (0..3).any(|j| b.get(i, j) * b.get(j, i) <= -4))).count();
        assert_eq!(wild, 724);
    }

    #[test]
    fn check_lists() {
        assert_eq!(Check::parse_list("all").unwrap().len(), 6);
        assert_eq!(Check::parse_list("basis,sign-coherence").unwrap(), vec![Check::SignCoherence, Check::Basis]);
        assert!(Check::parse_list("bogus").is_err());
    }
}
