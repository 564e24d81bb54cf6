//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails. Runs without the libtest harness
//! so the lines are never captured.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use clusterfold::seed::has_unit_constant_term;
use clusterfold::verify::{
    check_covering_suite, check_recurrence, default_corpus, explore, explore_covering, verify_corpus, verify_matrix,
    Check, CorpusReport, Status, VerificationReport, VerifyConfig, DEFAULT_BUDGET,
};
use clusterfold::{Covering, ExchangeMatrix, Seed};

/// Wall-clock bound for each finite-type count.
const COUNT_TIME_LIMIT: Duration = Duration::from_secs(1);
/// Wall-clock bound for one single-threaded corpus run.
const CORPUS_TIME_LIMIT: Duration = Duration::from_secs(600);
const CORPUS_DEPTH: usize = 6;
const RECURRENCE_DEPTH: usize = 4;
const COVERING_DEPTH: usize = 4;
const DETERMINISM_THREADS: usize = 8;

const C2_COVER: &str = "quiver 3\nvertices 1 2a 2b\nfrozen\narrows\n1 2a 1\n1 2b 1\ngroup\n(2a 2b)\n";

fn matrix(rows: &[&[i64]]) -> ExchangeMatrix {
    ExchangeMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn a2() -> ExchangeMatrix {
    matrix(&[&[0, 1], &[-1, 0]])
}

fn a3() -> ExchangeMatrix {
    matrix(&[&[0, 1, 0], &[-1, 0, 1], &[0, -1, 0]])
}

fn example() -> ExchangeMatrix {
    matrix(&[&[0, 1, 2], &[-2, 0, 3], &[-1, -1, 0]])
}

fn c2_cover() -> Covering {
    Covering::parse(C2_COVER).unwrap()
}

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Outcome {
        Outcome { passed, detail: detail.into() }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed())
}

/// First failing entry among `names`, rendered, across the reports.
fn first_failure<'a>(reports: impl IntoIterator<Item = &'a VerificationReport>, names: &[&str]) -> Option<String> {
    reports.into_iter().find_map(|r| {
        r.entries
            .iter()
            .find(|e| names.contains(&e.name.as_str()) && e.status.is_fail())
            .map(|e| format!("{}: {e}", r.subject))
    })
}

fn all_pass(reports: &[&VerificationReport], name: &str) -> bool {
    reports.iter().all(|r| r.entry(name).is_some_and(|e| e.status == Status::Pass))
}

fn finite_type_counts() -> Outcome {
    let mut lines = Vec::new();
    let mut passed = true;
    let mut record = |label: &str, expected: usize, got: Result<usize, String>, took: Duration| {
        let ok = got.as_ref() == Ok(&expected) && took < COUNT_TIME_LIMIT;
        passed &= ok;
        lines.push(format!("{label}={got:?} (expected {expected}, {:.3}s)", took.as_secs_f64()));
    };
    for (label, b, expected) in [("A2", a2(), 5), ("A3", a3(), 14)] {
        let (got, took) = timed(|| explore(&b, 12, None).map(|e| e.seeds.len()).map_err(|e| e.to_string()));
        record(label, expected, got, took);
    }
    let (got, took) = timed(|| explore_covering(&c2_cover(), 12, None).map(|c| c.len()).map_err(|e| e.to_string()));
    record("C2 covering", 6, got, took);
    Outcome::new(passed, lines.join(", "))
}

fn sign_coherence(corpus: &CorpusReport) -> Outcome {
    let reports: Vec<&VerificationReport> = corpus.reports.iter().collect();
    let within_time = corpus.elapsed < CORPUS_TIME_LIMIT;
    let failure = first_failure(reports.iter().copied(), &["sign-coherence"]);
    let passed = failure.is_none() && all_pass(&reports, "sign-coherence") && within_time;
    Outcome::new(
        passed,
        format!(
            "{} matrices, {} seeds, {} truncated mutations, {:.1}s{}",
            corpus.reports.len(),
            corpus.seeds(),
            corpus.truncated(),
            corpus.elapsed.as_secs_f64(),
            failure.map(|f| format!("; {f}")).unwrap_or_default()
        ),
    )
}

fn z_basis(corpus: &CorpusReport) -> Outcome {
    let reports: Vec<&VerificationReport> = corpus.reports.iter().collect();
    let failure = first_failure(reports.iter().copied(), &["basis"]);
    let passed = failure.is_none() && all_pass(&reports, "basis");
    Outcome::new(passed, failure.unwrap_or_else(|| format!("|det G| = 1 on {} seeds", corpus.seeds())))
}

fn recurrence() -> Outcome {
    let mut lines = Vec::new();
    let mut passed = true;
    for (label, b) in [("A2", a2()), ("B", example())] {
        match check_recurrence(&b, RECURRENCE_DEPTH, None) {
            Ok(outcome) => {
                passed &= outcome.mismatch.is_none() && outcome.skipped == 0 && outcome.comparisons > 0;
                lines.push(format!(
                    "{label}: {} vertices, {} comparisons, {} skipped{}",
                    outcome.vertices,
                    outcome.comparisons,
                    outcome.skipped,
                    outcome.mismatch.map(|w| format!(", mismatch {w}")).unwrap_or_default()
                ));
            }
            Err(e) => {
                passed = false;
                lines.push(format!("{label}: {e}"));
            }
        }
    }
    Outcome::new(passed, lines.join("; "))
}

fn covering_suite(report: &VerificationReport) -> Outcome {
    let required = ["covering", "projection", "lambda", "orbit-sign-coherence", "min-sum"];
    let missing: Vec<&str> =
        required.iter().copied().filter(|n| report.entry(n).is_none_or(|e| e.status != Status::Pass)).collect();
    let detail = if missing.is_empty() {
        format!("{} covering seeds to depth {}", report.seeds, report.depth)
    } else {
        format!("not passing: {}\n{}", missing.join(", "), report.canonical())
    };
    Outcome::new(missing.is_empty() && report.truncated == 0, detail)
}

/// F-polynomials of every covering seed reached by orbit mutation.
fn covering_f_polynomials(c: &Covering, depth: usize) -> Result<usize, String> {
    let mut frontier: Vec<(Seed, Option<usize>)> = vec![(c.covering_seed().map_err(|e| e.to_string())?, None)];
    let mut checked = 0;
    for level in 0..=depth {
        let mut next = Vec::new();
        for (seed, last) in &frontier {
            for a in 0..seed.rank() {
                if !has_unit_constant_term(&seed.f_polynomial(a)) {
                    return Err(format!("F-polynomial {a} after [{}]", seed.history().to_one_based()));
                }
                checked += 1;
            }
            if level == depth {
                continue;
            }
            for o in (0..c.folded_rank()).filter(|&o| Some(o) != *last) {
                let child = c.orbit_mutate_seed(seed, o, None).map_err(|e| e.to_string())?;
                next.push((child, Some(o)));
            }
        }
        frontier = next;
    }
    Ok(checked)
}

fn laurent_and_f_constant(
    corpus: &CorpusReport,
    small: &[VerificationReport],
    covering: &VerificationReport,
) -> Outcome {
    let mut reports: Vec<&VerificationReport> = corpus.reports.iter().collect();
    reports.extend(small);
    let failure = first_failure(reports.iter().copied(), &["laurent", "f-const"]);
    let checks_ran = all_pass(&reports, "laurent") && all_pass(&reports, "f-const");
    let covering_ok = !covering.entries.iter().any(|e| e.status.is_fail());
    let covering_f = covering_f_polynomials(&c2_cover(), COVERING_DEPTH);
    let passed = failure.is_none() && checks_ran && covering_ok && covering_f.is_ok();
    Outcome::new(
        passed,
        format!(
            "{} matrix reports, covering F-polynomials: {:?}{}",
            reports.len(),
            covering_f,
            failure.map(|f| format!("; {f}")).unwrap_or_default()
        ),
    )
}

fn determinism(single: &CorpusReport, config: &VerifyConfig) -> Outcome {
    let config = VerifyConfig { threads: DETERMINISM_THREADS, ..config.clone() };
    match verify_corpus(&default_corpus(), &config) {
        Ok(multi) => {
            let (a, b) = (single.canonical(), multi.canonical());
            let first_diff = a.lines().zip(b.lines()).position(|(x, y)| x != y);
            Outcome::new(
                a == b,
                match first_diff {
                    None if a == b => format!("{} bytes identical, 1 vs {DETERMINISM_THREADS} threads", a.len()),
                    None => "reports differ in length".to_string(),
                    Some(line) => format!("first difference at line {}", line + 1),
                },
            )
        }
        Err(e) => Outcome::new(false, e.to_string()),
    }
}

fn main() -> ExitCode {
    let corpus_config = VerifyConfig {
        depth: CORPUS_DEPTH,
        budget: Some(DEFAULT_BUDGET),
        checks: vec![Check::SignCoherence, Check::Basis, Check::Laurent, Check::FConst, Check::CSign],
        threads: 1,
    };
    let small_config =
        VerifyConfig { depth: RECURRENCE_DEPTH, budget: None, checks: vec![Check::Laurent, Check::FConst], threads: 1 };

    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "finite-type counts", finite_type_counts()));

    let corpus = verify_corpus(&default_corpus(), &corpus_config).expect("corpus run");
    results.push((2, "sign-coherence over the corpus", sign_coherence(&corpus)));
    results.push((3, "unimodular g-matrices", z_basis(&corpus)));
    results.push((4, "g-vector recurrence", recurrence()));

    let covering = check_covering_suite(&c2_cover(), COVERING_DEPTH, None);
    results.push((5, "C2 covering suite", covering_suite(&covering)));

    let folded = c2_cover().folded().clone();
    let small: Vec<VerificationReport> =
        [a2(), example(), folded].iter().map(|b| verify_matrix(b, &small_config).expect("small run")).collect();
    results.push((6, "Laurent divisions and F constant terms", laurent_and_f_constant(&corpus, &small, &covering)));
    results.push((7, "thread-count determinism", determinism(&corpus, &corpus_config)));

    for (n, name, outcome) in &results {
        println!("{} criterion {n} ({name}): {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.detail);
    }
    let failed: Vec<usize> = results.iter().filter(|(_, _, o)| !o.passed).map(|(n, _, _)| *n).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
