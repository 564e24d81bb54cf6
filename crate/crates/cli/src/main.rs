use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clusterfold::unfolding::{standard_covering, verify_covering, verify_projection, UnfoldingError};
use clusterfold::verify::{
    check_covering_suite, default_corpus, explore, verify_corpus, verify_matrix, with_threads, Check,
    VerificationReport, VerifyConfig, DEFAULT_BUDGET, DEFAULT_DEPTH,
};
use clusterfold::{Covering, ExchangeError, ExchangeMatrix, MutationSequence, Seed, SeedError};

#[derive(Parser)]
#[command(name = "clusterfold", version, about = "Exact seed mutation, folding and verification for cluster algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Limits {
    /// Maximum unmerged term count of a single product or division.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Mutates the principal seed of a matrix and prints the final seed.
    Mutate {
        #[arg(long)]
        matrix: PathBuf,
        /// 1-based mutation indices.
        #[arg(long, default_value = "")]
        seq: String,
        #[command(flatten)]
        limits: Limits,
    },
    /// Prints the g-vectors and c-vectors of the seed reached by a sequence.
    Gvectors {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "")]
        seq: String,
        #[command(flatten)]
        limits: Limits,
    },
    /// Lists the unlabeled seeds reachable within the depth.
    Explore {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        /// Print the exchange graph in DOT format instead.
        #[arg(long)]
        dot: bool,
        #[command(flatten)]
        limits: Limits,
    },
    /// Runs the verification checks on one matrix or on the default corpus.
    Verify {
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        /// Comma-separated check names or `all`.
        #[arg(long, default_value = "all")]
        checks: String,
        #[command(flatten)]
        limits: Limits,
    },
    /// Prints the folded matrix of a covering.
    Fold {
        #[arg(long)]
        quiver: PathBuf,
    },
    /// Applies orbit mutations and prints the resulting covering.
    OrbitMutate {
        #[arg(long)]
        quiver: PathBuf,
        /// Orbits as 1-based folded indices or vertex names in brackets.
        #[arg(long)]
        seq: String,
    },
    /// Checks that folding commutes with orbit mutation.
    ///
    /// With `--seq` only that sequence is checked; otherwise the covering
    /// suite runs over every orbit sequence up to the depth.
    VerifyCovering {
        #[arg(long)]
        quiver: PathBuf,
        #[arg(long)]
        seq: Option<String>,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[command(flatten)]
        limits: Limits,
    },
    /// Compares projected covering variables with folded variables.
    VerifyProjection {
        #[arg(long)]
        quiver: PathBuf,
        #[arg(long, default_value = "")]
        seq: String,
        /// Covering vertex to compare; every exchangeable vertex by default.
        #[arg(long)]
        vertex: Option<String>,
        #[command(flatten)]
        limits: Limits,
    },
    /// Prints the standard covering of a skew-symmetrizable matrix.
    StandardCover {
        #[arg(long)]
        matrix: PathBuf,
    },
}

/// Outcome of a command that did not hit an input error.
enum Outcome {
    Ok,
    PropertyFailed,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Property(String),
}

impl From<ExchangeError> for CliError {
    fn from(e: ExchangeError) -> CliError {
        CliError::Input(e.to_string())
    }
}

impl From<SeedError> for CliError {
    fn from(e: SeedError) -> CliError {
        match e {
            SeedError::NonExactDivision { .. } | SeedError::InhomogeneityBug { .. } => {
                CliError::Property(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<UnfoldingError> for CliError {
    fn from(e: UnfoldingError) -> CliError {
        match e {
            UnfoldingError::Seed(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(exit_code(run(cli.command)))
}

/// 0 on success, 1 when a verified property fails, 2 on input errors.
fn exit_code(result: Result<Outcome, CliError>) -> u8 {
    match result {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::PropertyFailed) => 1,
        Err(CliError::Property(msg)) => {
            println!("FAIL {msg}");
            1
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<ExchangeMatrix, CliError> {
    Ok(read(path)?.parse()?)
}

fn read_covering(path: &Path) -> Result<Covering, CliError> {
    Ok(Covering::parse(&read(path)?)?)
}

/// Parses a mutation sequence of 1-based indices; bracketed tokens are
/// accepted and stripped.
fn matrix_sequence(s: &str, n: usize) -> Result<MutationSequence, CliError> {
    let stripped: String = s.chars().map(|c| if c == '[' || c == ']' { ' ' } else { c }).collect();
    Ok(MutationSequence::parse_one_based(&stripped, n)?)
}

/// Parses orbit references: `[name]` for the orbit of a vertex, or a bare
/// 1-based folded index.
fn orbit_sequence(c: &Covering, s: &str) -> Result<Vec<usize>, CliError> {
    s.split(|ch: char| ch.is_whitespace() || ch == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let token = match t.strip_prefix('[') {
                Some(rest) => {
                    rest.strip_suffix(']').ok_or_else(|| CliError::Input(format!("unbalanced bracket in {t:?}")))?
                }
                None => {
                    if t.parse::<usize>().is_err() {
                        return Err(CliError::Input(format!("bad orbit {t:?}; use [name] or a 1-based index")));
                    }
                    t
                }
            };
            Ok(c.resolve_orbit(token)?)
        })
        .collect()
}

fn print_report(report: &VerificationReport) {
    print!("{}", report.canonical());
    println!("time {:.3}s", report.elapsed.as_secs_f64());
}

fn outcome(passed: bool) -> Outcome {
    if passed {
        Outcome::Ok
    } else {
        Outcome::PropertyFailed
    }
}

fn run(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Mutate { matrix, seq, limits } => {
            let b = read_matrix(&matrix)?;
            let seq = matrix_sequence(&seq, b.rank())?;
            let seed = Seed::initial(&b)?.mutate_sequence_with_budget(seq.indices(), Some(limits.budget))?;
            print!("{seed}");
            Ok(Outcome::Ok)
        }
        Command::Gvectors { matrix, seq, limits } => {
            let b = read_matrix(&matrix)?;
            let seq = matrix_sequence(&seq, b.rank())?;
            let seed = Seed::initial(&b)?.mutate_sequence_with_budget(seq.indices(), Some(limits.budget))?;
            let g = seed.g_matrix()?;
            println!("hist {}", seq.to_one_based());
            for (a, column) in g.columns.iter().enumerate() {
                println!("g {}: {}", a + 1, join(column));
            }
            let c = seed.c_matrix();
            for a in 0..seed.rank() {
                let column: Vec<i64> = c.iter().map(|row| row[a]).collect();
                println!("c {}: {}", a + 1, join(&column));
            }
            Ok(Outcome::Ok)
        }
        Command::Explore { matrix, depth, dot, limits } => {
            let b = read_matrix(&matrix)?;
            let exploration = with_threads(limits.threads, || explore(&b, depth, Some(limits.budget)))?;
            if dot {
                print!("{}", exploration.to_dot());
                return Ok(Outcome::Ok);
            }
            println!(
                "{} seeds within depth {}, {} truncated",
                exploration.seeds.len(),
                depth,
                exploration.truncated.len()
            );
            for seed in &exploration.seeds {
                let cluster: Vec<String> = seed.sorted_cluster().iter().map(|x| x.to_string()).collect();
                println!("[{}] {}", seed.history().to_one_based(), cluster.join(" ; "));
            }
            for (history, k) in &exploration.truncated {
                println!("truncated [{}] at {}", history.to_one_based(), k + 1);
            }
            Ok(Outcome::Ok)
        }
        Command::Verify { matrix, depth, checks, limits } => {
            let checks = Check::parse_list(&checks).map_err(CliError::Input)?;
            let config = VerifyConfig { depth, budget: Some(limits.budget), checks, threads: limits.threads };
            match matrix {
                Some(path) => {
                    let b = read_matrix(&path)?;
                    let report = verify_matrix(&b, &config)?;
                    print_report(&report);
                    Ok(outcome(report.passed()))
                }
                None => {
                    let report = verify_corpus(&default_corpus(), &config)?;
                    for e in report.summary() {
                        println!("{e}");
                    }
                    println!(
                        "corpus: {} matrices, {} seeds, {} truncated, time {:.3}s",
                        report.reports.len(),
                        report.seeds(),
                        report.truncated(),
                        report.elapsed.as_secs_f64()
                    );
                    Ok(outcome(report.passed()))
                }
            }
        }
        Command::Fold { quiver } => {
            let c = read_covering(&quiver)?;
            print!("{}", c.folded().to_text());
            Ok(Outcome::Ok)
        }
        Command::OrbitMutate { quiver, seq } => {
            let mut c = read_covering(&quiver)?;
            for o in orbit_sequence(&c, &seq)? {
                c = c.orbit_mutate(o)?;
            }
            print!("{}", c.to_text());
            Ok(Outcome::Ok)
        }
        Command::VerifyCovering { quiver, seq, depth, limits } => {
            let c = read_covering(&quiver)?;
            match seq {
                Some(seq) => {
                    let seq = orbit_sequence(&c, &seq)?;
                    let check = verify_covering(&c, &seq)?;
                    match check.divergence {
                        None => {
                            println!("CHECK covering PASS");
                            println!("{} orbit mutations", check.steps);
                            Ok(Outcome::Ok)
                        }
                        Some(d) => {
                            println!(
                                "CHECK covering FAIL step={} folded-after-orbit-mutation={} mutated-fold={}",
                                d.step,
                                d.folded_after_orbit_mutation.inline(),
                                d.mutated_fold.inline()
                            );
                            Ok(Outcome::PropertyFailed)
                        }
                    }
                }
                None => {
                    let report = with_threads(limits.threads, || check_covering_suite(&c, depth, Some(limits.budget)));
                    print_report(&report);
                    Ok(outcome(report.passed()))
                }
            }
        }
        Command::VerifyProjection { quiver, seq, vertex, limits } => {
            let c = read_covering(&quiver)?;
            let seq = orbit_sequence(&c, &seq)?;
            let vertices = match vertex {
                Some(name) => vec![c
                    .quiver()
                    .index_of(&name)
                    .ok_or_else(|| CliError::Input(format!("unknown vertex {name:?}")))?],
                None => c.quiver().unfrozen(),
            };
            let mut passed = true;
            for v in vertices {
                let check = verify_projection(&c, &seq, v, Some(limits.budget))?;
                let name = c.quiver().name(v);
                if check.holds() {
                    println!("CHECK projection {name} PASS {}", check.folded);
                } else {
                    passed = false;
                    println!("CHECK projection {name} FAIL projected={} folded={}", check.projected, check.folded);
                }
            }
            Ok(outcome(passed))
        }
        Command::StandardCover { matrix } => {
            let b = read_matrix(&matrix)?;
            print!("{}", standard_covering(&b)?.to_text());
            Ok(Outcome::Ok)
        }
    }
}

fn join(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(Ok(Outcome::Ok)), 0);
        assert_eq!(exit_code(Ok(Outcome::PropertyFailed)), 1);
        let inexact = SeedError::NonExactDivision { k: 1, history: String::new() };
        assert_eq!(exit_code(Err(inexact.clone().into())), 1);
        assert_eq!(exit_code(Err(UnfoldingError::Seed(inexact).into())), 1);
        let budget = SeedError::BudgetExceeded { limit: 1, k: 1, history: String::new() };
        assert_eq!(exit_code(Err(budget.into())), 2);
        assert_eq!(exit_code(Err(UnfoldingError::UnknownOrbit("z".into()).into())), 2);
    }

    #[test]
    fn orbit_tokens() {
        let c =
            Covering::parse("quiver 3\nvertices 1 2a 2b\nfrozen\narrows\n1 2a 1\n1 2b 1\ngroup\n(2a 2b)\n").unwrap();
        assert_eq!(orbit_sequence(&c, "[2b] [1] 2, 1").unwrap(), vec![1, 0, 1, 0]);
        assert!(orbit_sequence(&c, "[2b").is_err());
        assert!(orbit_sequence(&c, "2b").is_err());
        assert!(orbit_sequence(&c, "[3]").is_err());
    }
}
