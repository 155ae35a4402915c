//! Argument parsing and dispatch, kept out of `main` so it can run in-process.

use clap::{Args, Parser, Subcommand};
use multicorr_core::covariance::DEFAULT_RESTARTS;
use multicorr_core::postulate::DEFAULT_THRESHOLD;
use multicorr_core::states::{Family, StateSpec};
use multicorr_core::Error;

use crate::commands::{self, CovarianceMode};
use crate::properties::{DEFAULT_SEED, DEFAULT_TRIALS};
use crate::report::{Format, ReportDocument};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CLAIM_FAILED: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "multicorr",
    version,
    about = "Reports on multipartite classical correlations of qubit states"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Worker threads for scans (0 = one per core).
    #[arg(long, default_value_t = 0, global = true)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    /// State family: ghz_classical, parity_even, w, wbar, kaszlikowski,
    /// dephased_kaszlikowski, reduced_kaszlikowski, random_product,
    /// random_classical, random_product_quantum.
    #[arg(long)]
    pub family: Family,
    /// Number of qubits.
    #[arg(long)]
    pub n: usize,
    /// Marginal size for reduced_kaszlikowski.
    #[arg(long)]
    pub k: Option<usize>,
    /// Seed for random families and optimizers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dephase every qubit in the computational basis before analysis.
    #[arg(long)]
    pub dephase: bool,
}

impl StateArgs {
    fn spec(&self) -> StateSpec {
        let mut spec = StateSpec::new(self.family, self.n);
        if let Some(k) = self.k {
            spec = spec.with_k(k);
        }
        if self.family.is_random() {
            spec = spec.with_seed(self.seed);
        }
        spec
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Largest n-party covariance over local observables.
    Covariance {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_enum, default_value_t = CovarianceMode::Pauli)]
        mode: CovarianceMode,
        /// Vanishing tolerance (default 1e-10 for pauli, 1e-7 for optimize).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_RESTARTS, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
        restarts: usize,
    },
    /// Mutual information, product test and optional witnesses on every bipartite cut.
    Cuts {
        #[command(flatten)]
        state: StateArgs,
        /// Optimize the Henderson-Vedral quantity on every cut.
        #[arg(long)]
        hv: bool,
        #[arg(long, default_value_t = 8, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
        hv_restarts: usize,
        /// Report the minimum eigenvalue of the partial transpose.
        #[arg(long)]
        ppt: bool,
    },
    /// Runs the GHZ + CNOT extension against the covariance and min-cut MI measures.
    Postulate {
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// IC-POVM factorization versus the product test on seeded random states.
    Lemma {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 20, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Mutual information of every pair of qubits.
    Pairwise {
        #[command(flatten)]
        state: StateArgs,
    },
    /// Runs the full reproduction checklist.
    ReproducePaper {
        /// Trials per randomized property.
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

/// What a run printed and how it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Capacity { .. } => EXIT_CAPACITY,
        _ => EXIT_USAGE,
    }
}

fn dispatch(command: &Command, echo: Vec<String>) -> multicorr_core::Result<ReportDocument> {
    match command {
        Command::Covariance {
            state,
            mode,
            tol,
            restarts,
        } => commands::cmd_covariance(
            echo,
            &state.spec(),
            state.dephase,
            *mode,
            *tol,
            *restarts,
            state.seed,
        ),
        Command::Cuts {
            state,
            hv,
            hv_restarts,
            ppt,
        } => commands::cmd_cuts(
            echo,
            &state.spec(),
            state.dephase,
            *hv,
            *hv_restarts,
            *ppt,
            state.seed,
        ),
        Command::Postulate { threshold } => commands::cmd_postulate(echo, Some(*threshold)),
        Command::Lemma { n, trials, seed } => commands::cmd_lemma(echo, *n, *trials, *seed),
        Command::Pairwise { state } => commands::cmd_pairwise(echo, &state.spec(), state.dephase),
        Command::ReproducePaper { trials, seed } => commands::cmd_reproduce(echo, *trials, *seed),
    }
}

/// Parses `args` (without the program name) and runs the command.
pub fn run(args: Vec<String>) -> Execution {
    let parsed =
        Cli::try_parse_from(std::iter::once("multicorr".to_string()).chain(args.iter().cloned()));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Execution {
                    stdout: String::new(),
                    stderr: text,
                    code: EXIT_USAGE,
                }
            } else {
                Execution {
                    stdout: text,
                    stderr: String::new(),
                    code: EXIT_OK,
                }
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            return Execution {
                stdout: String::new(),
                stderr: format!("error: {e}\n"),
                code: EXIT_USAGE,
            };
        }
    };
    match pool.install(|| dispatch(&cli.command, args)) {
        Ok(doc) => Execution {
            stdout: doc.render(cli.format),
            stderr: if doc.verified {
                String::new()
            } else {
                "error: claim verification failed\n".into()
            },
            code: if doc.verified {
                EXIT_OK
            } else {
                EXIT_CLAIM_FAILED
            },
        },
        Err(e) => Execution {
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
            code: exit_code(&e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(args("covariance --family nope --n 3")).code, EXIT_USAGE);
        assert_eq!(run(args("covariance --n 3")).code, EXIT_USAGE);
        assert_eq!(
            run(args("covariance --family kaszlikowski --n 4")).code,
            EXIT_USAGE
        );
        assert_eq!(run(args("lemma --trials 0")).code, EXIT_USAGE);
    }

    #[test]
    fn capacity_errors_exit_4() {
        assert_eq!(run(args("lemma --n 5")).code, EXIT_CAPACITY);
        assert_eq!(
            run(args("cuts --family ghz_classical --n 10 --hv")).code,
            EXIT_CAPACITY
        );
        assert_eq!(
            run(args("pairwise --family ghz_classical --n 40")).code,
            EXIT_CAPACITY
        );
    }

    #[test]
    fn failed_claims_exit_3() {
        let out = run(args("covariance --family ghz_classical --n 4 --tol 2"));
        assert_eq!(out.code, EXIT_CLAIM_FAILED);
        assert!(out.stdout.contains("\"verified\": false"));
    }

    #[test]
    fn help_exits_0() {
        let out = run(args("--help"));
        assert_eq!(out.code, EXIT_OK);
        assert!(out.stdout.contains("reproduce-paper"));
    }

    #[test]
    fn jobs_do_not_change_output() {
        let one = run(args("cuts --family kaszlikowski --n 5 --ppt --jobs 1"));
        let four = run(args("cuts --family kaszlikowski --n 5 --ppt --jobs 4"));
        assert_eq!(one.code, EXIT_OK);
        // The echoed command differs only in the jobs flag.
        assert_eq!(one.stdout.replace("\"1\"", "\"4\""), four.stdout);
    }
}
