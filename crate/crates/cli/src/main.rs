//! `lcum`: lattice inspection, coordinate transforms, model generation and
//! identity verification over JSON files.
//!
//! Exit codes: 0 on success or when every check passes, 1 when a verified
//! identity fails, 2 on usage, parse or input errors.

mod commands;
mod report;
mod suites;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lcum_core::partition::set_capacity_limit;

#[derive(Parser, Debug)]
#[command(
    name = "lcum",
    version,
    about = "Exact L-cumulants of finite discrete random vectors"
)]
#[command(
    after_help = "Rationals are read and written as \"p/q\" strings. The environment variable \
LCUM_CAPACITY raises or lowers the largest ground set for lattice enumeration (default 12)."
)]
pub struct Cli {
    /// Seed for randomized parameters and suites (SplitMix64).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for verification batches; results keep draw order.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Compute and print in floating point instead of exact rationals.
    #[arg(long, global = true)]
    pub float: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Dump a partition lattice with its Mobius values to the top.
    Lattice(LatticeArgs),
    /// Convert a coordinate vector between systems, e.g. moments to L-cumulants.
    Transform(TransformArgs),
    /// Generate a model point.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Run an identity suite and print a report.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Args, Debug, Clone)]
pub struct FamilyArgs {
    /// full, noncrossing, interval, onecluster or tree.
    #[arg(long)]
    pub family: Option<String>,

    /// Newick file with labeled inner nodes; implies the tree family.
    #[arg(long)]
    pub tree: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LatticeArgs {
    #[command(flatten)]
    pub family: FamilyArgs,

    /// Ground set size (ignored for trees, which use their leaves).
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    /// Input vector or distribution JSON.
    #[arg(long, short)]
    pub input: PathBuf,

    /// Expected system of the input; read from the file when omitted.
    #[arg(long)]
    pub from: Option<String>,

    /// probabilities, moments, centralmoments, cumulants, lcumulants or treecumulants.
    #[arg(long)]
    pub to: String,

    #[command(flatten)]
    pub family: FamilyArgs,
}

#[derive(Subcommand, Debug)]
pub enum ModelCommand {
    /// Two-state general Markov model on a tree.
    Gmm(GmmArgs),
    /// Mixture of two product measures (secant point).
    Secant(SecantArgs),
    /// Binary hidden Markov chain with finite emissions.
    Hmm(HmmArgs),
}

#[derive(Args, Debug)]
pub struct GmmArgs {
    /// Newick tree; its outermost node is the root.
    #[arg(long)]
    pub tree: PathBuf,

    /// Parameter JSON { root_dist, edges: [{u, v, table}] }; random from --seed when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,

    /// distribution, moments, treecumulants, closedform or params.
    #[arg(long, default_value = "treecumulants")]
    pub emit: String,
}

#[derive(Args, Debug)]
pub struct SecantArgs {
    #[arg(long)]
    pub n: Option<usize>,

    /// Mixing weight.
    #[arg(long)]
    pub t: Option<String>,

    /// Comma-separated means of the first component.
    #[arg(long)]
    pub a: Option<String>,

    /// Comma-separated means of the second component.
    #[arg(long)]
    pub b: Option<String>,

    /// Parameter JSON { t, a, b }.
    #[arg(long)]
    pub params: Option<PathBuf>,

    /// moments, treecumulants, cumulants, closedform or params.
    #[arg(long, default_value = "moments")]
    pub emit: String,
}

#[derive(Args, Debug)]
pub struct HmmArgs {
    /// Parameter JSON { initial, transitions, emissions }; random when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,

    /// Chain length for random parameters.
    #[arg(long, default_value_t = 4)]
    pub n: usize,

    /// Emission arity for random parameters.
    #[arg(long, default_value_t = 2)]
    pub arity: usize,

    /// Random parameters from a homogeneous chain.
    #[arg(long)]
    pub homogeneous: bool,

    /// distribution, moments, normalized, closedform or params.
    #[arg(long, default_value = "distribution")]
    pub emit: String,
}

#[derive(Args, Debug, Clone)]
pub struct DrawArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 5)]
    pub draws: usize,
}

#[derive(Subcommand, Debug)]
pub enum VerifyCommand {
    /// Rank-one binomials across every edge split of a tree.
    SplitBinomials {
        /// Tree-cumulant vector to check; random model points when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Tree for random points (default: quartet).
        #[arg(long)]
        tree: Option<PathBuf>,
        #[command(flatten)]
        draws: DrawArgs,
    },
    /// Secant closed forms against the moment pipeline.
    Secant {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[command(flatten)]
        draws: DrawArgs,
    },
    /// Tree-cumulant monomial parametrization and rooting invariance.
    Gmm {
        /// Tree (default: quartet).
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Fixed parameters instead of random draws.
        #[arg(long)]
        params: Option<PathBuf>,
        #[command(flatten)]
        draws: DrawArgs,
    },
    /// Hidden Markov closed form against the pipeline, plus homogeneous identities.
    Hmm {
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Emission arity.
        #[arg(long, default_value_t = 2)]
        arity: usize,
        /// Chain length for the homogeneous identities.
        #[arg(long, default_value_t = 6)]
        homogeneous_n: usize,
        #[command(flatten)]
        draws: DrawArgs,
    },
    /// Homogeneous-chain identities only.
    HmmIdentities {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        arity: usize,
        #[command(flatten)]
        draws: DrawArgs,
    },
    /// Weisner sums over every admissible pair of a lattice.
    Weisner {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Structural conditions C0-C3 of a family.
    Conditions {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n: Option<usize>,
        /// One of C0, C1, C2, C3; all when omitted.
        #[arg(long)]
        which: Option<String>,
    },
}

/// Outcome of a command: output text and whether every check passed.
pub struct Outcome {
    pub stdout: String,
    pub pass: bool,
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("LCUM_CAPACITY") {
        match v.trim().parse::<usize>() {
            Ok(limit) if limit > 0 => set_capacity_limit(limit),
            _ => {
                eprintln!("error: LCUM_CAPACITY must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let run = || commands::run(&cli, &args);
    let result = match cli.jobs {
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => run(),
    };
    match result {
        Ok(out) => {
            // a closed pipe downstream is not an error of ours
            let _ = writeln!(std::io::stdout().lock(), "{}", out.stdout);
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
