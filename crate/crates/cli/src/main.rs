//! `dirconv` command-line interface.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dirconv::metrics::MetricKind;
use dirconv::pipeline::GridDirection;
use dirconv::synthetic::Family;
use dirconv::DistanceKind;

const ORIENTATION: &str = "\
Cycle orientation: cycle_knn(A -> B) takes the k nearest neighbors of each \
stimulus in B (first hop) and checks whether the stimulus is among the k \
nearest neighbors in A of any of them (return hop). The gap is \
cycle_knn(A -> B) - cycle_knn(B -> A); a positive gap means B's neighborhoods \
are the more coherent reference frame.

Defaults: k = 10, distance = cosine_on_unit_sphere (layers are L2-normalized \
first), seed = 0. Best-layer scores are independent maxima over all layer \
pairs in each direction.";

#[derive(Parser, Debug)]
#[command(
    name = "dirconv",
    version,
    about = "Directional convergence analysis of feature spaces"
)]
#[command(after_help = ORIENTATION)]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "DIRCONV_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Neighborhood size.
    #[arg(long, default_value_t = 10)]
    k: usize,

    /// cosine_on_unit_sphere or euclidean.
    #[arg(long, default_value_t = DistanceKind::CosineOnUnitSphere)]
    distance: DistanceKind,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Results file (JSON); printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write the result table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cross-group direction table with a sign-flip permutation test.
    #[command(after_help = ORIENTATION)]
    Direction {
        /// Directory of *.manifest.json files.
        #[arg(long)]
        group_a: PathBuf,
        #[arg(long)]
        group_b: PathBuf,
        #[arg(long, default_value_t = 1000)]
        permutations: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Layer-by-layer score grid for one model pair.
    #[command(after_help = ORIENTATION)]
    Grid {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        /// cycle_knn, mutual_knn or cka.
        #[arg(long, default_value_t = MetricKind::CycleKnn)]
        metric: MetricKind,
        /// a_to_b or b_to_a for cycle_knn; symmetric metrics ignore it.
        #[arg(long, default_value = "a_to_b")]
        direction: GridDirection,
        #[command(flatten)]
        common: Common,
    },
    /// Mean best-layer CKA and mutual kNN within one group.
    #[command(after_help = ORIENTATION)]
    Consensus {
        #[arg(long)]
        group: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Layer-wise pairwise mean distance of every model in a group.
    #[command(after_help = ORIENTATION)]
    Density {
        #[arg(long)]
        group: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Best-layer gap of one pair across several k.
    #[command(after_help = ORIENTATION)]
    Ksweep {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10,20,50")]
        ks: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Gap versus density ratio on paired synthetic manifolds.
    ///
    /// Reports delta = cycle_knn(Y -> X) - cycle_knn(X -> Y), where X is the
    /// compact space and Y the dispersed one.
    #[command(after_help = ORIENTATION)]
    Synthetic {
        /// Generator family, or `all`.
        #[arg(long, default_value = "all")]
        family: String,
        /// Number of evenly spaced ratios in [rho-min, rho-max].
        #[arg(long, default_value_t = 20)]
        rhos: usize,
        #[arg(long, default_value_t = 1.0)]
        rho_min: f64,
        #[arg(long, default_value_t = 5.0)]
        rho_max: f64,
        /// k values to score; defaults to --k.
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        n_samples: usize,
        #[arg(long, default_value_t = 128)]
        ambient_dim: usize,
        /// Write one pair at --rho-max as two single-layer models into this directory.
        #[arg(long)]
        export_pair: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Sign-flip permutation test on stored or listed gaps.
    #[command(after_help = ORIENTATION)]
    Perm {
        /// A direction results file, or a text file of numbers.
        #[arg(long)]
        gaps: PathBuf,
        #[arg(long, default_value_t = 1000)]
        permutations: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Validate a results file and print or export its table.
    #[command(after_help = ORIENTATION)]
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Write the table as CSV instead of printing it.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub(crate) fn parse_family(s: &str) -> dirconv::Result<Vec<Family>> {
    if s == "all" {
        Ok(Family::ALL.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}
