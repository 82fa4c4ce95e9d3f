use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bplab_core::binarize::{annotated_exact_marginals, binarize_graph, AnnotatedGraph};
use bplab_core::bp::ConvergenceOptions;
use bplab_core::concepts::{
    behavior_bound, enumerate_routing_keys, fsm_behavior_classes, routing_key_count, FsmSpec,
};
use bplab_core::equivalence::{uniqueness_probe, UniquenessGrid};
use bplab_core::experiments::{
    build_corpus, concentration_csv, is_nonincreasing, oracle_batch, oracle_csv,
    run_concentration_curve, run_equivalence_corpus, run_loopy_suite, run_tree_suite,
    ORACLE_TABLE_RANGE,
};
use bplab_core::graph::{FactorGraph, StructureKind};
use bplab_core::oracle::exact_marginals;
use bplab_core::prob::FfnParams;
use bplab_core::transformer::AttentionMode;

#[derive(Parser)]
#[command(name = "bplab", version, about = "Belief propagation laboratory")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; per-trial seeds are derived from it.
    #[arg(long, global = true, env = "BPLAB_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Hard,
    Soft,
}

impl From<Mode> for AttentionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Hard => AttentionMode::Hard,
            Mode::Soft => AttentionMode::Soft,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Loopy sum-product on the five loopy structures against exact marginals.
    Loopy {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Restrict to these structures (triangle, square, dating, two_loops, qbbn_chain, chain2, treeN).
        #[arg(long = "structure", value_delimiter = ',')]
        structures: Vec<String>,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
        /// Convergence threshold on the largest message change.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 0.0)]
        damping: f64,
        /// Minimum convergence rate per structure for exit status 0.
        #[arg(long, default_value_t = 0.99)]
        min_rate: f64,
        #[arg(long, default_value_t = 5e-4)]
        max_kl: f64,
        #[arg(long, default_value_t = 1e-2)]
        max_mae: f64,
    },
    /// Sum-product on random trees against exact marginals.
    Tree {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        max_vars: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// One transformer layer against one BP round on random graphs.
    Equiv {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, value_enum, default_value_t = Mode::Hard)]
        mode: Mode,
        /// Softmax inverse temperature (soft mode).
        #[arg(long, default_value_t = 64.0)]
        beta: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Soft-vs-hard routing error as the temperature grows.
    Concentrate {
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Ascending temperatures; defaults to 1, 2, ..., 64.
        #[arg(long, value_delimiter = ',')]
        betas: Vec<f64>,
        /// Bound on the error at the largest temperature.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Weighted-update deviation from exact combination over a parameter grid.
    Uniqueness {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Number of routing keys for graphs of n variables.
    Concepts {
        #[arg(long)]
        n: usize,
        /// List every key instead of the count.
        #[arg(long)]
        list: bool,
    },
    /// Distinct behaviors of an FSM given as `states N` / `sym ID q0' ...` text.
    Fsm {
        /// Spec file; stdin when omitted.
        file: Option<PathBuf>,
    },
    /// Split k-ary gates of an annotated graph into two-input gates.
    Binarize {
        /// Graph file with `kfactor` lines; stdin when omitted.
        file: Option<PathBuf>,
        /// Also compare exact marginals before and after.
        #[arg(long)]
        check: bool,
    },
    /// Exact marginals of a graph, or a batch of two-variable posteriors.
    Oracle {
        /// Graph file; stdin when omitted.
        file: Option<PathBuf>,
        /// Emit COUNT random two-variable instances as `table4,posterior0,posterior1` CSV.
        #[arg(long, value_name = "COUNT")]
        batch: Option<usize>,
        #[arg(long, default_value_t = ORACLE_TABLE_RANGE.0)]
        low: f64,
        #[arg(long, default_value_t = ORACLE_TABLE_RANGE.1)]
        high: f64,
    },
}

/// A rendered report and whether its checks passed.
struct Report {
    body: String,
    passed: bool,
}

fn read_input(file: Option<&Path>) -> Result<String> {
    match file {
        Some(path) => {
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
        }
        None => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .context("reading stdin")?;
            Ok(s)
        }
    }
}

fn run(cli: &Cli) -> Result<Report> {
    let c = &cli.common;
    let md = c.format == Format::Md;
    let report = match &cli.command {
        Command::Loopy {
            trials,
            structures,
            max_iters,
            tol,
            damping,
            min_rate,
            max_kl,
            max_mae,
        } => {
            let kinds = if structures.is_empty() {
                StructureKind::LOOPY.to_vec()
            } else {
                structures
                    .iter()
                    .map(|s| StructureKind::parse(s))
                    .collect::<bplab_core::Result<Vec<_>>>()?
            };
            let opts = ConvergenceOptions {
                max_iters: *max_iters,
                tol: *tol,
                damping: *damping,
                ..ConvergenceOptions::default()
            };
            let suite = run_loopy_suite(&kinds, *trials, c.seed, &opts, c.jobs)?;
            Report {
                body: if md {
                    suite.to_markdown()
                } else {
                    suite.to_csv()
                },
                passed: suite.meets(*min_rate, *max_kl, *max_mae),
            }
        }
        Command::Tree {
            count,
            max_vars,
            tol,
        } => {
            let r = run_tree_suite(*count, c.seed, *max_vars, c.jobs)?;
            let passed = r.passes(*tol);
            let body = if md {
                let slow = r.records.iter().filter(|t| !t.within_sweeps()).count();
                format!(
                    "| Trees | Max deviation | Over diameter+1 sweeps | Pass (tol {tol:e}) |\n|---|---|---|---|\n| {} | {:e} | {slow} | {passed} |\n",
                    r.records.len(),
                    r.max_deviation()
                )
            } else {
                r.to_csv()
            };
            Report { body, passed }
        }
        Command::Equiv {
            count,
            mode,
            beta,
            tol,
        } => {
            let r = run_equivalence_corpus(*count, c.seed, (*mode).into(), *beta, c.jobs)?;
            Report {
                body: if md { r.summary() } else { r.to_csv() },
                passed: r.all_within(*tol),
            }
        }
        Command::Concentrate { count, betas, tol } => {
            let betas = if betas.is_empty() {
                (1..=64).map(f64::from).collect()
            } else {
                betas.clone()
            };
            let corpus = build_corpus(*count, c.seed, 2, 8)?;
            let curve = run_concentration_curve(&betas, &corpus, c.jobs)?;
            let last = curve.last().map_or(0.0, |p| p.1);
            let passed = is_nonincreasing(&curve) && last < *tol;
            let body = if md {
                let mut out = String::from("| beta | routing error |\n|---|---|\n");
                for (b, e) in &curve {
                    let _ = writeln!(out, "| {b} | {e:e} |");
                }
                out
            } else {
                concentration_csv(&curve)
            };
            Report { body, passed }
        }
        Command::Uniqueness { samples } => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let r = uniqueness_probe(&UniquenessGrid::default(), *samples, &mut rng)?;
            let passed = r.points.iter().all(|(p, d)| {
                if *p == FfnParams::BP {
                    *d <= 1e-15
                } else {
                    *d > 1e-4
                }
            });
            let mut body = if md {
                String::from("| w0 | w1 | b | max deviation |\n|---|---|---|---|\n")
            } else {
                String::from("w0,w1,b,max_deviation\n")
            };
            for (p, d) in &r.points {
                let _ = if md {
                    writeln!(body, "| {} | {} | {} | {d:e} |", p.w0, p.w1, p.b)
                } else {
                    writeln!(body, "{},{},{},{d}", p.w0, p.w1, p.b)
                };
            }
            Report { body, passed }
        }
        Command::Concepts { n, list } => {
            if *n == 0 {
                bail!("--n must be at least 1");
            }
            let body = if *list {
                let mut out = String::from("node_type,own_index,nbr_index\n");
                for k in enumerate_routing_keys(*n) {
                    let t = format!("{:?}", k.node_type).to_lowercase();
                    let _ = writeln!(out, "{t},{},{}", k.own_index, k.nbr_index);
                }
                out
            } else {
                format!("{}\n", routing_key_count(*n))
            };
            Report { body, passed: true }
        }
        Command::Fsm { file } => {
            let spec = FsmSpec::parse(&read_input(file.as_deref())?)?;
            let classes = fsm_behavior_classes(&spec);
            let bound = behavior_bound(spec.n_states());
            Report {
                body: format!(
                    "states {}\nsymbols {}\nclasses {classes}\nbound {bound}\n",
                    spec.n_states(),
                    spec.symbols().len()
                ),
                passed: classes <= bound,
            }
        }
        Command::Binarize { file, check } => {
            let g = AnnotatedGraph::parse(&read_input(file.as_deref())?)?;
            let b = binarize_graph(&g)?;
            let mut body = b.graph.serialize();
            let mut passed = true;
            if *check {
                let before = annotated_exact_marginals(&g)?.marginals;
                let after = annotated_exact_marginals(&b.graph)?.marginals;
                let dev = before
                    .iter()
                    .zip(&after)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                passed = dev <= 1e-12;
                let _ = writeln!(body, "# max marginal deviation {dev:e}");
            }
            Report { body, passed }
        }
        Command::Oracle {
            file,
            batch,
            low,
            high,
        } => {
            if let Some(count) = batch {
                Report {
                    body: oracle_csv(&oracle_batch(*count, c.seed, *low, *high)?),
                    passed: true,
                }
            } else {
                let g = FactorGraph::parse(&read_input(file.as_deref())?)?;
                let m = exact_marginals(&g)?;
                let mut body = String::from("var,marginal\n");
                for (v, p) in m.marginals.iter().enumerate() {
                    let _ = writeln!(body, "{v},{p}");
                }
                let _ = writeln!(body, "# partition {}", m.partition_z);
                Report { body, passed: true }
            }
        }
    };
    Ok(report)
}

fn main() -> ExitCode {
    // Clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let written = match &cli.common.output {
                Some(path) => fs::write(path, &report.body)
                    .with_context(|| format!("writing {}", path.display())),
                None => {
                    print!("{}", report.body);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("check failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
