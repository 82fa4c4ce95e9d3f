//! Seeded experiment suites: loopy BP against the oracle, tree exactness,
//! the round-equivalence corpus, the softmax concentration curve, and the
//! two-variable oracle batch consumed by external training code.
//!
//! Every trial draws from its own generator seeded by [`derive_seed`], so
//! results do not depend on the number of worker threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bp::{sumproduct_run, ConvergenceOptions};
use crate::equivalence::{check_round, check_tree_exactness};
use crate::error::{Error, Result};
use crate::graph::{generate, random_graph, BeliefState, FactorGraph, StructureKind};
use crate::oracle::{exact_marginals, kl_divergence, mean_abs_error};
use crate::transformer::{
    attention_scores, build_bp_weights, encode_bp_state, weights_from_scores, AttentionMode, Layout,
};

/// Factor-table entry range of the loopy study.
pub const LOOPY_TABLE_RANGE: (f64, f64) = (0.1, 1.0);
/// Factor-table entry range of the two-variable oracle batch.
pub const ORACLE_TABLE_RANGE: (f64, f64) = (0.05, 1.0);
/// Pass thresholds reported by the equivalence corpus.
pub const EQUIVALENCE_TIERS: [f64; 3] = [1e-12, 1e-9, 1e-6];

const TREE_STREAM: u64 = 0x7472_6565;
const CORPUS_STREAM: u64 = 0x6571_7576;
const ORACLE_STREAM: u64 = 0x6f72_636c;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` in stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

/// Runs `f(0..count)` on a pool of `jobs` threads (0 picks the default) and
/// returns results in index order.
fn run_indexed<T, F>(count: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    // Indexed parallel collect keeps input order regardless of completion order.
    pool.install(|| (0..count).into_par_iter().map(&f).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub structure: StructureKind,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub kl: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureSummary {
    pub structure: StructureKind,
    pub trials: usize,
    pub converged: usize,
    /// Means over converged trials; `None` when no trial converged.
    pub avg_kl: Option<f64>,
    pub avg_mae: Option<f64>,
}

impl StructureSummary {
    fn from_records(structure: StructureKind, records: &[&TrialRecord]) -> Self {
        let ok: Vec<_> = records.iter().filter(|r| r.converged).collect();
        let mean = |f: fn(&TrialRecord) -> f64| {
            (!ok.is_empty()).then(|| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64)
        };
        StructureSummary {
            structure,
            trials: records.len(),
            converged: ok.len(),
            avg_kl: mean(|r| r.kl),
            avg_mae: mean(|r| r.mae),
        }
    }

    pub fn convergence_rate(&self) -> f64 {
        if self.trials == 0 {
            1.0
        } else {
            self.converged as f64 / self.trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSummary {
    pub master_seed: u64,
    pub records: Vec<TrialRecord>,
    pub structures: Vec<StructureSummary>,
}

pub const LOOPY_CSV_HEADER: &str = "structure,seed,converged,iterations,kl,mae";

impl SuiteSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOOPY_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.structure.name(),
                r.seed,
                r.converged,
                r.iterations,
                r.kl,
                r.mae
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Experiment | Vars | Loops | Converged | Avg KL | Avg MAE |\n|---|---|---|---|---|---|\n",
        );
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
        for s in &self.structures {
            let loops = s
                .structure
                .edges()
                .map_or(0, |e| e.len() + 1 - s.structure.num_vars());
            let _ = writeln!(
                out,
                "| {} | {} | {} | {}/{} | {} | {} |",
                s.structure.label(),
                s.structure.num_vars(),
                loops,
                s.converged,
                s.trials,
                fmt(s.avg_kl),
                fmt(s.avg_mae)
            );
        }
        out
    }

    /// Whether every structure meets the convergence, KL and MAE bounds.
    pub fn meets(&self, min_rate: f64, max_kl: f64, max_mae: f64) -> bool {
        self.structures.iter().all(|s| {
            s.convergence_rate() >= min_rate
                && s.avg_kl.map_or(s.trials == 0, |v| v <= max_kl)
                && s.avg_mae.map_or(s.trials == 0, |v| v <= max_mae)
        })
    }
}

fn loopy_trial(kind: StructureKind, seed: u64, opts: &ConvergenceOptions) -> Result<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = generate(kind, &mut rng, LOOPY_TABLE_RANGE.0, LOOPY_TABLE_RANGE.1)?;
    let bp = sumproduct_run(&g, opts)?;
    let exact = exact_marginals(&g)?.marginals;
    let approx = bp.marginal_values();
    Ok(TrialRecord {
        structure: kind,
        seed,
        converged: bp.converged,
        iterations: bp.iterations,
        kl: kl_divergence(&exact, &approx)?,
        mae: mean_abs_error(&exact, &approx)?,
    })
}

/// Generates `trials` random instances of each structure, runs sum-product
/// to convergence and scores it against the oracle. Non-converged trials
/// count against the convergence rate but not the averages.
pub fn run_loopy_suite(
    kinds: &[StructureKind],
    trials: usize,
    seed: u64,
    opts: &ConvergenceOptions,
    jobs: usize,
) -> Result<SuiteSummary> {
    opts.validate()?;
    let total = kinds.len() * trials;
    let records = run_indexed(total, jobs, |i| {
        let kind = kinds[i / trials];
        let trial = (i % trials) as u64;
        loopy_trial(kind, derive_seed(seed, kind.id(), trial), opts)
    })?;
    let structures = kinds
        .iter()
        .map(|&k| {
            let rs: Vec<_> = records.iter().filter(|r| r.structure == k).collect();
            StructureSummary::from_records(k, &rs)
        })
        .collect();
    Ok(SuiteSummary {
        master_seed: seed,
        records,
        structures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeRecord {
    pub seed: u64,
    pub num_vars: usize,
    pub diameter: usize,
    /// Sum-product after `diameter + 1` sweeps against the oracle.
    pub deviation: f64,
    pub iterations: usize,
    pub converged: bool,
    pub qbbn_deviation: f64,
    pub transformer_vs_qbbn: f64,
}

impl TreeRecord {
    pub fn within_sweeps(&self) -> bool {
        self.converged && self.iterations <= self.diameter + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSuiteReport {
    pub records: Vec<TreeRecord>,
}

impl TreeSuiteReport {
    pub fn max_deviation(&self) -> f64 {
        self.records.iter().map(|r| r.deviation).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.records
            .iter()
            .all(|r| r.deviation <= tol && r.within_sweeps())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "seed,num_vars,diameter,deviation,iterations,converged,qbbn_deviation,transformer_vs_qbbn\n",
        );
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.seed,
                r.num_vars,
                r.diameter,
                r.deviation,
                r.iterations,
                r.converged,
                r.qbbn_deviation,
                r.transformer_vs_qbbn
            );
        }
        out
    }
}

/// Random trees with `2..=max_vars` variables, scored by
/// [`check_tree_exactness`] at `diameter + 1` passes.
pub fn run_tree_suite(
    count: usize,
    seed: u64,
    max_vars: usize,
    jobs: usize,
) -> Result<TreeSuiteReport> {
    if max_vars < 2 {
        return Err(Error::InvalidArgument(
            "trees need at least 2 variables".into(),
        ));
    }
    let records = run_indexed(count, jobs, |i| {
        let trial_seed = derive_seed(seed, TREE_STREAM, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let n = rng.gen_range(2..=max_vars);
        let g = generate(
            StructureKind::RandomTree(n),
            &mut rng,
            LOOPY_TABLE_RANGE.0,
            LOOPY_TABLE_RANGE.1,
        )?;
        let diameter = g.diameter()?;
        let r = check_tree_exactness(&g, diameter + 1)?;
        Ok(TreeRecord {
            seed: trial_seed,
            num_vars: n,
            diameter,
            deviation: r.sumproduct_deviation,
            iterations: r.sumproduct_iterations,
            converged: r.sumproduct_converged,
            qbbn_deviation: r.qbbn_deviation,
            transformer_vs_qbbn: r.transformer_vs_qbbn,
        })
    })?;
    Ok(TreeSuiteReport { records })
}

/// A graph with a belief state to run one round on.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub seed: u64,
    pub graph: FactorGraph,
    pub state: BeliefState,
}

/// `count` random graphs with `min_vars..=max_vars` variables, edge
/// probability 1/2, and random beliefs in `(0.01, 0.99)`.
pub fn build_corpus(
    count: usize,
    seed: u64,
    min_vars: usize,
    max_vars: usize,
) -> Result<Vec<CorpusItem>> {
    if min_vars == 0 || min_vars > max_vars {
        return Err(Error::InvalidArgument(format!(
            "variable range [{min_vars}, {max_vars}] is empty"
        )));
    }
    (0..count)
        .map(|i| {
            let item_seed = derive_seed(seed, CORPUS_STREAM, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
            let n = rng.gen_range(min_vars..=max_vars);
            let graph = random_graph(&mut rng, n, 0.5, LOOPY_TABLE_RANGE.0, LOOPY_TABLE_RANGE.1);
            let beliefs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
            Ok(CorpusItem {
                seed: item_seed,
                graph,
                state: BeliefState::from_values(&beliefs)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceCorpusReport {
    pub mode: AttentionMode,
    pub beta: f64,
    /// `(seed, num_vars, deviation)` per instance.
    pub records: Vec<(u64, usize, f64)>,
    /// `(tolerance, instances passing)` per tier.
    pub tiers: Vec<(f64, usize)>,
}

impl EquivalenceCorpusReport {
    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn max_deviation(&self) -> f64 {
        self.records.iter().map(|r| r.2).fold(0.0, f64::max)
    }

    pub fn all_within(&self, tol: f64) -> bool {
        self.records.iter().all(|r| r.2 <= tol)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,num_vars,deviation\n");
        for (seed, n, d) in &self.records {
            let _ = writeln!(out, "{seed},{n},{d}");
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "mode={:?} beta={} count={} max_deviation={:e}\n",
            self.mode,
            self.beta,
            self.count(),
            self.max_deviation()
        );
        for (tol, n) in &self.tiers {
            let _ = writeln!(out, "tol {tol:e}: {n}/{}", self.count());
        }
        out
    }
}

/// One forward pass against one round on each of `count` random graphs
/// with 2 to 8 variables.
pub fn run_equivalence_corpus(
    count: usize,
    seed: u64,
    mode: AttentionMode,
    beta: f64,
    jobs: usize,
) -> Result<EquivalenceCorpusReport> {
    let corpus = build_corpus(count, seed, 2, 8)?;
    let records = run_indexed(corpus.len(), jobs, |i| {
        let item = &corpus[i];
        let n = item.graph.num_vars();
        let w = build_bp_weights(n).with_mode(mode, beta);
        let r = check_round(&item.graph, &item.state, &w, 0.0)?;
        Ok((item.seed, n, r.max_abs_deviation))
    })?;
    let tiers = EQUIVALENCE_TIERS
        .iter()
        .map(|&tol| (tol, records.iter().filter(|r| r.2 <= tol).count()))
        .collect();
    Ok(EquivalenceCorpusReport {
        mode,
        beta,
        records,
        tiers,
    })
}

/// Largest gap between soft and hard attention outputs over routed scratch
/// slots, for each temperature. Padded slots are gated out downstream and
/// are not counted.
pub fn routing_errors(item: &CorpusItem, betas: &[f64]) -> Vec<f64> {
    let x = encode_bp_state(&item.graph, &item.state);
    let w = build_bp_weights(item.graph.num_vars());
    let layout: Layout = x.layout();
    let mut worst = vec![0.0f64; betas.len()];
    for (h, head) in w.heads.iter().enumerate() {
        let scores = attention_scores(&x, head);
        let values: Vec<f64> = x
            .rows()
            .iter()
            .map(|r| head.wv.apply(r)[layout.scratch(h)])
            .collect();
        for (t, row) in scores.iter().enumerate() {
            if !x.slot_active(t, h) {
                continue;
            }
            let hard = weights_from_scores(row, AttentionMode::Hard, 0.0);
            let target = hard.iter().position(|&a| a == 1.0).expect("one-hot");
            for (slot, &beta) in worst.iter_mut().zip(betas) {
                // Soft minus hard output as Σ a_k (v_k - v_target): exact in
                // exact arithmetic since the soft weights sum to one, and free
                // of the cancellation in differencing the two outputs.
                let soft = weights_from_scores(row, AttentionMode::Soft, beta);
                let gap: f64 = soft
                    .iter()
                    .zip(&values)
                    .enumerate()
                    .filter(|&(k, _)| k != target)
                    .map(|(_, (a, v))| a * (v - values[target]))
                    .sum();
                *slot = slot.max(gap.abs());
            }
        }
    }
    worst
}

/// Maximum routing error over `corpus` for each temperature.
pub fn run_concentration_curve(
    betas: &[f64],
    corpus: &[CorpusItem],
    jobs: usize,
) -> Result<Vec<(f64, f64)>> {
    if betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) || betas.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidArgument(
            "temperatures must be positive and strictly ascending".into(),
        ));
    }
    let per_item = run_indexed(corpus.len(), jobs, |i| {
        Ok(routing_errors(&corpus[i], betas))
    })?;
    Ok(betas
        .iter()
        .enumerate()
        .map(|(j, &beta)| (beta, per_item.iter().map(|e| e[j]).fold(0.0, f64::max)))
        .collect())
}

pub fn concentration_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("beta,routing_error\n");
    for (b, e) in curve {
        let _ = writeln!(out, "{b},{e}");
    }
    out
}

/// Whether the curve never increases.
pub fn is_nonincreasing(curve: &[(f64, f64)]) -> bool {
    curve.windows(2).all(|w| w[1].1 <= w[0].1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    /// `f[x0][x1]` in the order f00, f01, f10, f11.
    pub table: [f64; 4],
    pub posterior: [f64; 2],
}

/// Exact posteriors of `count` random two-variable graphs.
pub fn oracle_batch(count: usize, seed: u64, low: f64, high: f64) -> Result<Vec<OracleRow>> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ORACLE_STREAM, i as u64));
            let g = generate(StructureKind::Chain2, &mut rng, low, high)?;
            let m = exact_marginals(&g)?.marginals;
            Ok(OracleRow {
                table: g.factors()[0].table.entries(),
                posterior: [m[0], m[1]],
            })
        })
        .collect()
}

pub const ORACLE_CSV_HEADER: &str = "table4,posterior0,posterior1";

/// One row per instance; the four table entries are space-separated in
/// the first column.
pub fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from(ORACLE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let t = r.table;
        let _ = writeln!(
            out,
            "{} {} {} {},{},{}",
            t[0], t[1], t[2], t[3], r.posterior[0], r.posterior[1]
        );
    }
    out
}
