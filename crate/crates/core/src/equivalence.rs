//! Numerical checks that the constructed layer is a belief-propagation
//! round: per-round agreement, tree exactness over repeated passes, the
//! implicit graph realized by arbitrary weights, and a probe showing that
//! only `(w0, w1, b) = (1, 1, 0)` reproduces exact combination.

use rand::Rng;

use crate::bp::{qbbn_round, sumproduct_run, sumproduct_sweeps, ConvergenceOptions};
use crate::error::{Error, Result};
use crate::graph::{BeliefState, FactorGraph};
use crate::oracle::{exact_marginals, max_abs_error};
use crate::prob::{update_belief, weighted_update, FfnParams, Probability};
use crate::transformer::{
    attention_weights, decode_tf_state, encode_bp_state, forward_layers, forward_pass,
    AttentionMode, Layout, TokenMatrix, TransformerWeights,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub max_abs_deviation: f64,
    pub per_variable: Vec<f64>,
    pub mode: AttentionMode,
    pub beta: f64,
    pub tol: f64,
    pub passed: bool,
}

fn deviations(a: &BeliefState, b: &BeliefState) -> Vec<f64> {
    a.beliefs
        .iter()
        .zip(&b.beliefs)
        .map(|(x, y)| (x.value() - y.value()).abs())
        .collect()
}

/// Runs `layers` forward passes and the same number of two-slot rounds and
/// compares decoded beliefs.
pub fn check_layers(
    g: &FactorGraph,
    s: &BeliefState,
    w: &TransformerWeights,
    layers: usize,
    tol: f64,
) -> Result<EquivalenceReport> {
    let tf = decode_tf_state(&forward_layers(&encode_bp_state(g, s), w, layers)?)?;
    let mut bp = s.clone();
    for _ in 0..layers {
        bp = qbbn_round(g, &bp);
    }
    let per_variable = deviations(&tf, &bp);
    let max_abs_deviation = per_variable.iter().copied().fold(0.0, f64::max);
    Ok(EquivalenceReport {
        max_abs_deviation,
        per_variable,
        mode: w.mode,
        beta: w.temperature,
        tol,
        passed: max_abs_deviation <= tol,
    })
}

/// One forward pass against one round.
pub fn check_round(
    g: &FactorGraph,
    s: &BeliefState,
    w: &TransformerWeights,
    tol: f64,
) -> Result<EquivalenceReport> {
    check_layers(g, s, w, 1, tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeExactnessReport {
    pub diameter: usize,
    pub passes: usize,
    /// Brute-force marginals.
    pub exact: Vec<f64>,
    /// Sum-product after `passes` sweeps.
    pub sumproduct: Vec<f64>,
    pub sumproduct_deviation: f64,
    /// Sweeps until the convergence test fired, including the confirming one.
    pub sumproduct_iterations: usize,
    pub sumproduct_converged: bool,
    /// Beliefs after `passes` two-slot rounds from the fresh state.
    pub qbbn: Vec<f64>,
    pub qbbn_deviation: f64,
    /// Transformer after `passes` layers against the two-slot rounds.
    pub transformer_vs_qbbn: f64,
}

/// Compares both BP channels against the oracle on a tree.
///
/// Only the sum-product channel is expected to be exact; the two-slot round
/// ignores factor tables and is reported for information.
pub fn check_tree_exactness(tree: &FactorGraph, passes: usize) -> Result<TreeExactnessReport> {
    if !tree.is_tree() {
        return Err(Error::NotATree);
    }
    let diameter = tree.diameter()?;
    if passes < diameter {
        return Err(Error::InvalidArgument(format!(
            "{passes} passes is fewer than the tree diameter {diameter}"
        )));
    }
    let exact = exact_marginals(tree)?.marginals;
    let opts = ConvergenceOptions::default();
    let sumproduct = sumproduct_sweeps(tree, passes, &opts)?;
    let converged = sumproduct_run(tree, &opts)?;

    let fresh = BeliefState::fresh(tree.num_vars());
    let mut bp = fresh.clone();
    for _ in 0..passes {
        bp = qbbn_round(tree, &bp);
    }
    let w = crate::transformer::build_bp_weights(tree.num_vars());
    let tf = decode_tf_state(&forward_layers(&encode_bp_state(tree, &fresh), &w, passes)?)?;
    let qbbn = bp.belief_values();

    Ok(TreeExactnessReport {
        diameter,
        passes,
        sumproduct_deviation: max_abs_error(&sumproduct, &exact)?,
        qbbn_deviation: max_abs_error(&qbbn, &exact)?,
        transformer_vs_qbbn: max_abs_error(&tf.belief_values(), &qbbn)?,
        exact,
        sumproduct,
        sumproduct_iterations: converged.iterations,
        sumproduct_converged: converged.converged,
        qbbn,
    })
}

/// The weighted graph a layer realizes on a particular input: edge weights
/// are attention masses, node potentials are the FFN parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitGraph {
    /// `edges[h][j][k]`: attention mass query `j` places on key `k` in head `h`.
    pub edges: [Vec<Vec<f64>>; 2],
    /// `emitted[h][k]`: scratch-`h` component of head `h`'s value for token `k`.
    pub emitted: [Vec<f64>; 2],
    /// Scratch content already in the residual stream before attention.
    pub residual: [Vec<f64>; 2],
    /// Whether each token's slot `h` is routed.
    pub active: Vec<[bool; 2]>,
    pub params: Vec<FfnParams>,
}

impl ImplicitGraph {
    pub fn num_nodes(&self) -> usize {
        self.active.len()
    }

    /// Key with the largest mass for each query, per head.
    pub fn strongest_edges(&self, h: usize) -> Vec<usize> {
        self.edges[h]
            .iter()
            .map(|row| {
                let mut best = 0;
                for (k, &m) in row.iter().enumerate() {
                    if m > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

/// Reads the implicit graph off the attention distributions of `w` on `x`.
pub fn extract_implicit_graph(w: &TransformerWeights, x: &TokenMatrix) -> ImplicitGraph {
    let layout = x.layout();
    let head = |h: usize| attention_weights(x, &w.heads[h], w.mode, w.temperature);
    let emitted = |h: usize| -> Vec<f64> {
        x.rows()
            .iter()
            .map(|r| w.heads[h].wv.apply(r)[layout.scratch(h)])
            .collect()
    };
    let residual =
        |h: usize| -> Vec<f64> { x.rows().iter().map(|r| r[layout.scratch(h)]).collect() };
    ImplicitGraph {
        edges: [head(0), head(1)],
        emitted: [emitted(0), emitted(1)],
        residual: [residual(0), residual(1)],
        active: (0..x.num_tokens())
            .map(|t| [x.slot_active(t, 0), x.slot_active(t, 1)])
            .collect(),
        params: vec![w.ffn; x.num_tokens()],
    }
}

/// One weighted BP round on the implicit graph: each routed slot receives the
/// attention-weighted sum of emitted values, then each node applies its
/// weighted update.
pub fn implicit_round(ig: &ImplicitGraph) -> Result<Vec<Probability>> {
    (0..ig.num_nodes())
        .map(|j| {
            let mut slots = [Probability::HALF; 2];
            for (h, slot) in slots.iter_mut().enumerate() {
                if !ig.active[j][h] {
                    continue;
                }
                let msg = ig.residual[h][j]
                    + ig.edges[h][j]
                        .iter()
                        .zip(&ig.emitted[h])
                        .map(|(a, v)| a * v)
                        .sum::<f64>();
                if !(0.0..=1.0).contains(&msg) {
                    return Err(Error::Domain(msg));
                }
                *slot = Probability::saturating(msg)?;
            }
            Ok(weighted_update(slots[0], slots[1], ig.params[j]))
        })
        .collect()
}

/// Largest gap between the implicit-graph round and the actual forward pass.
pub fn implicit_round_trip_deviation(w: &TransformerWeights, x: &TokenMatrix) -> Result<f64> {
    let ig = extract_implicit_graph(w, x);
    let via_graph = implicit_round(&ig)?;
    let out = forward_pass(x, w)?;
    Ok(via_graph
        .iter()
        .enumerate()
        .map(|(t, p)| (p.value() - out.token(t)[Layout::BELIEF]).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessGrid {
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
    pub b: Vec<f64>,
}

impl Default for UniquenessGrid {
    fn default() -> Self {
        UniquenessGrid {
            w0: vec![0.9, 1.0, 1.1],
            w1: vec![0.9, 1.0, 1.1],
            b: vec![-0.1, 0.0, 0.1],
        }
    }
}

impl UniquenessGrid {
    pub fn points(&self) -> Vec<FfnParams> {
        let mut out = Vec::with_capacity(self.w0.len() * self.w1.len() * self.b.len());
        for &w0 in &self.w0 {
            for &w1 in &self.w1 {
                for &b in &self.b {
                    out.push(FfnParams::new(w0, w1, b));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    /// `(params, max |weighted_update - update_belief|)` per grid point.
    pub points: Vec<(FfnParams, f64)>,
    pub samples: usize,
}

impl UniquenessReport {
    pub fn deviation_at(&self, params: FfnParams) -> Option<f64> {
        self.points
            .iter()
            .find(|(p, _)| *p == params)
            .map(|(_, d)| *d)
    }
}

/// For each grid point, the worst disagreement with exact combination over
/// `samples` message pairs drawn uniformly from `(0, 1)`.
pub fn uniqueness_probe<R: Rng + ?Sized>(
    grid: &UniquenessGrid,
    samples: usize,
    rng: &mut R,
) -> Result<UniquenessReport> {
    let points = grid.points();
    if !points.contains(&FfnParams::BP) {
        return Err(Error::InvalidArgument(
            "uniqueness grid must contain (1, 1, 0)".into(),
        ));
    }
    let pairs: Vec<(Probability, Probability)> = (0..samples)
        .map(|_| {
            let a = rng.gen_range(0.0..1.0f64);
            let b = rng.gen_range(0.0..1.0f64);
            (
                Probability::saturating(a).expect("finite"),
                Probability::saturating(b).expect("finite"),
            )
        })
        .collect();
    let points = points
        .into_iter()
        .map(|params| {
            let worst = pairs
                .iter()
                .map(|&(m0, m1)| {
                    (weighted_update(m0, m1, params).value() - update_belief(m0, m1).value()).abs()
                })
                .fold(0.0, f64::max);
            (params, worst)
        })
        .collect();
    Ok(UniquenessReport { points, samples })
}
