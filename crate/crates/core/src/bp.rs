//! Belief propagation.
//!
//! Two variants live here:
//!
//! * [`qbbn_round`]: the simplified synchronous round. Every variable copies
//!   the current beliefs of its first two neighbors (canonical order,
//!   partner index ascending) into its two scratch slots, padding missing
//!   neighbors with the neutral 0.5, then replaces its belief with
//!   `slot0 ⊕ slot1`. Factor tables are not consulted. Variables with more
//!   than two neighbors only hear the first two; binarize first if every
//!   neighbor matters.
//! * [`sumproduct_run`]: textbook pairwise sum-product with a flat
//!   (parallel) schedule, exact on trees and the Bethe approximation on
//!   loopy graphs.

use crate::error::{Error, Result};
use crate::graph::{BeliefState, FactorGraph};
use crate::prob::{update_belief, weighted_update, FfnParams, Probability};

/// Fills every scratch slot from the pre-round beliefs.
fn gather(g: &FactorGraph, s: &BeliefState) -> Vec<[Probability; 2]> {
    assert_eq!(
        s.len(),
        g.num_vars(),
        "belief state sized for {} variables, graph has {}",
        s.len(),
        g.num_vars()
    );
    (0..g.num_vars())
        .map(|v| {
            g.gather_neighbors(v)
                .map(|nb| nb.map_or(Probability::HALF, |u| s.beliefs[u]))
        })
        .collect()
}

/// One synchronous gather/update round.
///
/// The returned state keeps the scratch slots that fed the update.
pub fn qbbn_round(g: &FactorGraph, s: &BeliefState) -> BeliefState {
    let scratch = gather(g, s);
    let beliefs = scratch.iter().map(|&[a, b]| update_belief(a, b)).collect();
    BeliefState { beliefs, scratch }
}

/// [`qbbn_round`] with a per-variable weighted update.
pub fn weighted_round(g: &FactorGraph, s: &BeliefState, params: &[FfnParams]) -> BeliefState {
    assert_eq!(params.len(), g.num_vars(), "one FfnParams per variable");
    let scratch = gather(g, s);
    let beliefs = scratch
        .iter()
        .zip(params)
        .map(|(&[a, b], &p)| weighted_update(a, b, p))
        .collect();
    BeliefState { beliefs, scratch }
}

/// Message update order. Only the flat schedule is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// All messages recomputed from the previous sweep's messages.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceOptions {
    pub max_iters: usize,
    /// Stop once the largest change in any normalized message is below this.
    pub tol: f64,
    /// Weight of the previous factor-to-variable message, in `[0, 1)`.
    pub damping: f64,
    pub schedule: Schedule,
    /// Renormalize messages to sum 1 after every update.
    pub normalize: bool,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            max_iters: 1000,
            tol: 1e-10,
            damping: 0.0,
            schedule: Schedule::Parallel,
            normalize: true,
        }
    }
}

impl ConvergenceOptions {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidArgument(format!(
                "damping must be in [0, 1), got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

type Msg = [f64; 2];

fn normalized(m: Msg) -> Msg {
    let s = m[0] + m[1];
    [m[0] / s, m[1] / s]
}

/// Directed messages on every (factor, endpoint) pair. Index `[f][0]`
/// concerns endpoint `a` of factor `f`, `[f][1]` endpoint `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    pub var_to_factor: Vec<[Msg; 2]>,
    pub factor_to_var: Vec<[Msg; 2]>,
}

impl MessageSet {
    pub fn uniform(num_factors: usize) -> Self {
        MessageSet {
            var_to_factor: vec![[[0.5; 2]; 2]; num_factors],
            factor_to_var: vec![[[0.5; 2]; 2]; num_factors],
        }
    }

    /// Normalized product of incoming factor-to-variable messages.
    pub fn marginals(&self, g: &FactorGraph) -> Vec<f64> {
        (0..g.num_vars())
            .map(|v| {
                let b = incoming_product(g, &self.factor_to_var, v, None);
                b[1] / (b[0] + b[1])
            })
            .collect()
    }
}

fn side_of(g: &FactorGraph, factor: usize, var: usize) -> usize {
    usize::from(g.factors()[factor].a != var)
}

/// Product of factor-to-variable messages into `var`, optionally skipping
/// one factor.
fn incoming_product(g: &FactorGraph, f2v: &[[Msg; 2]], var: usize, skip: Option<usize>) -> Msg {
    let mut acc = [1.0, 1.0];
    for inc in g.neighbors(var) {
        if Some(inc.factor) == skip {
            continue;
        }
        let m = f2v[inc.factor][side_of(g, inc.factor, var)];
        acc = [acc[0] * m[0], acc[1] * m[1]];
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    pub marginals: Vec<Probability>,
    pub iterations: usize,
    pub converged: bool,
    pub messages: MessageSet,
}

impl BpResult {
    pub fn marginal_values(&self) -> Vec<f64> {
        self.marginals.iter().map(|p| p.value()).collect()
    }
}

/// One parallel sweep: factor-to-variable messages from the previous
/// variable-to-factor messages, then variable-to-factor messages from the
/// new factor-to-variable ones. Returns the largest normalized change.
fn sweep(g: &FactorGraph, msgs: &mut MessageSet, opts: &ConvergenceOptions) -> f64 {
    let factors = g.factors();
    let mut delta: f64 = 0.0;

    let mut f2v = msgs.factor_to_var.clone();
    for (id, f) in factors.iter().enumerate() {
        for (side, target) in [f.a, f.b].into_iter().enumerate() {
            let table = f.table_from(target);
            let incoming = msgs.var_to_factor[id][1 - side];
            let mut m = [0.0; 2];
            for (xt, slot) in m.iter_mut().enumerate() {
                *slot = table.get(xt, 0) * incoming[0] + table.get(xt, 1) * incoming[1];
            }
            if opts.normalize {
                m = normalized(m);
            }
            if opts.damping > 0.0 {
                let old = msgs.factor_to_var[id][side];
                m = [
                    (1.0 - opts.damping) * m[0] + opts.damping * old[0],
                    (1.0 - opts.damping) * m[1] + opts.damping * old[1],
                ];
            }
            let (a, b) = (normalized(m), normalized(msgs.factor_to_var[id][side]));
            delta = delta.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            f2v[id][side] = m;
        }
    }

    let mut v2f = msgs.var_to_factor.clone();
    for (id, f) in factors.iter().enumerate() {
        for (side, var) in [f.a, f.b].into_iter().enumerate() {
            let mut m = incoming_product(g, &f2v, var, Some(id));
            if opts.normalize {
                m = normalized(m);
            }
            let (a, b) = (normalized(m), normalized(msgs.var_to_factor[id][side]));
            delta = delta.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            v2f[id][side] = m;
        }
    }

    msgs.factor_to_var = f2v;
    msgs.var_to_factor = v2f;
    delta
}

/// Runs sum-product from uniform messages until the largest message change
/// drops below `opts.tol` or `opts.max_iters` sweeps have run.
///
/// `iterations` counts sweeps including the one that detected convergence.
pub fn sumproduct_run(g: &FactorGraph, opts: &ConvergenceOptions) -> Result<BpResult> {
    opts.validate()?;
    let mut messages = MessageSet::uniform(g.factors().len());
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        iterations += 1;
        if sweep(g, &mut messages, opts) < opts.tol {
            converged = true;
            break;
        }
    }
    let marginals = messages
        .marginals(g)
        .into_iter()
        .map(Probability::saturating)
        .collect::<Result<_>>()?;
    Ok(BpResult {
        marginals,
        iterations,
        converged,
        messages,
    })
}

/// Exactly `sweeps` parallel sweeps from uniform messages, with no
/// convergence test. On a tree, `diameter` sweeps give exact marginals.
pub fn sumproduct_sweeps(
    g: &FactorGraph,
    sweeps: usize,
    opts: &ConvergenceOptions,
) -> Result<Vec<f64>> {
    opts.validate()?;
    let mut messages = MessageSet::uniform(g.factors().len());
    for _ in 0..sweeps {
        sweep(g, &mut messages, opts);
    }
    Ok(messages.marginals(g))
}
