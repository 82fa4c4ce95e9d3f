//! Reduction of k-ary AND / OR structure to two-input steps.
//!
//! A k-input combination is rewritten as a balanced binary tree of `k - 1`
//! pairwise steps with depth `⌈log2 k⌉`. For OR the pairwise step is `⊕`,
//! whose associativity makes any bracketing exact. For AND the pairwise step
//! is boolean conjunction at the certainty limits `{ε, 1 - ε}`.
//!
//! At graph level, a `kfactor` line declares a deterministic gate
//! `OUT = OP(IN1, …, INk)`; [`binarize_graph`] splits each gate with more than
//! two inputs into a tree of two-input gates over fresh intermediate
//! variables.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{parse_count, parse_factor_line, parse_header, Factor, FactorGraph};
use crate::oracle::{enumerate, ExactMarginals};
use crate::prob::{update_belief, Probability, PROB_EPS};

/// Largest gate arity [`binarize_graph`] accepts.
pub const MAX_ARITY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
}

impl GateKind {
    fn as_str(self) -> &'static str {
        match self {
            GateKind::And => "and",
            GateKind::Or => "or",
        }
    }

    /// Boolean value of the gate over packed input bits.
    fn eval(self, inputs: impl Iterator<Item = bool>) -> bool {
        let mut inputs = inputs;
        match self {
            GateKind::And => inputs.all(|b| b),
            GateKind::Or => inputs.any(|b| b),
        }
    }
}

/// `⌈log2 k⌉` for `k ≥ 1`.
pub fn ceil_log2(k: usize) -> usize {
    assert!(k >= 1, "ceil_log2 of zero");
    (usize::BITS - (k - 1).leading_zeros()) as usize
}

/// Layers needed for exact BP on a graph of reasoning depth `depth` once
/// every factor of arity up to `max_arity` is binarized.
pub fn layers_required(depth: usize, max_arity: usize) -> usize {
    depth * ceil_log2(max_arity.max(1))
}

/// One pairwise combine. Operands index a combined space: `0..k` are the
/// inputs, `k + i` is the output of step `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombineStep {
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarizedPlan {
    pub arity: usize,
    pub steps: Vec<CombineStep>,
    pub depth: usize,
}

impl BinarizedPlan {
    /// Balanced bracketing: adjacent operands are paired level by level, an
    /// odd operand out is carried to the next level.
    pub fn balanced(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::EmptyInput);
        }
        let mut steps = Vec::with_capacity(k - 1);
        let mut level: Vec<usize> = (0..k).collect();
        let mut depth = 0;
        while level.len() > 1 {
            depth += 1;
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            for pair in level.chunks(2) {
                match *pair {
                    [left, right] => {
                        steps.push(CombineStep { left, right });
                        next.push(k + steps.len() - 1);
                    }
                    [carry] => next.push(carry),
                    _ => unreachable!(),
                }
            }
            level = next;
        }
        Ok(BinarizedPlan {
            arity: k,
            steps,
            depth,
        })
    }

    /// `((x0 ∘ x1) ∘ x2) ∘ …`, depth `k - 1`.
    pub fn left_fold(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::EmptyInput);
        }
        let steps = (1..k)
            .map(|i| CombineStep {
                left: if i == 1 { 0 } else { k + i - 2 },
                right: i,
            })
            .collect();
        Ok(BinarizedPlan {
            arity: k,
            steps,
            depth: k - 1,
        })
    }

    /// Operand id holding the final result.
    pub fn root(&self) -> usize {
        if self.steps.is_empty() {
            0
        } else {
            self.arity + self.steps.len() - 1
        }
    }

    /// Runs the plan with `op` as the pairwise combine.
    pub fn evaluate<T: Copy>(&self, inputs: &[T], op: impl Fn(T, T) -> T) -> Result<T> {
        if inputs.len() != self.arity {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: self.arity,
            });
        }
        let mut values: Vec<T> = inputs.to_vec();
        for step in &self.steps {
            values.push(op(values[step.left], values[step.right]));
        }
        Ok(values[self.root()])
    }
}

/// Combines k independent messages by a balanced tree of `⊕` steps.
pub fn binarize_or(inputs: &[Probability]) -> Result<(BinarizedPlan, Probability)> {
    let plan = BinarizedPlan::balanced(inputs.len())?;
    let combined = plan.evaluate(inputs, update_belief)?;
    Ok((plan, combined))
}

/// The certainty-limit encoding of a boolean.
pub fn certainty(b: bool) -> Probability {
    if b {
        Probability::saturating(1.0 - PROB_EPS).expect("finite")
    } else {
        Probability::saturating(PROB_EPS).expect("finite")
    }
}

/// Conjunction of two beliefs at the certainty limits.
///
/// Exact for inputs in `{ε, 1 - ε}`; for soft beliefs this returns the
/// minimum, which carries no exactness claim.
pub fn and_pair(a: Probability, b: Probability) -> Probability {
    if a <= b {
        a
    } else {
        b
    }
}

/// Combines k certainty-limit beliefs by a balanced tree of conjunctions.
pub fn binarize_and(inputs: &[Probability]) -> Result<(BinarizedPlan, Probability)> {
    let plan = BinarizedPlan::balanced(inputs.len())?;
    let combined = plan.evaluate(inputs, and_pair)?;
    Ok((plan, combined))
}

/// Deterministic gate `out = kind(inputs)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub out: usize,
    pub inputs: Vec<usize>,
    pub kind: GateKind,
}

/// A pairwise factor graph plus deterministic k-ary gates.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedGraph {
    pub pairwise: FactorGraph,
    pub gates: Vec<Gate>,
}

impl AnnotatedGraph {
    pub fn new(pairwise: FactorGraph, gates: Vec<Gate>) -> Result<Self> {
        let n = pairwise.num_vars();
        for g in &gates {
            if g.inputs.is_empty() {
                return Err(Error::InvalidGate(format!(
                    "gate on {} has no inputs",
                    g.out
                )));
            }
            for &index in std::iter::once(&g.out).chain(&g.inputs) {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, num_vars: n });
                }
            }
            if g.inputs.contains(&g.out) {
                return Err(Error::InvalidGate(format!(
                    "gate output {} is also one of its inputs",
                    g.out
                )));
            }
        }
        Ok(AnnotatedGraph { pairwise, gates })
    }

    pub fn num_vars(&self) -> usize {
        self.pairwise.num_vars()
    }

    pub fn max_arity(&self) -> usize {
        self.gates
            .iter()
            .map(|g| g.inputs.len())
            .max()
            .unwrap_or(2)
            .max(2)
    }

    /// Graph text plus `kfactor OUT IN1 … INk kind=or|and` lines.
    pub fn serialize(&self) -> String {
        let mut out = self.pairwise.serialize();
        for g in &self.gates {
            let _ = write!(out, "kfactor {}", g.out);
            for i in &g.inputs {
                let _ = write!(out, " {i}");
            }
            let _ = writeln!(out, " kind={}", g.kind.as_str());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (n, lines) = parse_header(text, "vars")?;
        let mut factors: Vec<Factor> = Vec::new();
        let mut gates = Vec::new();
        for (line, body) in lines {
            let mut toks = body.split_whitespace();
            match toks.next() {
                Some("factor") => factors.push(parse_factor_line(toks, line)?),
                Some("kfactor") => {
                    let toks: Vec<&str> = toks.collect();
                    let (kind_tok, rest) = toks.split_last().ok_or(Error::Parse {
                        line,
                        message: "kfactor: missing output and inputs".into(),
                    })?;
                    let kind = match *kind_tok {
                        "kind=or" => GateKind::Or,
                        "kind=and" => GateKind::And,
                        other => {
                            return Err(Error::Parse {
                                line,
                                message: format!("kfactor: expected kind=or|and, found {other:?}"),
                            })
                        }
                    };
                    let mut it = rest.iter().copied();
                    let out = parse_count(it.next(), line, "gate output index")?;
                    let inputs = it
                        .map(|t| parse_count(Some(t), line, "gate input index"))
                        .collect::<Result<Vec<_>>>()?;
                    let gate = Gate { out, inputs, kind };
                    // Validate in isolation so the error carries this line.
                    AnnotatedGraph::new(FactorGraph::build(n, vec![])?, vec![gate.clone()])
                        .map_err(|e| Error::AtLine {
                            line,
                            source: Box::new(e),
                        })?;
                    gates.push(gate);
                }
                Some(other) => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown directive {other:?}"),
                    })
                }
                None => unreachable!("blank lines are filtered"),
            }
        }
        AnnotatedGraph::new(FactorGraph::build(n, factors)?, gates)
    }
}

/// Exact marginals with gates as 0/1 constraint factors.
pub fn annotated_exact_marginals(g: &AnnotatedGraph) -> Result<ExactMarginals> {
    let factors = g.pairwise.factors();
    enumerate(g.num_vars(), |x| {
        let bit = |v: usize| x >> v & 1 == 1;
        for gate in &g.gates {
            if gate.kind.eval(gate.inputs.iter().map(|&i| bit(i))) != bit(gate.out) {
                return 0.0;
            }
        }
        factors
            .iter()
            .map(|f| f.table.get(usize::from(bit(f.a)), usize::from(bit(f.b))))
            .product()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarizedGraph {
    /// Every gate has at most two inputs.
    pub graph: AnnotatedGraph,
    /// Variables `0..original_vars` keep their indices.
    pub original_vars: usize,
    /// Fresh variables, in creation order.
    pub intermediates: Vec<usize>,
    /// Tree depth per original gate.
    pub gate_depths: Vec<usize>,
}

/// Splits every gate with more than two inputs into a balanced tree of
/// two-input gates. Original variable indices are unchanged.
pub fn binarize_graph(g: &AnnotatedGraph) -> Result<BinarizedGraph> {
    let original_vars = g.num_vars();
    let mut next_var = original_vars;
    let mut intermediates = Vec::new();
    let mut gates = Vec::new();
    let mut gate_depths = Vec::with_capacity(g.gates.len());

    for gate in &g.gates {
        let k = gate.inputs.len();
        if k > MAX_ARITY {
            return Err(Error::ArityTooLarge {
                arity: k,
                limit: MAX_ARITY,
            });
        }
        let plan = BinarizedPlan::balanced(k)?;
        gate_depths.push(plan.depth);
        if k <= 2 {
            gates.push(gate.clone());
            continue;
        }
        // Operand id -> variable index.
        let mut var_of: Vec<usize> = gate.inputs.clone();
        let last = plan.steps.len() - 1;
        for (i, step) in plan.steps.iter().enumerate() {
            let out = if i == last {
                gate.out
            } else {
                let v = next_var;
                next_var += 1;
                intermediates.push(v);
                v
            };
            gates.push(Gate {
                out,
                inputs: vec![var_of[step.left], var_of[step.right]],
                kind: gate.kind,
            });
            var_of.push(out);
        }
    }

    let pairwise = FactorGraph::build(next_var, g.pairwise.factors().to_vec())?;
    Ok(BinarizedGraph {
        graph: AnnotatedGraph::new(pairwise, gates)?,
        original_vars,
        intermediates,
        gate_depths,
    })
}
