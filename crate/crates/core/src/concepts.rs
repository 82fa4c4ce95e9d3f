//! Finite-concept accounting: the routing keys that fix attention behavior
//! and the behavior classes of finite-state machines.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{parse_count, parse_header, strip_comment};
use crate::transformer::{attention_weights, Layout, TokenMatrix, TransformerWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeType {
    Variable,
    Factor,
}

impl NodeType {
    /// Encoded value of the node-type dimension.
    pub fn code(self) -> f64 {
        match self {
            NodeType::Variable => 0.0,
            NodeType::Factor => 1.0,
        }
    }

    pub fn from_code(v: f64) -> Result<Self> {
        if v == 0.0 {
            Ok(NodeType::Variable)
        } else if v == 1.0 {
            Ok(NodeType::Factor)
        } else {
            Err(Error::Domain(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoutingKey {
    pub node_type: NodeType,
    pub own_index: usize,
    pub nbr_index: usize,
}

pub fn routing_key_count(n: usize) -> usize {
    2 * n * n
}

/// Every routing key for graphs of `n` variables, in lexicographic order.
pub fn enumerate_routing_keys(n: usize) -> Vec<RoutingKey> {
    let mut out = Vec::with_capacity(routing_key_count(n));
    for node_type in [NodeType::Variable, NodeType::Factor] {
        for own_index in 0..n {
            for nbr_index in 0..n {
                out.push(RoutingKey {
                    node_type,
                    own_index,
                    nbr_index,
                });
            }
        }
    }
    out
}

/// Routing key of token `t` as seen by head `h`; `None` when the token has
/// no own index or slot `h` is padded.
pub fn token_routing_key(x: &TokenMatrix, t: usize, h: usize) -> Result<Option<RoutingKey>> {
    let node_type = NodeType::from_code(x.token(t)[Layout::NODE_TYPE])?;
    Ok(match (x.own_index(t), x.nbr_index(t, h)) {
        (Some(own_index), Some(nbr_index)) => Some(RoutingKey {
            node_type,
            own_index,
            nbr_index,
        }),
        _ => None,
    })
}

/// Whether tokens that share a routing key receive identical attention rows
/// (within 1e-12) in every head. Keys are taken per head, since head `h`
/// routes on neighbor slot `h`.
pub fn routing_invariance(x: &TokenMatrix, w: &TransformerWeights) -> Result<bool> {
    let mut shared = false;
    let mut invariant = true;
    for h in 0..2 {
        let rows = attention_weights(x, &w.heads[h], w.mode, w.temperature);
        let mut groups: BTreeMap<RoutingKey, Vec<usize>> = BTreeMap::new();
        for t in 0..x.num_tokens() {
            if let Some(key) = token_routing_key(x, t, h)? {
                groups.entry(key).or_default().push(t);
            }
        }
        for members in groups.values().filter(|m| m.len() > 1) {
            shared = true;
            let first = &rows[members[0]];
            for &t in &members[1..] {
                let same = first
                    .iter()
                    .zip(&rows[t])
                    .all(|(a, b)| (a - b).abs() <= 1e-12);
                invariant &= same;
            }
        }
    }
    if !shared {
        return Err(Error::NoSharedKey);
    }
    Ok(invariant)
}

/// A deterministic finite-state transition table over opaque symbols.
#[derive(Debug, Clone)]
pub struct FsmSpec {
    n_states: usize,
    symbols: Vec<String>,
    ids: HashSet<String>,
    /// `delta[s][q]`: successor of state `q` under symbol `s`.
    delta: Vec<Vec<usize>>,
}

impl FsmSpec {
    pub fn new(n_states: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidArgument(
                "an FSM needs at least one state".into(),
            ));
        }
        Ok(FsmSpec {
            n_states,
            symbols: Vec::new(),
            ids: HashSet::new(),
            delta: Vec::new(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn behavior(&self, symbol: usize) -> &[usize] {
        &self.delta[symbol]
    }

    pub fn add_symbol(&mut self, id: impl Into<String>, row: Vec<usize>) -> Result<()> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("bad symbol id {id:?}")));
        }
        if self.ids.contains(&id) {
            return Err(Error::InvalidArgument(format!("duplicate symbol {id}")));
        }
        if row.len() != self.n_states {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: self.n_states,
            });
        }
        if let Some(&q) = row.iter().find(|&&q| q >= self.n_states) {
            return Err(Error::IndexOutOfRange {
                index: q,
                num_vars: self.n_states,
            });
        }
        self.ids.insert(id.clone());
        self.symbols.push(id);
        self.delta.push(row);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.lines().all(|l| strip_comment(l).is_empty()) {
            return Err(Error::EmptyInput);
        }
        let (n, lines) = parse_header(text, "states")?;
        let header_line = text
            .lines()
            .position(|l| !strip_comment(l).is_empty())
            .map_or(1, |i| i + 1);
        let mut spec = FsmSpec::new(n).map_err(|e| Error::AtLine {
            line: header_line,
            source: Box::new(e),
        })?;
        for (line, body) in lines {
            let mut toks = body.split_whitespace();
            if toks.next() != Some("sym") {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `sym ID q0' ...`, found {body:?}"),
                });
            }
            let id = toks.next().ok_or_else(|| Error::Parse {
                line,
                message: "missing symbol id".into(),
            })?;
            let row = toks
                .map(|t| parse_count(Some(t), line, "state"))
                .collect::<Result<Vec<_>>>()?;
            spec.add_symbol(id, row).map_err(|e| Error::AtLine {
                line,
                source: Box::new(e),
            })?;
        }
        Ok(spec)
    }

    pub fn serialize(&self) -> String {
        self.to_string()
    }
}

impl PartialEq for FsmSpec {
    fn eq(&self, other: &Self) -> bool {
        self.n_states == other.n_states
            && self.symbols == other.symbols
            && self.delta == other.delta
    }
}

impl Eq for FsmSpec {}

impl fmt::Display for FsmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "states {}", self.n_states)?;
        for (id, row) in self.symbols.iter().zip(&self.delta) {
            write!(f, "sym {id}")?;
            for q in row {
                write!(f, " {q}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for FsmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FsmSpec::parse(s)
    }
}

/// Number of distinct state maps induced by the symbols.
pub fn fsm_behavior_classes(spec: &FsmSpec) -> usize {
    spec.delta
        .iter()
        .map(Vec::as_slice)
        .collect::<HashSet<_>>()
        .len()
}

/// `n^n`, saturating.
pub fn behavior_bound(n: usize) -> usize {
    let n32 = u32::try_from(n).unwrap_or(u32::MAX);
    n.checked_pow(n32).unwrap_or(usize::MAX)
}
