//! Pairwise factor graphs over binary variables.
//!
//! Every factor joins exactly two distinct variables and carries a 2×2
//! table `[f00, f01, f10, f11]` indexed as `f[x_a][x_b]`. The joint is
//! `P(x) = (1/Z) ∏ f(x_a, x_b)`.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::prob::Probability;

/// Non-negative 2×2 factor table, row-major `[f00, f01, f10, f11]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorTable([f64; 4]);

impl FactorTable {
    pub const UNIFORM: FactorTable = FactorTable([1.0; 4]);

    pub fn new(entries: [f64; 4]) -> Result<Self> {
        for &e in &entries {
            if !e.is_finite() {
                return Err(Error::NonFinite(e));
            }
            if e < 0.0 {
                return Err(Error::NegativeWeight { value: e });
            }
        }
        if entries.iter().all(|&e| e == 0.0) {
            return Err(Error::ZeroTable);
        }
        Ok(FactorTable(entries))
    }

    #[inline]
    pub fn entries(&self) -> [f64; 4] {
        self.0
    }

    /// `f[xa][xb]`.
    #[inline]
    pub fn get(&self, xa: usize, xb: usize) -> f64 {
        self.0[2 * xa + xb]
    }

    /// The same factor seen from the other endpoint.
    pub fn transposed(&self) -> FactorTable {
        let [f00, f01, f10, f11] = self.0;
        FactorTable([f00, f10, f01, f11])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    pub a: usize,
    pub b: usize,
    pub table: FactorTable,
}

impl Factor {
    pub fn new(a: usize, b: usize, table: FactorTable) -> Self {
        Factor { a, b, table }
    }

    /// The factor's table oriented as `f[x_var][x_other]`.
    pub fn table_from(&self, var: usize) -> FactorTable {
        if var == self.a {
            self.table
        } else {
            self.table.transposed()
        }
    }

    pub fn other(&self, var: usize) -> usize {
        if var == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// One incident edge of a variable: the partner variable and the factor id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub partner: usize,
    pub factor: usize,
}

/// Validated pairwise factor graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    num_vars: usize,
    factors: Vec<Factor>,
    // Per variable, sorted by partner index ascending.
    adjacency: Vec<Vec<Incidence>>,
}

impl FactorGraph {
    pub fn build(num_vars: usize, factors: Vec<Factor>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(factors.len());
        let mut adjacency = vec![Vec::new(); num_vars];
        for (id, f) in factors.iter().enumerate() {
            for index in [f.a, f.b] {
                if index >= num_vars {
                    return Err(Error::IndexOutOfRange { index, num_vars });
                }
            }
            if f.a == f.b {
                return Err(Error::SelfLoop { a: f.a, b: f.b });
            }
            if !seen.insert((f.a.min(f.b), f.a.max(f.b))) {
                return Err(Error::DuplicateFactor { a: f.a, b: f.b });
            }
            adjacency[f.a].push(Incidence {
                partner: f.b,
                factor: id,
            });
            adjacency[f.b].push(Incidence {
                partner: f.a,
                factor: id,
            });
        }
        for list in &mut adjacency {
            list.sort_by_key(|inc| inc.partner);
        }
        Ok(FactorGraph {
            num_vars,
            factors,
            adjacency,
        })
    }

    /// Builds from `(a, b, [f00, f01, f10, f11])` triples.
    pub fn from_edges(num_vars: usize, edges: &[(usize, usize, [f64; 4])]) -> Result<Self> {
        let factors = edges
            .iter()
            .map(|&(a, b, t)| Ok(Factor::new(a, b, FactorTable::new(t)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::build(num_vars, factors)
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    #[inline]
    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Incident edges of `var` in canonical order (partner index ascending).
    #[inline]
    pub fn neighbors(&self, var: usize) -> &[Incidence] {
        &self.adjacency[var]
    }

    /// The first two neighbors in canonical order; these are the ones the
    /// two-slot gather reads.
    pub fn gather_neighbors(&self, var: usize) -> [Option<usize>; 2] {
        let adj = &self.adjacency[var];
        [
            adj.first().map(|i| i.partner),
            adj.get(1).map(|i| i.partner),
        ]
    }

    pub fn num_components(&self) -> usize {
        let mut seen = vec![false; self.num_vars];
        let mut count = 0;
        for start in 0..self.num_vars {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for inc in &self.adjacency[v] {
                    if !seen[inc.partner] {
                        seen[inc.partner] = true;
                        stack.push(inc.partner);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.num_components() <= 1
    }

    /// Number of independent cycles, `|E| - |V| + components`.
    pub fn num_loops(&self) -> usize {
        self.factors.len() + self.num_components() - self.num_vars
    }

    pub fn is_tree(&self) -> bool {
        self.num_vars > 0 && self.is_connected() && self.factors.len() == self.num_vars - 1
    }

    fn bfs_depths(&self, source: usize) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.num_vars];
        depth[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = depth[v].unwrap_or(0);
            for inc in &self.adjacency[v] {
                if depth[inc.partner].is_none() {
                    depth[inc.partner] = Some(d + 1);
                    queue.push_back(inc.partner);
                }
            }
        }
        depth
    }

    /// Longest shortest path between two variables, in variable hops.
    pub fn diameter(&self) -> Result<usize> {
        let mut best = 0;
        for v in 0..self.num_vars {
            for d in self.bfs_depths(v) {
                best = best.max(d.ok_or(Error::Disconnected)?);
            }
        }
        Ok(best)
    }

    /// Relabels variables: variable `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_vars {
            return Err(Error::LengthMismatch {
                left: perm.len(),
                right: self.num_vars,
            });
        }
        let factors = self
            .factors
            .iter()
            .map(|f| Factor::new(perm[f.a], perm[f.b], f.table))
            .collect();
        Self::build(self.num_vars, factors)
    }

    /// Text form: `vars N` followed by `factor A B f00 f01 f10 f11` lines.
    /// Reals use the shortest representation that parses back exactly.
    pub fn serialize(&self) -> String {
        let mut out = format!("vars {}\n", self.num_vars);
        for f in &self.factors {
            let [f00, f01, f10, f11] = f.table.entries();
            let _ = writeln!(
                out,
                "factor {} {} {} {} {} {}",
                f.a, f.b, f00, f01, f10, f11
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_graph(text)
    }
}

impl std::str::FromStr for FactorGraph {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_graph(s)
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
    .trim()
}

pub(crate) fn parse_count(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} {tok:?}"),
    })
}

/// Parses a `KEYWORD N` header and returns the count plus the remaining
/// numbered, comment-stripped, non-empty lines.
pub(crate) fn parse_header<'a>(
    text: &'a str,
    keyword: &str,
) -> Result<(usize, Vec<(usize, &'a str)>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l)))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: format!("missing `{keyword} N` header"),
    })?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some(keyword) {
        return Err(Error::Parse {
            line,
            message: format!("expected `{keyword} N`, found {header:?}"),
        });
    }
    let n = parse_count(toks.next(), line, "count")?;
    if let Some(extra) = toks.next() {
        return Err(Error::Parse {
            line,
            message: format!("unexpected token {extra:?}"),
        });
    }
    Ok((n, lines.collect()))
}

/// Parses a `factor A B f00 f01 f10 f11` line body (tokens after `factor`).
pub(crate) fn parse_factor_line<'a>(
    mut toks: impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<Factor> {
    let a = parse_count(toks.next(), line, "first variable index")?;
    let b = parse_count(toks.next(), line, "second variable index")?;
    let mut entries = [0.0; 4];
    for (k, slot) in entries.iter_mut().enumerate() {
        let tok = toks.next().ok_or_else(|| Error::Parse {
            line,
            message: format!("factor {a}-{b}: missing table entry {k} of 4"),
        })?;
        *slot = tok.parse().map_err(|_| Error::Parse {
            line,
            message: format!("factor {a}-{b}: invalid table entry {tok:?}"),
        })?;
    }
    if let Some(extra) = toks.next() {
        return Err(Error::Parse {
            line,
            message: format!("factor {a}-{b}: unexpected token {extra:?}"),
        });
    }
    let table = FactorTable::new(entries).map_err(|e| Error::AtLine {
        line,
        source: Box::new(e),
    })?;
    Ok(Factor::new(a, b, table))
}

fn parse_graph(text: &str) -> Result<FactorGraph> {
    let (n, lines) = parse_header(text, "vars")?;
    let mut factors: Vec<Factor> = Vec::with_capacity(lines.len());
    let mut seen = HashSet::new();
    for (line, body) in lines {
        let mut toks = body.split_whitespace();
        match toks.next() {
            Some("factor") => {
                let f = parse_factor_line(toks, line)?;
                let at_line = |e| Error::AtLine {
                    line,
                    source: Box::new(e),
                };
                if let Some(&index) = [f.a, f.b].iter().find(|&&i| i >= n) {
                    return Err(at_line(Error::IndexOutOfRange { index, num_vars: n }));
                }
                if f.a == f.b {
                    return Err(at_line(Error::SelfLoop { a: f.a, b: f.b }));
                }
                if !seen.insert((f.a.min(f.b), f.a.max(f.b))) {
                    return Err(at_line(Error::DuplicateFactor { a: f.a, b: f.b }));
                }
                factors.push(f);
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
    FactorGraph::build(n, factors)
}

/// Experiment topologies. Edge lists for the loopy structures are fixed
/// choices with the target variable and loop counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureKind {
    Triangle,
    Square,
    Dating,
    TwoLoops,
    QbbnChain,
    Chain2,
    RandomTree(usize),
}

impl StructureKind {
    /// The five loopy structures of the convergence study, in table order.
    pub const LOOPY: [StructureKind; 5] = [
        StructureKind::Triangle,
        StructureKind::Square,
        StructureKind::Dating,
        StructureKind::TwoLoops,
        StructureKind::QbbnChain,
    ];

    pub fn name(&self) -> String {
        match self {
            StructureKind::Triangle => "triangle".into(),
            StructureKind::Square => "square".into(),
            StructureKind::Dating => "dating".into(),
            StructureKind::TwoLoops => "two_loops".into(),
            StructureKind::QbbnChain => "qbbn_chain".into(),
            StructureKind::Chain2 => "chain2".into(),
            StructureKind::RandomTree(n) => format!("tree{n}"),
        }
    }

    pub fn label(&self) -> String {
        match self {
            StructureKind::Triangle => "Triangle".into(),
            StructureKind::Square => "Square".into(),
            StructureKind::Dating => "Dating graph".into(),
            StructureKind::TwoLoops => "Two loops".into(),
            StructureKind::QbbnChain => "QBBN chain".into(),
            StructureKind::Chain2 => "Two-variable chain".into(),
            StructureKind::RandomTree(n) => format!("Random tree ({n})"),
        }
    }

    /// Stable small integer used in seed derivation.
    pub fn id(&self) -> u64 {
        match self {
            StructureKind::Triangle => 0,
            StructureKind::Square => 1,
            StructureKind::Dating => 2,
            StructureKind::TwoLoops => 3,
            StructureKind::QbbnChain => 4,
            StructureKind::Chain2 => 5,
            StructureKind::RandomTree(n) => 1000 + *n as u64,
        }
    }

    pub fn num_vars(&self) -> usize {
        match self {
            StructureKind::Triangle => 3,
            StructureKind::Square => 4,
            StructureKind::Dating => 5,
            StructureKind::TwoLoops => 4,
            StructureKind::QbbnChain => 6,
            StructureKind::Chain2 => 2,
            StructureKind::RandomTree(n) => *n,
        }
    }

    /// Fixed edge list; `None` for random trees.
    pub fn edges(&self) -> Option<&'static [(usize, usize)]> {
        Some(match self {
            StructureKind::Triangle => &[(0, 1), (1, 2), (2, 0)],
            StructureKind::Square => &[(0, 1), (1, 2), (2, 3), (3, 0)],
            StructureKind::Dating => &[(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)],
            StructureKind::TwoLoops => &[(0, 1), (1, 2), (2, 0), (1, 3), (2, 3)],
            StructureKind::QbbnChain => &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)],
            StructureKind::Chain2 => &[(0, 1)],
            StructureKind::RandomTree(_) => return None,
        })
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "triangle" => StructureKind::Triangle,
            "square" => StructureKind::Square,
            "dating" => StructureKind::Dating,
            "two_loops" | "twoloops" => StructureKind::TwoLoops,
            "qbbn_chain" | "qbbnchain" => StructureKind::QbbnChain,
            "chain2" => StructureKind::Chain2,
            other => match other.strip_prefix("tree").map(str::parse) {
                Some(Ok(n)) if n >= 1 => StructureKind::RandomTree(n),
                _ => return Err(Error::InvalidArgument(format!("unknown structure {s:?}"))),
            },
        })
    }
}

/// Draws a table with i.i.d. entries uniform on `[low, high]`.
pub fn random_table<R: Rng + ?Sized>(rng: &mut R, low: f64, high: f64) -> FactorTable {
    let mut e = [0.0; 4];
    for x in &mut e {
        *x = if high > low {
            rng.gen_range(low..=high)
        } else {
            low
        };
    }
    FactorTable(e)
}

/// Edges of a uniformly-attached random tree: vertex `i ≥ 1` joins a
/// uniformly chosen earlier vertex.
pub fn random_tree_edges<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (rng.gen_range(0..i), i)).collect()
}

/// Instantiates `kind` with random tables. Requires `0 < low ≤ high`.
pub fn generate<R: Rng + ?Sized>(
    kind: StructureKind,
    rng: &mut R,
    low: f64,
    high: f64,
) -> Result<FactorGraph> {
    if !(low > 0.0 && high >= low && high.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "table range [{low}, {high}] must satisfy 0 < low <= high"
        )));
    }
    let edges = match kind.edges() {
        Some(e) => e.to_vec(),
        None => random_tree_edges(rng, kind.num_vars()),
    };
    let factors = edges
        .into_iter()
        .map(|(a, b)| Factor::new(a, b, random_table(rng, low, high)))
        .collect();
    FactorGraph::build(kind.num_vars(), factors)
}

/// Random graph on `n` variables: each unordered pair gets a factor with
/// probability `edge_prob`, tables uniform on `[low, high]`.
pub fn random_graph<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    edge_prob: f64,
    low: f64,
    high: f64,
) -> FactorGraph {
    let mut factors = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(edge_prob.clamp(0.0, 1.0)) {
                factors.push(Factor::new(a, b, random_table(rng, low, high)));
            }
        }
    }
    FactorGraph::build(n, factors).expect("pairs are distinct and in range")
}

/// Per-variable beliefs plus the two gather slots.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub beliefs: Vec<Probability>,
    pub scratch: Vec<[Probability; 2]>,
}

impl BeliefState {
    /// All beliefs and slots at 0.5.
    pub fn fresh(n: usize) -> Self {
        BeliefState {
            beliefs: vec![Probability::HALF; n],
            scratch: vec![[Probability::HALF; 2]; n],
        }
    }

    pub fn from_beliefs(beliefs: Vec<Probability>) -> Self {
        let n = beliefs.len();
        BeliefState {
            beliefs,
            scratch: vec![[Probability::HALF; 2]; n],
        }
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        Ok(Self::from_beliefs(
            values
                .iter()
                .map(|&v| Probability::new(v))
                .collect::<Result<_>>()?,
        ))
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn belief_values(&self) -> Vec<f64> {
        self.beliefs.iter().map(|p| p.value()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn build_examples() {
        let g = FactorGraph::from_edges(2, &[(0, 1, [1.0; 4])]).unwrap();
        assert_eq!(g.num_vars(), 2);
        assert!(g.is_tree());

        let tri =
            FactorGraph::from_edges(3, &[(0, 1, [1.0; 4]), (1, 2, [1.0; 4]), (2, 0, [1.0; 4])])
                .unwrap();
        assert_eq!(tri.num_loops(), 1);
        assert_eq!(tri.diameter().unwrap(), 1);

        assert_eq!(
            FactorGraph::from_edges(2, &[(0, 0, [1.0; 4])]),
            Err(Error::SelfLoop { a: 0, b: 0 })
        );
        assert_eq!(
            FactorGraph::from_edges(2, &[(0, 1, [1.0; 4]), (1, 0, [1.0; 4])]),
            Err(Error::DuplicateFactor { a: 1, b: 0 })
        );
        assert_eq!(
            FactorGraph::from_edges(2, &[(0, 2, [1.0; 4])]),
            Err(Error::IndexOutOfRange {
                index: 2,
                num_vars: 2
            })
        );
    }

    #[test]
    fn table_validation() {
        assert_eq!(
            FactorTable::new([1.0, -0.5, 1.0, 1.0]),
            Err(Error::NegativeWeight { value: -0.5 })
        );
        assert_eq!(FactorTable::new([0.0; 4]), Err(Error::ZeroTable));
        assert!(FactorTable::new([0.0, 0.0, 0.0, 1.0]).is_ok());
        let t = FactorTable::new([1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.transposed().entries(), [1.0, 3.0, 2.0, 4.0]);
        assert_eq!(t.get(1, 0), 3.0);
    }

    #[test]
    fn neighbors_are_sorted() {
        let g = FactorGraph::from_edges(4, &[(0, 3, [1.0; 4]), (0, 1, [1.0; 4]), (2, 0, [1.0; 4])])
            .unwrap();
        let partners: Vec<_> = g.neighbors(0).iter().map(|i| i.partner).collect();
        assert_eq!(partners, vec![1, 2, 3]);
        assert_eq!(g.gather_neighbors(0), [Some(1), Some(2)]);
        assert_eq!(g.gather_neighbors(3), [Some(0), None]);
    }

    #[test]
    fn structure_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let expected = [(3, 1), (4, 1), (5, 1), (4, 2), (6, 1)];
        for (kind, (vars, loops)) in StructureKind::LOOPY.iter().zip(expected) {
            let g = generate(*kind, &mut rng, 0.1, 1.0).unwrap();
            assert_eq!(g.num_vars(), vars, "{kind:?}");
            assert_eq!(g.num_loops(), loops, "{kind:?}");
            assert!(g.is_connected());
        }
        let sq = generate(StructureKind::Square, &mut rng, 0.1, 1.0).unwrap();
        assert_eq!(sq.factors().len(), 4);
        assert!(sq.neighbors(0).len() == 2 && sq.neighbors(3).len() == 2);
        let c = generate(StructureKind::Chain2, &mut rng, 0.1, 1.0).unwrap();
        assert_eq!(c.factors().len(), 1);
        for f in c.factors() {
            for e in f.table.entries() {
                assert!((0.1..=1.0).contains(&e));
            }
        }
    }

    #[test]
    fn generate_is_seed_deterministic() {
        for kind in [StructureKind::QbbnChain, StructureKind::RandomTree(9)] {
            let a = generate(kind, &mut ChaCha8Rng::seed_from_u64(11), 0.1, 1.0).unwrap();
            let b = generate(kind, &mut ChaCha8Rng::seed_from_u64(11), 0.1, 1.0).unwrap();
            assert_eq!(a.serialize(), b.serialize());
        }
    }

    #[test]
    fn generate_rejects_bad_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate(StructureKind::Triangle, &mut rng, 0.0, 1.0).is_err());
        assert!(generate(StructureKind::Triangle, &mut rng, 0.5, 0.4).is_err());
    }

    #[test]
    fn diameter_and_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = generate(StructureKind::Chain2, &mut rng, 0.1, 1.0).unwrap();
        assert_eq!(c.diameter().unwrap(), 1);
        assert!(c.is_tree());
        let path =
            FactorGraph::from_edges(4, &[(0, 1, [1.0; 4]), (1, 2, [1.0; 4]), (2, 3, [1.0; 4])])
                .unwrap();
        assert_eq!(path.diameter().unwrap(), 3);
        let tri = generate(StructureKind::Triangle, &mut rng, 0.1, 1.0).unwrap();
        assert!(!tri.is_tree());
        for n in 1..=10 {
            let t = generate(StructureKind::RandomTree(n), &mut rng, 0.1, 1.0).unwrap();
            assert!(t.is_tree());
        }
        let split = FactorGraph::from_edges(4, &[(0, 1, [1.0; 4]), (2, 3, [1.0; 4])]).unwrap();
        assert_eq!(split.diameter(), Err(Error::Disconnected));
        assert!(!split.is_tree());
    }

    #[test]
    fn serialize_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = generate(StructureKind::Triangle, &mut rng, 0.1, 1.0).unwrap();
        let text = g.serialize();
        let back = FactorGraph::parse(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.serialize(), text);
    }

    #[test]
    fn parse_with_comments() {
        let text = "# header\nvars 2 # two\n\nfactor 0 1 1 2 3 4 # chain\n";
        let g: FactorGraph = text.parse().unwrap();
        assert_eq!(g.factors()[0].table.entries(), [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn parse_errors() {
        let err = FactorGraph::parse("vars 2\nfactor 0 1 1 2 3\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("factor 0-1"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
        let err = FactorGraph::parse("vars 2\nfactor 0 1 1 -0.5 3 4\n").unwrap_err();
        assert_eq!(
            err,
            Error::AtLine {
                line: 2,
                source: Box::new(Error::NegativeWeight { value: -0.5 })
            }
        );
        assert!(matches!(
            FactorGraph::parse("factor 0 1 1 1 1 1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            FactorGraph::parse("vars 2\nedge 0 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert_eq!(
            FactorGraph::parse("vars 3\nfactor 0 1 1 1 1 1\nfactor 1 0 1 1 1 1\n").unwrap_err(),
            Error::AtLine {
                line: 3,
                source: Box::new(Error::DuplicateFactor { a: 1, b: 0 })
            }
        );
        assert!(matches!(
            FactorGraph::parse("vars 2\nfactor 0 1 1 x 1 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn structure_names_parse_back() {
        for k in StructureKind::LOOPY
            .into_iter()
            .chain([StructureKind::Chain2, StructureKind::RandomTree(7)])
        {
            assert_eq!(StructureKind::parse(&k.name()).unwrap(), k);
        }
        assert!(StructureKind::parse("pentagon").is_err());
    }
}
