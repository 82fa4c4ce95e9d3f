//! A single transformer layer with hand-built weights that performs one
//! round of the two-slot belief update.
//!
//! Each variable is one token. Token layout for `n` variables
//! (`d_model = 8 + 3n + 2`):
//!
//! | dims                | content                                          |
//! |---------------------|--------------------------------------------------|
//! | 0                   | own belief                                       |
//! | 1..=4               | table of the factor to neighbor 0, `f[own][nbr]` |
//! | 5                   | node type (0 = variable, 1 = factor)             |
//! | 6                   | own index / (n - 1)                              |
//! | 7                   | neighbor-0 index / (n - 1)                       |
//! | 8 .. 8+n            | own index, one-hot                               |
//! | 8+n .. 8+2n         | neighbor-0 index, one-hot (all zero if none)     |
//! | 8+2n .. 8+3n        | neighbor-1 index, one-hot (all zero if none)     |
//! | 8+3n, 8+3n+1        | scratch slots 0 and 1                            |
//!
//! Head `h` matches its query (the neighbor-`h` one-hot block) against every
//! key (the own-index one-hot block), so the score is 1 exactly at the
//! neighbor and 0 elsewhere. Its value matrix copies dim 0 into scratch slot
//! `h`. The FFN then overwrites dim 0 with
//! `σ(w0·logit(slot0) + w1·logit(slot1) + b)` and clears the scratch slots.
//! A slot whose neighbor block is empty carries no message and is read as
//! the neutral 0.5.

use crate::error::{Error, Result};
use crate::graph::{BeliefState, FactorGraph};
use crate::prob::{weighted_update, FfnParams, Probability};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// `M x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matrix-vector shape mismatch");
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Shape(format!(
                "{}x{} + {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn nonzeros(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// Numerical rank by Gaussian elimination with partial pivoting.
    pub fn rank(&self) -> usize {
        let mut a = self.data.clone();
        let (rows, cols) = (self.rows, self.cols);
        let mut rank = 0;
        for col in 0..cols {
            if rank == rows {
                break;
            }
            let pivot = (rank..rows)
                .max_by(|&x, &y| a[x * cols + col].abs().total_cmp(&a[y * cols + col].abs()))
                .unwrap();
            if a[pivot * cols + col].abs() < 1e-12 {
                continue;
            }
            for j in 0..cols {
                a.swap(rank * cols + j, pivot * cols + j);
            }
            for r in rank + 1..rows {
                let factor = a[r * cols + col] / a[rank * cols + col];
                for j in col..cols {
                    a[r * cols + j] -= factor * a[rank * cols + j];
                }
            }
            rank += 1;
        }
        rank
    }
}

/// `M[i][j] = 1` iff `i = j = d`. As Q and K, the score becomes
/// `x_q[d] · x_k[d]`.
pub fn project_dim(d: usize, width: usize) -> Result<Matrix> {
    cross_project(d, d, width)
}

/// `M[i][j] = 1` iff `i = dst` and `j = src`. As V, copies dimension `src`
/// of a token into dimension `dst` and nothing else.
pub fn cross_project(src: usize, dst: usize, width: usize) -> Result<Matrix> {
    for index in [src, dst] {
        if index >= width {
            return Err(Error::DimOutOfRange { index, width });
        }
    }
    let mut m = Matrix::zeros(width, width);
    m.set(dst, src, 1.0);
    Ok(m)
}

/// Dimension map of a token for a graph of `n` variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
}

impl Layout {
    pub const BELIEF: usize = 0;
    pub const TABLE: std::ops::Range<usize> = 1..5;
    pub const NODE_TYPE: usize = 5;
    pub const OWN_INDEX: usize = 6;
    pub const NBR_INDEX: usize = 7;

    pub fn new(n: usize) -> Self {
        Layout { n }
    }

    pub fn own(&self, i: usize) -> usize {
        8 + i
    }

    pub fn own_block(&self) -> std::ops::Range<usize> {
        8..8 + self.n
    }

    /// One-hot block for neighbor slot `h` (0 or 1).
    pub fn nbr(&self, h: usize, i: usize) -> usize {
        8 + (1 + h) * self.n + i
    }

    pub fn nbr_block(&self, h: usize) -> std::ops::Range<usize> {
        let start = 8 + (1 + h) * self.n;
        start..start + self.n
    }

    pub fn scratch(&self, h: usize) -> usize {
        8 + 3 * self.n + h
    }

    pub fn d_model(&self) -> usize {
        8 + 3 * self.n + 2
    }

    fn index_scale(&self) -> f64 {
        if self.n > 1 {
            1.0 / (self.n - 1) as f64
        } else {
            0.0
        }
    }
}

/// The residual stream: one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    layout: Layout,
    rows: Vec<Vec<f64>>,
}

fn one_hot_index(block: &[f64]) -> Option<usize> {
    block.iter().position(|&v| v > 0.5)
}

impl TokenMatrix {
    pub fn new(layout: Layout, rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = layout.d_model();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Shape(format!(
                "token width {} does not match d_model {d}",
                bad.len()
            )));
        }
        Ok(TokenMatrix { layout, rows })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn num_tokens(&self) -> usize {
        self.rows.len()
    }

    pub fn token(&self, t: usize) -> &[f64] {
        &self.rows[t]
    }

    pub fn token_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.rows[t]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Appends a token row.
    pub fn push_token(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.layout.d_model() {
            return Err(Error::Shape("token width".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn own_index(&self, t: usize) -> Option<usize> {
        one_hot_index(&self.rows[t][self.layout.own_block()])
    }

    /// Index stored in neighbor block `h`, `None` when padded.
    pub fn nbr_index(&self, t: usize, h: usize) -> Option<usize> {
        one_hot_index(&self.rows[t][self.layout.nbr_block(h)])
    }

    /// Whether slot `h` of token `t` is routed to a neighbor.
    pub fn slot_active(&self, t: usize, h: usize) -> bool {
        self.nbr_index(t, h).is_some()
    }

    fn elementwise(&self, other: &TokenMatrix, f: impl Fn(f64, f64) -> f64) -> Result<TokenMatrix> {
        if self.layout != other.layout || self.num_tokens() != other.num_tokens() {
            return Err(Error::Shape("token matrices differ in shape".into()));
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            .collect();
        Ok(TokenMatrix {
            layout: self.layout,
            rows,
        })
    }

    /// Residual addition.
    pub fn add(&self, delta: &TokenMatrix) -> Result<TokenMatrix> {
        self.elementwise(delta, |a, b| a + b)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &TokenMatrix) -> Result<f64> {
        Ok(self
            .elementwise(other, |a, b| (a - b).abs())?
            .rows
            .iter()
            .flatten()
            .fold(0.0, |m: f64, &v| m.max(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttentionMode {
    /// Softmax over `β · score`.
    Soft,
    /// Point mass on the highest score; ties go to the lowest token index.
    #[default]
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerWeights {
    pub heads: [HeadWeights; 2],
    pub ffn: FfnParams,
    /// Inverse temperature β applied to scores in soft mode.
    pub temperature: f64,
    pub mode: AttentionMode,
}

impl TransformerWeights {
    pub fn with_mode(mut self, mode: AttentionMode, temperature: f64) -> Self {
        self.mode = mode;
        self.temperature = temperature;
        self
    }

    pub fn with_ffn(mut self, ffn: FfnParams) -> Self {
        self.ffn = ffn;
        self
    }
}

/// Encodes graph structure and beliefs, one token per variable.
pub fn encode_bp_state(g: &FactorGraph, s: &BeliefState) -> TokenMatrix {
    assert_eq!(s.len(), g.num_vars(), "belief state does not match graph");
    let n = g.num_vars();
    let layout = Layout::new(n);
    let scale = layout.index_scale();
    let rows = (0..n)
        .map(|v| {
            let mut row = vec![0.0; layout.d_model()];
            row[Layout::BELIEF] = s.beliefs[v].value();
            if let Some(first) = g.neighbors(v).first() {
                let table = g.factors()[first.factor].table_from(v).entries();
                row[Layout::TABLE].copy_from_slice(&table);
                row[Layout::NBR_INDEX] = first.partner as f64 * scale;
            }
            row[Layout::NODE_TYPE] = 0.0;
            row[Layout::OWN_INDEX] = v as f64 * scale;
            row[layout.own(v)] = 1.0;
            for (h, nb) in g.gather_neighbors(v).into_iter().enumerate() {
                if let Some(u) = nb {
                    row[layout.nbr(h, u)] = 1.0;
                }
            }
            row
        })
        .collect();
    TokenMatrix { layout, rows }
}

fn checked_unit(v: f64) -> Result<Probability> {
    if !v.is_finite() {
        return Err(Error::NonFinite(v));
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(v));
    }
    Probability::saturating(v)
}

/// Reads beliefs from dim 0 and the scratch slots. Padded or cleared
/// (exactly zero) slots read as 0.5.
pub fn decode_tf_state(x: &TokenMatrix) -> Result<BeliefState> {
    let layout = x.layout();
    let mut beliefs = Vec::with_capacity(x.num_tokens());
    let mut scratch = Vec::with_capacity(x.num_tokens());
    for t in 0..x.num_tokens() {
        let row = x.token(t);
        beliefs.push(checked_unit(row[Layout::BELIEF])?);
        let mut slots = [Probability::HALF; 2];
        for (h, slot) in slots.iter_mut().enumerate() {
            let v = row[layout.scratch(h)];
            if x.slot_active(t, h) && v != 0.0 {
                *slot = checked_unit(v)?;
            }
        }
        scratch.push(slots);
    }
    Ok(BeliefState { beliefs, scratch })
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Raw `q_j · k_t` scores, one row per query token.
pub fn attention_scores(x: &TokenMatrix, head: &HeadWeights) -> Vec<Vec<f64>> {
    let queries: Vec<Vec<f64>> = x.rows().iter().map(|r| head.wq.apply(r)).collect();
    let keys: Vec<Vec<f64>> = x.rows().iter().map(|r| head.wk.apply(r)).collect();
    queries
        .iter()
        .map(|q| {
            keys.iter()
                .map(|k| q.iter().zip(k).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect()
}

/// Turns raw scores into attention weights: softmax of `beta * score`, or a
/// point mass on the first maximal score.
pub fn weights_from_scores(scores: &[f64], mode: AttentionMode, beta: f64) -> Vec<f64> {
    match mode {
        AttentionMode::Soft => softmax(&scores.iter().map(|s| beta * s).collect::<Vec<_>>()),
        AttentionMode::Hard => {
            let mut best = 0;
            for (k, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = k;
                }
            }
            let mut w = vec![0.0; scores.len()];
            if !w.is_empty() {
                w[best] = 1.0;
            }
            w
        }
    }
}

/// Attention distribution of every query over all key tokens.
pub fn attention_weights(
    x: &TokenMatrix,
    head: &HeadWeights,
    mode: AttentionMode,
    beta: f64,
) -> Vec<Vec<f64>> {
    attention_scores(x, head)
        .iter()
        .map(|scores| weights_from_scores(scores, mode, beta))
        .collect()
}

/// The head's contribution to the residual stream, `Σ_k a_jk · W_V x_k`.
pub fn attention_head(
    x: &TokenMatrix,
    head: &HeadWeights,
    mode: AttentionMode,
    beta: f64,
) -> TokenMatrix {
    let weights = attention_weights(x, head, mode, beta);
    let values: Vec<Vec<f64>> = x.rows().iter().map(|r| head.wv.apply(r)).collect();
    let d = x.layout().d_model();
    let rows = weights
        .iter()
        .map(|w| {
            let mut out = vec![0.0; d];
            for (a, v) in w.iter().zip(&values) {
                if *a == 0.0 {
                    continue;
                }
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += a * vi;
                }
            }
            out
        })
        .collect();
    TokenMatrix {
        layout: x.layout(),
        rows,
    }
}

/// Residual stream after both heads, before the FFN.
pub fn attend(x: &TokenMatrix, w: &TransformerWeights) -> Result<TokenMatrix> {
    let d0 = attention_head(x, &w.heads[0], w.mode, w.temperature);
    let d1 = attention_head(x, &w.heads[1], w.mode, w.temperature);
    x.add(&d0)?.add(&d1)
}

/// The two messages the FFN consumes for token `t`.
pub fn ffn_inputs(x: &TokenMatrix, t: usize) -> Result<[Probability; 2]> {
    let layout = x.layout();
    let mut slots = [Probability::HALF; 2];
    for (h, slot) in slots.iter_mut().enumerate() {
        if x.slot_active(t, h) {
            *slot = checked_unit(x.token(t)[layout.scratch(h)])?;
        }
    }
    Ok(slots)
}

/// Sigmoid belief update: overwrites dim 0 with the weighted update of the
/// two scratch messages and clears the scratch slots.
pub fn ffn_update(x: &TokenMatrix, params: FfnParams) -> Result<TokenMatrix> {
    let layout = x.layout();
    let mut out = x.clone();
    for t in 0..x.num_tokens() {
        let [m0, m1] = ffn_inputs(x, t)?;
        let row = out.token_mut(t);
        row[Layout::BELIEF] = weighted_update(m0, m1, params).value();
        row[layout.scratch(0)] = 0.0;
        row[layout.scratch(1)] = 0.0;
    }
    Ok(out)
}

/// One layer: both heads into the residual stream, then the FFN.
pub fn forward_pass(x: &TokenMatrix, w: &TransformerWeights) -> Result<TokenMatrix> {
    ffn_update(&attend(x, w)?, w.ffn)
}

/// `layers` applications of the same layer.
pub fn forward_layers(
    x: &TokenMatrix,
    w: &TransformerWeights,
    layers: usize,
) -> Result<TokenMatrix> {
    let mut x = x.clone();
    for _ in 0..layers {
        x = forward_pass(&x, w)?;
    }
    Ok(x)
}

/// Hand-built weights for graphs with `n` variables.
pub fn build_bp_weights(n: usize) -> TransformerWeights {
    let layout = Layout::new(n.max(1));
    let d = layout.d_model();
    let head = |h: usize| {
        let mut wq = Matrix::zeros(d, d);
        let mut wk = Matrix::zeros(d, d);
        for i in 0..layout.n {
            // Query: neighbor-h block mapped onto own-block coordinates.
            wq = wq
                .add(&cross_project(layout.nbr(h, i), layout.own(i), d).expect("in range"))
                .expect("same shape");
            wk = wk
                .add(&project_dim(layout.own(i), d).expect("in range"))
                .expect("same shape");
        }
        let wv = cross_project(Layout::BELIEF, layout.scratch(h), d).expect("in range");
        HeadWeights { wq, wk, wv }
    };
    TransformerWeights {
        heads: [head(0), head(1)],
        ffn: FfnParams::BP,
        temperature: 64.0,
        mode: AttentionMode::Hard,
    }
}
