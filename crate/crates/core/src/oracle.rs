//! Brute-force exact inference by enumerating all `2^n` assignments, and the
//! per-variable KL / MAE metrics used to score approximate marginals.

use crate::error::{Error, Result};
use crate::graph::FactorGraph;
use crate::prob::PROB_EPS;

/// Enumeration refuses graphs with more variables than this.
pub const MAX_ENUM_VARS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactMarginals {
    /// `P(x_v = 1)` per variable.
    pub marginals: Vec<f64>,
    pub partition_z: f64,
}

/// Sums `weight(assignment)` over all assignments of `n` binary variables.
/// Bit `v` of the assignment is the value of variable `v`.
pub(crate) fn enumerate<F>(n: usize, weight: F) -> Result<ExactMarginals>
where
    F: Fn(u64) -> f64,
{
    if n > MAX_ENUM_VARS {
        return Err(Error::TooLarge {
            num_vars: n,
            limit: MAX_ENUM_VARS,
        });
    }
    let mut z = 0.0;
    let mut on = vec![0.0; n];
    for x in 0..(1u64 << n) {
        let w = weight(x);
        if w == 0.0 {
            continue;
        }
        z += w;
        for (v, slot) in on.iter_mut().enumerate() {
            if x >> v & 1 == 1 {
                *slot += w;
            }
        }
    }
    if z.is_nan() || z <= 0.0 {
        return Err(Error::ZeroPartition);
    }
    Ok(ExactMarginals {
        marginals: on.into_iter().map(|m| m / z).collect(),
        partition_z: z,
    })
}

/// Exact marginals and partition function of a pairwise factor graph.
pub fn exact_marginals(g: &FactorGraph) -> Result<ExactMarginals> {
    let factors = g.factors();
    enumerate(g.num_vars(), |x| {
        factors
            .iter()
            .map(|f| {
                f.table
                    .get((x >> f.a & 1) as usize, (x >> f.b & 1) as usize)
            })
            .product()
    })
}

fn check_lengths(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Mean over variables of the Bernoulli divergence `KL(p_i ‖ q_i)`.
///
/// `q` is clamped into the `PROB_EPS` band so a saturated approximation
/// gives a large finite value rather than infinity.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    if p.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = p
        .iter()
        .zip(q)
        .map(|(&p, &q)| {
            let q = q.clamp(PROB_EPS, 1.0 - PROB_EPS);
            xlogy_ratio(p, q) + xlogy_ratio(1.0 - p, 1.0 - q)
        })
        .sum();
    // Round-off can push a true zero slightly negative.
    Ok((total / p.len() as f64).max(0.0))
}

pub fn mean_abs_error(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    if p.is_empty() {
        return Ok(0.0);
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64)
}

pub fn max_abs_error(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    Ok(p.iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, StructureKind};
    use rand::{seq::SliceRandom, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chain2_examples() {
        let g = FactorGraph::from_edges(2, &[(0, 1, [1.0; 4])]).unwrap();
        let m = exact_marginals(&g).unwrap();
        assert_eq!(m.marginals, vec![0.5, 0.5]);
        assert_eq!(m.partition_z, 4.0);

        let g = FactorGraph::from_edges(2, &[(0, 1, [1.0, 2.0, 3.0, 4.0])]).unwrap();
        let m = exact_marginals(&g).unwrap();
        assert_eq!(m.partition_z, 10.0);
        assert!((m.marginals[0] - 0.7).abs() < 1e-15);
        assert!((m.marginals[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn uniform_triangle() {
        let g = FactorGraph::from_edges(3, &[(0, 1, [1.0; 4]), (1, 2, [1.0; 4]), (0, 2, [1.0; 4])])
            .unwrap();
        let m = exact_marginals(&g).unwrap();
        assert!(m.marginals.iter().all(|&p| p == 0.5));
        assert_eq!(m.partition_z, 8.0);
    }

    #[test]
    fn refuses_large_graphs() {
        let g = FactorGraph::build(25, vec![]).unwrap();
        assert_eq!(
            exact_marginals(&g),
            Err(Error::TooLarge {
                num_vars: 25,
                limit: 24
            })
        );
    }

    #[test]
    fn zero_partition() {
        // x0 = x1, x1 = x2, x0 != x2 has no satisfying assignment.
        let eq = [1.0, 0.0, 0.0, 1.0];
        let ne = [0.0, 1.0, 1.0, 0.0];
        let g = FactorGraph::from_edges(3, &[(0, 1, eq), (1, 2, eq), (0, 2, ne)]).unwrap();
        assert_eq!(exact_marginals(&g), Err(Error::ZeroPartition));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.9], &[0.3, 0.9]).unwrap(), 0.0);
        let expect = 0.7 * (7.0f64 / 6.0).ln() + 0.3 * (0.75f64).ln();
        let got = kl_divergence(&[0.7], &[0.6]).unwrap();
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.021_600_854).abs() < 1e-9);
        let rev = kl_divergence(&[0.6], &[0.7]).unwrap();
        assert!((got - rev).abs() > 1e-4);
        assert!(kl_divergence(&[0.5], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mean_abs_error(&[0.2, 0.4], &[0.2, 0.4]).unwrap(), 0.0);
        // Four-decimal posteriors whose max error 0.0021 was computed before
        // rounding, so allow one unit in each input.
        let (p, q) = ([0.7349, 0.4366], [0.7338, 0.4346]);
        assert!((max_abs_error(&p, &q).unwrap() - 0.0021).abs() <= 1.5e-4);
        assert!((mean_abs_error(&p, &q).unwrap() - 0.0015).abs() <= 1.5e-4);
        assert!((mean_abs_error(&[0.5], &[0.6]).unwrap() - 0.1).abs() < 1e-15);
        assert!(mean_abs_error(&[0.5], &[]).is_err());
    }

    #[test]
    fn permutation_equivariance_and_factor_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for kind in StructureKind::LOOPY {
            let g = generate(kind, &mut rng, 0.1, 1.0).unwrap();
            let base = exact_marginals(&g).unwrap();

            let mut perm: Vec<usize> = (0..g.num_vars()).collect();
            perm.shuffle(&mut rng);
            let pg = g.permuted(&perm).unwrap();
            let pm = exact_marginals(&pg).unwrap();
            for (v, &pv) in perm.iter().enumerate() {
                assert!((base.marginals[v] - pm.marginals[pv]).abs() < 1e-12);
            }

            let mut factors = g.factors().to_vec();
            factors.reverse();
            let rg = FactorGraph::build(g.num_vars(), factors).unwrap();
            let rz = exact_marginals(&rg).unwrap().partition_z;
            assert!((rz - base.partition_z).abs() <= 1e-12 * base.partition_z);
        }
    }
}
