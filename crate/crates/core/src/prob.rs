//! Log-odds algebra of independent binary evidence.
//!
//! `logit` maps the open unit interval onto the reals and `sigmoid` maps it
//! back. Under that isomorphism, combining two independent pieces of evidence
//! about the same proposition is plain addition of log-odds:
//!
//! ```text
//! a ⊕ b = σ(logit a + logit b) = ab / (ab + (1-a)(1-b))
//! ```
//!
//! `(0, 1)` with `⊕` is a commutative group with identity `0.5` and inverse
//! `1 - a`.

use crate::error::{Error, Result};

/// Probabilities are kept inside `[PROB_EPS, 1 - PROB_EPS]`.
pub const PROB_EPS: f64 = 1e-9;

#[inline]
fn clamp_unit(v: f64) -> f64 {
    v.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// A probability strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    /// The neutral element of `⊕`.
    pub const HALF: Probability = Probability(0.5);

    /// Rejects values outside `(0, 1)`, then clamps to the `PROB_EPS` band.
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite(value));
        }
        if value <= 0.0 || value >= 1.0 {
            return Err(Error::Domain(value));
        }
        Ok(Probability(clamp_unit(value)))
    }

    /// Clamps any finite value into the `PROB_EPS` band. Used where
    /// saturation at 0 or 1 is the expected numerical outcome.
    pub fn saturating(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite(value));
        }
        Ok(Probability(clamp_unit(value)))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Probability {
        Probability(clamp_unit(1.0 - self.0))
    }

    #[inline]
    pub fn logit(self) -> LogOdds {
        LogOdds((self.0 / (1.0 - self.0)).ln())
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Unbounded log-odds `ln(p / (1 - p))`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogOdds(pub f64);

impl LogOdds {
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::ops::Add for LogOdds {
    type Output = LogOdds;
    fn add(self, rhs: LogOdds) -> LogOdds {
        LogOdds(self.0 + rhs.0)
    }
}

/// Weights of the two evidence sources and a prior bias for the weighted
/// update `σ(w0·logit m0 + w1·logit m1 + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FfnParams {
    pub w0: f64,
    pub w1: f64,
    pub b: f64,
}

impl FfnParams {
    /// The parameters under which the weighted update is exact Bayesian
    /// combination.
    pub const BP: FfnParams = FfnParams {
        w0: 1.0,
        w1: 1.0,
        b: 0.0,
    };

    pub const fn new(w0: f64, w1: f64, b: f64) -> Self {
        FfnParams { w0, w1, b }
    }
}

impl Default for FfnParams {
    fn default() -> Self {
        FfnParams::BP
    }
}

/// `ln(p / (1 - p))`, rejecting `p` outside `(0, 1)`.
pub fn logit(p: f64) -> Result<LogOdds> {
    Ok(Probability::new(p)?.logit())
}

/// Logistic function, saturating into the `PROB_EPS` band.
pub fn sigmoid(x: LogOdds) -> Probability {
    let x = x.0;
    let v = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    // NaN input only; finite and infinite inputs land in [0, 1].
    Probability(clamp_unit(if v.is_nan() { 0.5 } else { v }))
}

/// Bayesian combination of two independent messages, `m0 ⊕ m1`.
///
/// Evaluated in ratio form; [`update_belief_logit_sum`] is the same map
/// through log-odds.
pub fn update_belief(m0: Probability, m1: Probability) -> Probability {
    let (a, b) = (m0.0, m1.0);
    let num = a * b;
    let den = num + (1.0 - a) * (1.0 - b);
    Probability(clamp_unit(num / den))
}

/// `σ(logit m0 + logit m1)`.
pub fn update_belief_logit_sum(m0: Probability, m1: Probability) -> Probability {
    sigmoid(m0.logit() + m1.logit())
}

/// `σ(w0·logit m0 + w1·logit m1 + b)`.
///
/// Computed as the power-ratio `m0^w0 m1^w1 e^b / (… + (1-m0)^w0 (1-m1)^w1)`
/// so that at [`FfnParams::BP`] the arithmetic is identical to
/// [`update_belief`]. Falls back to the log-odds form when the powers leave
/// the normal range.
pub fn weighted_update(m0: Probability, m1: Probability, params: FfnParams) -> Probability {
    let (a, b) = (m0.0, m1.0);
    let num = a.powf(params.w0) * b.powf(params.w1) * params.b.exp();
    let den = num + (1.0 - a).powf(params.w0) * (1.0 - b).powf(params.w1);
    let v = num / den;
    if den.is_normal() && num.is_finite() && v.is_finite() {
        Probability(clamp_unit(v))
    } else {
        weighted_update_logit_sum(m0, m1, params)
    }
}

/// The log-odds form of [`weighted_update`].
pub fn weighted_update_logit_sum(
    m0: Probability,
    m1: Probability,
    params: FfnParams,
) -> Probability {
    sigmoid(LogOdds(
        params.w0 * m0.logit().0 + params.w1 * m1.logit().0 + params.b,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    #[test]
    fn logit_examples() {
        assert_eq!(logit(0.5).unwrap().value(), 0.0);
        assert!((logit(0.8).unwrap().value() - 4f64.ln()).abs() < 1e-15);
        assert!((logit(0.8).unwrap().value() - 1.386_294_361_119_890_6).abs() < 1e-12);
        assert!((sigmoid(logit(0.37).unwrap()).value() - 0.37).abs() < 1e-12);
    }

    #[test]
    fn logit_rejects_closed_endpoints() {
        assert_eq!(logit(0.0), Err(Error::Domain(0.0)));
        assert_eq!(logit(1.0), Err(Error::Domain(1.0)));
        assert_eq!(logit(-0.3), Err(Error::Domain(-0.3)));
        assert!(matches!(logit(f64::NAN), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(LogOdds(0.0)).value(), 0.5);
        assert!((sigmoid(LogOdds(4f64.ln())).value() - 0.8).abs() < 1e-15);
        assert_eq!(sigmoid(LogOdds(40.0)).value(), 1.0 - PROB_EPS);
        assert_eq!(sigmoid(LogOdds(-40.0)).value(), PROB_EPS);
        assert_eq!(sigmoid(LogOdds(f64::INFINITY)).value(), 1.0 - PROB_EPS);
    }

    #[test]
    fn update_belief_examples() {
        let r = update_belief(p(0.8), p(0.4)).value();
        assert!((r - 0.32 / 0.44).abs() < 1e-15);
        assert!((r - 0.727_272_727_272_727_3).abs() < 1e-12);
        for m in [0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((update_belief(p(m), Probability::HALF).value() - m).abs() < 1e-15);
            assert!((update_belief(p(m), p(m).complement()).value() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_update_examples() {
        let r = weighted_update(p(0.8), p(0.4), FfnParams::BP);
        assert_eq!(r, update_belief(p(0.8), p(0.4)));
        assert_eq!(
            weighted_update(p(0.8), p(0.4), FfnParams::new(0.0, 0.0, 0.0)).value(),
            0.5
        );
        // σ(2·ln(7/3)) = 49 / 58
        let r = weighted_update(p(0.7), p(0.7), FfnParams::new(2.0, 0.0, 0.0)).value();
        assert!((r - 49.0 / 58.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_update_falls_back_on_extreme_weights() {
        let r = weighted_update(p(1e-9), p(0.3), FfnParams::new(80.0, 1.0, 0.0));
        assert_eq!(r.value(), PROB_EPS);
        let r = weighted_update(p(0.6), p(0.3), FfnParams::new(-400.0, 1.0, 0.0));
        let expect = weighted_update_logit_sum(p(0.6), p(0.3), FfnParams::new(-400.0, 1.0, 0.0));
        assert_eq!(r, expect);
    }

    #[test]
    fn round_trip_saturates_beyond_clamp() {
        let edge = ((1.0 - PROB_EPS) / PROB_EPS).ln();
        assert!((sigmoid(LogOdds(25.0)).logit().value() - edge).abs() < 1e-6);
        assert!((sigmoid(LogOdds(-30.0)).logit().value() + edge).abs() < 1e-6);
    }

    #[test]
    fn probability_construction() {
        assert!(Probability::new(0.0).is_err());
        assert!(Probability::new(1.0).is_err());
        assert_eq!(Probability::new(1e-300).unwrap().value(), PROB_EPS);
        assert_eq!(
            Probability::saturating(1.0).unwrap().value(),
            1.0 - PROB_EPS
        );
        assert!(Probability::saturating(f64::INFINITY).is_err());
    }

    fn unit() -> impl Strategy<Value = f64> {
        PROB_EPS..=(1.0 - PROB_EPS)
    }

    proptest! {
        #[test]
        fn positivity(a in unit(), b in unit()) {
            let r = update_belief(p(a), p(b)).value();
            prop_assert!(r > 0.0 && r < 1.0);
        }

        #[test]
        fn logit_sigmoid_round_trip(x in -20.0f64..20.0) {
            let back = sigmoid(LogOdds(x)).logit().value();
            prop_assert!((back - x).abs() < 1e-6 * (1.0 + x.abs()));
        }

        #[test]
        fn weighted_reduces_to_update(a in 0.001f64..0.999, b in 0.001f64..0.999) {
            prop_assert_eq!(weighted_update(p(a), p(b), FfnParams::BP), update_belief(p(a), p(b)));
        }

        #[test]
        fn weighted_forms_agree(a in 0.01f64..0.99, b in 0.01f64..0.99,
                                w0 in -3.0f64..3.0, w1 in -3.0f64..3.0, bias in -2.0f64..2.0) {
            let params = FfnParams::new(w0, w1, bias);
            let x = weighted_update(p(a), p(b), params).value();
            let y = weighted_update_logit_sum(p(a), p(b), params).value();
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
