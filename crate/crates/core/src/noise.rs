//! Quadrature statistics under vacuum plus excess noise, post-selection and
//! the induced binary channel with erasures.
//!
//! Bob accepts a readout when `|v| ≥ v₀` and decides by its sign. For the
//! two equiprobable states with readout means `m₊ > m₋` the per-symbol
//! detection density is `1 - g(v) = (p(v|m₊) + p(v|m₋)) / 2` and the wrong-bit
//! fraction at `v` is `e(v) = p(v|wrong) / (p(v|m₊) + p(v|m₋))`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Result, ScwError};
use crate::quad::{self, Tolerance};

/// Vacuum quadrature variance.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Below this acceptance probability the protocol aborts.
pub const MIN_ACCEPTANCE: f64 = 1e-300;

/// Lossy channel with Gaussian excess noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Attenuation in dB, `-10 log₁₀ η`.
    pub loss_db: f64,
    /// Excess-noise variance `Ξ` in vacuum units.
    pub xi: f64,
}

impl ChannelModel {
    pub fn new(loss_db: f64, xi: f64) -> Result<Self> {
        let ch = Self { loss_db, xi };
        ch.validate()?;
        Ok(ch)
    }

    pub fn from_transmittance(eta: f64, xi: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(domain("eta", eta, "0 < eta <= 1"));
        }
        Self::new(-10.0 * eta.log10(), xi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss_db >= 0.0 && self.loss_db.is_finite()) {
            return Err(domain("loss_db", self.loss_db, "finite loss >= 0 dB"));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(domain("xi", self.xi, "xi >= 0"));
        }
        Ok(())
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }

    /// Standard deviation of the readout, `√((1 + Ξ)/4)`.
    pub fn sigma(&self) -> f64 {
        readout_sigma(self.xi)
    }
}

pub fn readout_sigma(xi: f64) -> f64 {
    (VACUUM_VARIANCE * (1.0 + xi)).sqrt()
}

/// `√(2/(π(1+Ξ))) exp(-2(v - m)²/(1+Ξ))`: a Gaussian of variance `(1+Ξ)/4`.
pub fn quadrature_pdf(v: f64, mean: f64, xi: f64) -> f64 {
    ln_quadrature_pdf(v, mean, xi).exp()
}

pub fn ln_quadrature_pdf(v: f64, mean: f64, xi: f64) -> f64 {
    let w = 1.0 + xi;
    0.5 * (2.0 / (PI * w)).ln() - 2.0 * (v - mean).powi(2) / w
}

/// Detection density and conditional error fraction at one readout value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErasureErrorProfile {
    /// `1 - g(v)`, per emitted symbol.
    pub one_minus_g: f64,
    /// `e(v)`, in `[0, 1/2]` for a sign decision.
    pub e: f64,
    /// Both densities underflowed; `e` is still the log-domain value.
    pub underflow: bool,
}

/// `1 - g(v)` and `e(v)` with the error fraction taken from the
/// log-likelihood ratio so that it never turns into `0/0`.
pub fn erasure_error_profiles(
    v: f64,
    mean_plus: f64,
    mean_minus: f64,
    xi: f64,
) -> ErasureErrorProfile {
    let (hi, lo) = ordered(mean_plus, mean_minus);
    let one_minus_g = 0.5 * (quadrature_pdf(v, hi, xi) + quadrature_pdf(v, lo, xi));
    ErasureErrorProfile {
        one_minus_g,
        e: error_fraction(v, hi, lo, xi),
        underflow: one_minus_g == 0.0,
    }
}

/// `e(v)` for means `hi ≥ lo` and a decision by the sign of `v`.
pub(crate) fn error_fraction(v: f64, hi: f64, lo: f64, xi: f64) -> f64 {
    // ln p(v|right) - ln p(v|wrong)
    let llr = 2.0 * (hi - lo) * (2.0 * v - hi - lo) / (1.0 + xi);
    let llr = if v >= 0.0 { llr } else { -llr };
    logistic_neg(llr)
}

/// `1 / (1 + e^x)` without overflow.
fn logistic_neg(x: f64) -> f64 {
    if x > 0.0 {
        let t = (-x).exp();
        t / (1.0 + t)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a >= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Post-selected error statistics for one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionStats {
    pub v_0: f64,
    pub mean_plus: f64,
    pub mean_minus: f64,
    pub xi: f64,
    /// Error probability mass `E` per sifted symbol.
    pub e: f64,
    /// Acceptance probability `P` per sifted symbol.
    pub p: f64,
    /// Bit error rate `Q = E/P` after post-selection.
    pub q: f64,
}

impl DecisionStats {
    pub fn one_minus_g(&self, v: f64) -> f64 {
        erasure_error_profiles(v, self.mean_plus, self.mean_minus, self.xi).one_minus_g
    }

    pub fn error_fraction(&self, v: f64) -> f64 {
        let (hi, lo) = ordered(self.mean_plus, self.mean_minus);
        error_fraction(v, hi, lo, self.xi)
    }

    pub fn accepts(&self, v: f64) -> bool {
        v.abs() >= self.v_0
    }
}

/// `P(v ≥ x)` for the readout Gaussian centered at `mean`.
fn upper_tail(x: f64, mean: f64, sigma: f64) -> f64 {
    0.5 * erfc((x - mean) / sigma * FRAC_1_SQRT_2)
}

/// Closed-form `E`, `P` and `Q` for acceptance `|v| ≥ v₀`.
pub fn decision_stats(v_0: f64, mean_plus: f64, mean_minus: f64, xi: f64) -> Result<DecisionStats> {
    check_inputs(v_0, xi)?;
    let (hi, lo) = ordered(mean_plus, mean_minus);
    let sigma = readout_sigma(xi);
    // P(v ≤ -v₀ | m) = P(v ≥ v₀ | -m)
    let hi_right = upper_tail(v_0, hi, sigma);
    let hi_wrong = upper_tail(v_0, -hi, sigma);
    let lo_right = upper_tail(v_0, -lo, sigma);
    let lo_wrong = upper_tail(v_0, lo, sigma);
    let p = 0.5 * (hi_right + hi_wrong + lo_right + lo_wrong);
    let e = 0.5 * (hi_wrong + lo_wrong);
    if !(p >= MIN_ACCEPTANCE) {
        return Err(ScwError::EmptyAcceptance { p });
    }
    Ok(DecisionStats {
        v_0,
        mean_plus: hi,
        mean_minus: lo,
        xi,
        e,
        p,
        q: e / p,
    })
}

/// `E` and `P` from adaptive quadrature of the profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureStats {
    pub e: f64,
    pub p: f64,
    pub abs_error: f64,
}

/// Integration reach beyond the outermost mean, in standard deviations.
pub const TAIL_SIGMAS: f64 = 10.0;

/// Quadrature route to `E` and `P`: integrates `1 - g` and the wrong-bit
/// density over `[v₀, U]` and `[-U, -v₀]` with `U = max|m| + 10σ`. The
/// neglected tail mass is below `erfc(10/√2)/2 ≈ 8e-24` per branch.
pub fn decision_stats_quadrature(
    v_0: f64,
    mean_plus: f64,
    mean_minus: f64,
    xi: f64,
    tol: Tolerance,
) -> Result<QuadratureStats> {
    check_inputs(v_0, xi)?;
    let (hi, lo) = ordered(mean_plus, mean_minus);
    let sigma = readout_sigma(xi);
    let upper = hi.abs().max(lo.abs()).max(v_0) + TAIL_SIGMAS * sigma;
    let half = |v: f64, m: f64| 0.5 * quadrature_pdf(v, m, xi);

    let pos_accept = quad::integrate(|v| half(v, hi) + half(v, lo), v_0, upper, tol);
    let neg_accept = quad::integrate(|v| half(v, hi) + half(v, lo), -upper, -v_0, tol);
    let pos_wrong = quad::integrate(|v| half(v, lo), v_0, upper, tol);
    let neg_wrong = quad::integrate(|v| half(v, hi), -upper, -v_0, tol);
    let tail = 2.0 * upper_tail(TAIL_SIGMAS, 0.0, 1.0);
    Ok(QuadratureStats {
        e: pos_wrong.value + neg_wrong.value,
        p: pos_accept.value + neg_accept.value,
        abs_error: pos_accept.abs_error
            + neg_accept.abs_error
            + pos_wrong.abs_error
            + neg_wrong.abs_error
            + tail,
    })
}

fn check_inputs(v_0: f64, xi: f64) -> Result<()> {
    if !(v_0 >= 0.0) {
        return Err(domain("v_0", v_0, "v_0 >= 0"));
    }
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(domain("xi", xi, "xi >= 0"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_is_normalized() {
        for &(m, xi) in &[(0.0, 0.0), (0.7, 0.1), (-2.0, 1.5)] {
            let s = readout_sigma(xi);
            let r = quad::integrate(
                |v| quadrature_pdf(v, m, xi),
                m - 14.0 * s,
                m + 14.0 * s,
                Tolerance::default(),
            );
            assert!((r.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vacuum_variance_without_excess_noise() {
        assert_eq!(readout_sigma(0.0).powi(2), VACUUM_VARIANCE);
        let var = quad::integrate(
            |v| v * v * quadrature_pdf(v, 0.0, 0.0),
            -8.0,
            8.0,
            Tolerance::default(),
        );
        assert!((var.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pdf_peak_value() {
        let xi = 0.3;
        let peak = quadrature_pdf(1.2, 1.2, xi);
        assert!((peak - (2.0 / (PI * 1.3)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn midpoint_is_a_coin_flip() {
        let p = erasure_error_profiles(0.0, 0.4, -0.4, 0.1);
        assert_eq!(p.e, 0.5);
    }

    #[test]
    fn far_on_the_correct_side_has_no_errors() {
        let p = erasure_error_profiles(50.0, 0.4, -0.4, 0.1);
        assert!(p.e < 1e-30);
        assert!(p.underflow);
        assert!(!p.e.is_nan());
    }

    #[test]
    fn error_fraction_matches_density_ratio() {
        // m = ±0.5, Ξ = 0, v = 0.5: ln ratio = 8·m·v = 2
        let prof = erasure_error_profiles(0.5, 0.5, -0.5, 0.0);
        let expected = 1.0 / (1.0 + 2f64.exp());
        assert!((prof.e - expected).abs() < 1e-15);
        let right = quadrature_pdf(0.5, 0.5, 0.0);
        let wrong = quadrature_pdf(0.5, -0.5, 0.0);
        assert!((prof.e - wrong / (right + wrong)).abs() < 1e-15);
        assert!((prof.one_minus_g - 0.5 * (right + wrong)).abs() < 1e-15);
    }

    #[test]
    fn indistinguishable_states_give_half_qber() {
        let s = decision_stats(0.0, 0.2, 0.2, 0.1).unwrap();
        assert!((s.q - 0.5).abs() < 1e-15);
        assert!((s.p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn huge_threshold_aborts() {
        assert!(matches!(
            decision_stats(200.0, 0.5, -0.5, 0.0),
            Err(ScwError::EmptyAcceptance { .. })
        ));
    }

    #[test]
    fn zero_threshold_error_is_gaussian_tail() {
        let m = 0.35;
        let s = decision_stats(0.0, m, -m, 0.0).unwrap();
        // σ = 1/2, so P(v < 0 | m) = erfc(m/(σ√2))/2 = erfc(√2 m)/2
        let tail = 0.5 * erfc(2f64.sqrt() * m);
        assert!((s.q - tail).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for &(v0, m, xi) in &[(0.0, 0.3, 0.0), (0.8, 1.1, 0.2), (2.5, 0.2, 0.05)] {
            let c = decision_stats(v0, m, -m, xi).unwrap();
            let q = decision_stats_quadrature(v0, m, -m, xi, Tolerance::default()).unwrap();
            assert!((c.p - q.p).abs() < 1e-11, "P {} vs {}", c.p, q.p);
            assert!((c.e - q.e).abs() < 1e-11, "E {} vs {}", c.e, q.e);
        }
    }

    #[test]
    fn negative_threshold_rejected() {
        assert!(decision_stats(-0.1, 0.5, -0.5, 0.0).is_err());
    }
}
