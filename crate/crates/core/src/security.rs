//! Holevo bound for direct reconciliation and the asymptotic key rate.
//!
//! Eve holds a copy of Alice's multimode state, so her information on a bit
//! is bounded by the Holevo quantity of the two-state ensemble
//! `{|ψ(0)⟩, |ψ(π)⟩}`. Its eigenvalues are `(1 ± |⟨ψ(0)|ψ(π)⟩|)/2`.

use serde::{Deserialize, Serialize};

use crate::angular::d00;
use crate::error::{domain, Result, ScwError};
use crate::noise::{self, ChannelModel, DecisionStats};
use crate::optics::{self, SystemParams, TunableParams};
use crate::quad::{self, Tolerance};

/// `-x log₂ x - (1-x) log₂(1-x)` with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain("probability", x, "0 <= x <= 1"));
    }
    Ok(entropy(x))
}

pub(crate) fn entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -(x * x.log2() + (1.0 - x) * (-x).ln_1p() * std::f64::consts::LOG2_E)
}

/// `⟨ψ(0)|ψ(π)⟩ = exp[-μ₀ (1 - d^S_{00}(2β_A))]`.
///
/// `2β_A` may exceed π; `d^S_{00}` is continued analytically as `P_S(cos x)`.
pub fn state_overlap(mu_0: f64, beta_a: f64, sidebands: u32) -> Result<f64> {
    if !(mu_0 >= 0.0 && mu_0.is_finite()) {
        return Err(domain("mu_0", mu_0, "mu_0 >= 0"));
    }
    if !beta_a.is_finite() {
        return Err(domain("beta_A", beta_a, "finite angle"));
    }
    Ok((-mu_0 * (1.0 - d00(sidebands, 2.0 * beta_a))).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityQuantities {
    pub overlap: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    /// `χ_DR = h(λ₂)`.
    pub chi_dr: f64,
}

pub fn security_quantities(mu_0: f64, beta_a: f64, sidebands: u32) -> Result<SecurityQuantities> {
    let overlap = state_overlap(mu_0, beta_a, sidebands)?;
    // 1 - overlap without cancellation for small μ₀
    let gap = -(-mu_0 * (1.0 - d00(sidebands, 2.0 * beta_a))).exp_m1();
    let lambda_2 = 0.5 * gap;
    let lambda_1 = 1.0 - lambda_2;
    Ok(SecurityQuantities {
        overlap,
        lambda_1,
        lambda_2,
        chi_dr: entropy(lambda_2),
    })
}

pub fn holevo_dr(mu_0: f64, beta_a: f64, sidebands: u32) -> Result<f64> {
    Ok(security_quantities(mu_0, beta_a, sidebands)?.chi_dr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    Secure,
    /// The signed integral is not positive; the reported rate is clamped to 0.
    Insecure,
    /// Post-selection leaves nothing to integrate.
    Aborted,
}

/// Evaluation of a key-rate integral at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRate {
    /// Secret key rate in bit/s, clamped at zero.
    pub rate: f64,
    /// The integral before clamping.
    pub signed_rate: f64,
    pub status: RateStatus,
    pub chi: f64,
    pub stats: Option<DecisionStats>,
}

impl KeyRate {
    pub fn is_secure(&self) -> bool {
        self.status == RateStatus::Secure
    }
}

/// Integration conventions shared by the asymptotic and finite-key rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOptions {
    /// Integrate both accepted branches `v ≥ v₀` and `v ≤ -v₀`. Without it
    /// only the positive branch counts, halving a symmetric rate.
    pub symmetric_doubling: bool,
    /// Reach of the integration beyond the outermost mean, in σ.
    pub tail_sigmas: f64,
    pub tolerance: Tolerance,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            symmetric_doubling: true,
            tail_sigmas: 12.0,
            tolerance: Tolerance {
                abs: 1e-16,
                rel: 1e-11,
                max_intervals: 4000,
            },
        }
    }
}

/// Integrates `(1 - g(v))/(N T) · bracket(e(v))` over the acceptance region.
pub(crate) fn integrate_rate<B>(
    tun: &TunableParams,
    sys: &SystemParams,
    ch: &ChannelModel,
    chi: f64,
    opts: &RateOptions,
    bracket: B,
) -> Result<KeyRate>
where
    B: Fn(f64) -> f64,
{
    tun.validate()?;
    ch.validate()?;
    let eta = ch.transmittance();
    let (m0, m1) = optics::signal_means(tun, sys, eta)?;
    let stats = match noise::decision_stats(tun.v_0, m0, m1, ch.xi) {
        Ok(s) => s,
        Err(ScwError::EmptyAcceptance { .. }) => {
            return Ok(KeyRate {
                rate: 0.0,
                signed_rate: 0.0,
                status: RateStatus::Aborted,
                chi,
                stats: None,
            })
        }
        Err(e) => return Err(e),
    };
    let (hi, lo) = (stats.mean_plus, stats.mean_minus);
    let xi = ch.xi;
    let upper = hi.abs().max(lo.abs()).max(tun.v_0) + opts.tail_sigmas * ch.sigma();
    let integrand = |v: f64| {
        let density =
            0.5 * (noise::quadrature_pdf(v, hi, xi) + noise::quadrature_pdf(v, lo, xi));
        if density == 0.0 {
            return 0.0;
        }
        density * bracket(noise::error_fraction(v, hi, lo, xi))
    };
    let mut total = quad::integrate(integrand, tun.v_0, upper, opts.tolerance).value;
    if opts.symmetric_doubling {
        total += quad::integrate(integrand, -upper, -tun.v_0, opts.tolerance).value;
    }
    let signed_rate = total / sys.symbol_time();
    let secure = signed_rate > 0.0;
    Ok(KeyRate {
        rate: if secure { signed_rate } else { 0.0 },
        signed_rate,
        status: if secure {
            RateStatus::Secure
        } else {
            RateStatus::Insecure
        },
        chi,
        stats: Some(stats),
    })
}

/// `K = ∫ (1 - g)/(N T) [1 - h(e(v)) - χ_DR] dv` over `|v| ≥ v₀`.
pub fn asymptotic_key_rate(
    tun: &TunableParams,
    sys: &SystemParams,
    ch: &ChannelModel,
) -> Result<KeyRate> {
    asymptotic_key_rate_with(tun, sys, ch, &RateOptions::default())
}

pub fn asymptotic_key_rate_with(
    tun: &TunableParams,
    sys: &SystemParams,
    ch: &ChannelModel,
    opts: &RateOptions,
) -> Result<KeyRate> {
    let chi = holevo_dr(tun.mu_0, tun.beta_a, sys.sidebands)?;
    integrate_rate(tun, sys, ch, chi, opts, |e| 1.0 - entropy(e) - chi)
}
