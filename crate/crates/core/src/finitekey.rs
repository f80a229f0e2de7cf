//! Finite-key length and rate: smooth min-entropy correction, syndrome and
//! verification-hash leakage, privacy-amplification loss.
//!
//! All entropies and ε-terms are in bits.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, ScwError};
use crate::noise::{self, ChannelModel};
use crate::optics::{self, SystemParams, TunableParams};
use crate::security::{self, entropy, holevo_dr, KeyRate, RateOptions};

/// How the error-correction syndrome length is accounted for inside the rate
/// integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyndromeModel {
    /// Per-readout leakage `f_EC h(e(v) + ΔQ)`: a decoder that uses the
    /// reliability of every bit. Reduces to the asymptotic rate as `n → ∞`
    /// when `f_EC = 1` and `ΔQ = 0`.
    #[default]
    Soft,
    /// Block leakage `⌈n f_EC h(Q_est + ΔQ)⌉` with `Q_est` the post-selected
    /// bit error rate.
    Hard,
}

/// n-independent finite-key settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteKeyConfig {
    pub eps_s: f64,
    pub eps_pa: f64,
    /// Verification hash length; `ε_EC = 2^-check_EC`.
    pub check_ec_bits: u32,
    pub f_ec: f64,
    /// Error-rate margin `ΔQ` added before sizing the code.
    pub dq: f64,
    pub syndrome: SyndromeModel,
}

impl Default for FiniteKeyConfig {
    fn default() -> Self {
        Self {
            eps_s: 1e-10,
            eps_pa: 1e-10,
            check_ec_bits: 256,
            f_ec: 1.15,
            dq: 0.01,
            syndrome: SyndromeModel::Soft,
        }
    }
}

impl FiniteKeyConfig {
    pub fn validate(&self) -> Result<()> {
        check_eps("eps_s", self.eps_s)?;
        check_eps("eps_PA", self.eps_pa)?;
        if self.check_ec_bits == 0 {
            return Err(domain("check_EC", 0.0, "check_EC >= 1 bit"));
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(domain("f_EC", self.f_ec, "f_EC >= 1"));
        }
        if !(0.0..0.5).contains(&self.dq) {
            return Err(domain("dQ", self.dq, "0 <= dQ < 1/2"));
        }
        Ok(())
    }

    pub fn eps_ec(&self) -> f64 {
        eps_ec_from_check(self.check_ec_bits)
    }

    /// `loss_PA = log₂(1/ε_PA) - 2`.
    pub fn loss_pa(&self) -> f64 {
        -self.eps_pa.log2() - 2.0
    }

    /// `ε_QKD = ε_EC + ε_s + ε_PA`.
    pub fn eps_qkd(&self) -> f64 {
        self.eps_ec() + self.eps_s + self.eps_pa
    }

    pub fn block(&self, n: u64, q_est: f64, k_sample: u64) -> FiniteKeyParams {
        FiniteKeyParams {
            n,
            q_est,
            k_sample,
            config: *self,
        }
    }
}

/// A concrete block: sifted length, estimated QBER and sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteKeyParams {
    pub n: u64,
    pub q_est: f64,
    pub k_sample: u64,
    pub config: FiniteKeyConfig,
}

impl FiniteKeyParams {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.n == 0 || self.k_sample >= self.n {
            return Err(domain("k_sample", self.k_sample as f64, "0 <= k < n"));
        }
        if !(self.q_est >= 0.0 && self.q_est + self.config.dq < 0.5) {
            return Err(domain("Q_est + dQ", self.q_est + self.config.dq, "< 1/2"));
        }
        Ok(())
    }
}

pub fn eps_ec_from_check(check_ec_bits: u32) -> f64 {
    2f64.powi(-(check_ec_bits as i32))
}

/// Hash length needed for a correctness error of at most `eps_ec`.
pub fn check_from_eps_ec(eps_ec: f64) -> Result<u32> {
    check_eps("eps_EC", eps_ec)?;
    Ok((-eps_ec.log2()).ceil() as u32)
}

fn check_eps(what: &'static str, eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(domain(what, eps, "0 < eps < 1"))
    }
}

/// `δ(ε_s) = 4 log₂(2 + √2) √(log₂(2/ε_s²))`, the per-√n smoothing penalty.
pub fn smoothing_correction(eps_s: f64) -> Result<f64> {
    check_eps("eps_s", eps_s)?;
    let log_term = 1.0 - 2.0 * eps_s.log2();
    Ok(4.0 * (2.0 + std::f64::consts::SQRT_2).log2() * log_term.sqrt())
}

/// `code_EC = ⌈n f_EC h(Q_est + ΔQ)⌉`.
pub fn ec_syndrome_length(n: u64, q_est: f64, dq: f64, f_ec: f64) -> Result<u64> {
    let q = q_est + dq;
    if !(q_est >= 0.0 && dq >= 0.0 && q < 0.5) {
        return Err(domain("Q_est + dQ", q, "0 <= Q_est + dQ < 1/2"));
    }
    Ok((n as f64 * f_ec * entropy(q)).ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLength {
    /// Extractable key length, floored at zero.
    pub bits: u64,
    /// The length before flooring.
    pub signed_bits: f64,
    pub aborted: bool,
}

/// `l = n(1 - χ - δ(ε_s)/√n) - k - code_EC - check_EC - loss_PA`, using
/// `H(A|E) ≥ 1 - χ_DR`.
pub fn finite_key_length(fk: &FiniteKeyParams, chi: f64) -> Result<KeyLength> {
    fk.validate()?;
    if !(0.0..=1.0).contains(&chi) {
        return Err(domain("chi", chi, "0 <= chi <= 1"));
    }
    let cfg = &fk.config;
    let n = fk.n as f64;
    let code = ec_syndrome_length(fk.n, fk.q_est, cfg.dq, cfg.f_ec)? as f64;
    let signed = n * (1.0 - chi) - smoothing_correction(cfg.eps_s)? * n.sqrt()
        - fk.k_sample as f64
        - code
        - cfg.check_ec_bits as f64
        - cfg.loss_pa();
    let aborted = !(signed > 0.0);
    Ok(KeyLength {
        bits: if aborted { 0 } else { signed.floor() as u64 },
        signed_bits: signed,
        aborted,
    })
}

/// Finite-key rate for `n` sifted bits:
///
/// ```text
/// R = ∫ (1-g)/(N T) · (1 - χ - δ(ε_s)/√n
///        - (k + code_EC + log₂(1/ε_EC) + log₂(1/ε_PA) - 2)/n) dv
/// ```
///
/// over the acceptance region. `k` is `tun.k_sample`; `code_EC/n` follows
/// [`SyndromeModel`]. Same doubling and clamping as the asymptotic rate.
pub fn finite_key_rate(
    tun: &TunableParams,
    sys: &SystemParams,
    ch: &ChannelModel,
    cfg: &FiniteKeyConfig,
    n: u64,
) -> Result<KeyRate> {
    finite_key_rate_with(tun, sys, ch, cfg, n, &RateOptions::default())
}

pub fn finite_key_rate_with(
    tun: &TunableParams,
    sys: &SystemParams,
    ch: &ChannelModel,
    cfg: &FiniteKeyConfig,
    n: u64,
    opts: &RateOptions,
) -> Result<KeyRate> {
    cfg.validate()?;
    if n == 0 || tun.k_sample >= n {
        return Err(domain("k_sample", tun.k_sample as f64, "0 <= k < n"));
    }
    let chi = holevo_dr(tun.mu_0, tun.beta_a, sys.sidebands)?;
    let nf = n as f64;
    let fixed = 1.0
        - chi
        - smoothing_correction(cfg.eps_s)? / nf.sqrt()
        - (tun.k_sample as f64 + cfg.check_ec_bits as f64 + cfg.loss_pa()) / nf;
    match cfg.syndrome {
        SyndromeModel::Soft => security::integrate_rate(tun, sys, ch, chi, opts, |e| {
            fixed - cfg.f_ec * entropy((e + cfg.dq).min(0.5))
        }),
        SyndromeModel::Hard => {
            let (m0, m1) = optics::signal_means(tun, sys, ch.transmittance())?;
            let q_est = match noise::decision_stats(tun.v_0, m0, m1, ch.xi) {
                Ok(stats) => stats.q,
                // the shared integrator reports the abort
                Err(ScwError::EmptyAcceptance { .. }) => 0.5,
                Err(e) => return Err(e),
            };
            let q = (q_est + cfg.dq).min(0.5);
            let code = (nf * cfg.f_ec * entropy(q)).ceil() / nf;
            security::integrate_rate(tun, sys, ch, chi, opts, |_| fixed - code)
        }
    }
}
