//! State preparation at Alice, re-modulation at Bob, the carrier/sideband
//! power split and the normalized quadrature readout.
//!
//! Bob's modulator rotates the received multimode state once more; the
//! combined rotation angle `β'` decides how much power is left on the
//! carrier arm (`n₂`) versus the sideband arm (`n₁`) of the detector. The
//! photocurrent difference, normalized by the carrier acting as local
//! oscillator, is the quadrature readout `v`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::angular::{d00, wigner_d_row};
use crate::error::{domain, Result, ScwError};

/// Fixed hardware and protocol constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Transmission window `T` in seconds.
    pub period_s: f64,
    /// Transmittance of Bob's module, `η_B`.
    pub eta_bob: f64,
    /// Carrier attenuation factor `ϑ` of the spectral filter.
    pub carrier_attenuation: f64,
    /// Modulator phase offset `φ₀` in radians.
    pub phase_offset: f64,
    /// Number of sideband pairs `S`.
    pub sidebands: u32,
    /// Detector sensitivity `s` (dimensionless gain of the readout).
    pub sensitivity: f64,
    /// Number of bases `N`; the protocol uses two.
    pub bases: u32,
    /// Constant modulator phases `θ₁`, `θ₂` in radians.
    pub theta_1: f64,
    pub theta_2: f64,
    /// Optical and microwave frequencies in Hz. Metadata only.
    pub optical_frequency_hz: Option<f64>,
    pub microwave_frequency_hz: Option<f64>,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            period_s: 100e-9,
            eta_bob: 10f64.powf(-0.64),
            carrier_attenuation: 1e-6,
            phase_offset: 5f64.to_radians(),
            sidebands: 1,
            sensitivity: 3.0,
            bases: 2,
            theta_1: 0.0,
            theta_2: 0.0,
            optical_frequency_hz: None,
            microwave_frequency_hz: None,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.period_s > 0.0 && self.period_s.is_finite()) {
            return Err(domain("T", self.period_s, "T > 0"));
        }
        if !(self.eta_bob > 0.0 && self.eta_bob <= 1.0) {
            return Err(domain("eta_B", self.eta_bob, "0 < eta_B <= 1"));
        }
        if !(0.0..=1.0).contains(&self.carrier_attenuation) {
            return Err(domain(
                "carrier attenuation",
                self.carrier_attenuation,
                "0 <= theta <= 1",
            ));
        }
        if !(self.sensitivity > 0.0 && self.sensitivity.is_finite()) {
            return Err(domain("sensitivity", self.sensitivity, "s > 0"));
        }
        if self.bases != 2 {
            return Err(domain("N", self.bases as f64, "N = 2"));
        }
        for (what, v) in [
            ("phi_0", self.phase_offset),
            ("theta_1", self.theta_1),
            ("theta_2", self.theta_2),
        ] {
            if !v.is_finite() {
                return Err(domain(what, v, "finite phase"));
            }
        }
        Ok(())
    }

    /// `N·T`, the time per sifted symbol.
    pub fn symbol_time(&self) -> f64 {
        self.bases as f64 * self.period_s
    }
}

/// The optimizer's decision vector plus the derived modulation ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunableParams {
    /// Carrier mean photon number `μ₀`.
    pub mu_0: f64,
    /// Alice's mixing angle `β_A` in radians.
    pub beta_a: f64,
    /// `δ = β_B / β_A`, fixed by [`calibrate_delta`].
    pub delta: f64,
    /// Post-selection threshold `v₀`.
    pub v_0: f64,
    /// Parameter-estimation sample size `k` (finite-key only).
    pub k_sample: u64,
}

impl TunableParams {
    /// Builds the parameters with `δ` taken from the calibration condition.
    pub fn calibrated(mu_0: f64, beta_a: f64, v_0: f64, sys: &SystemParams) -> Result<Self> {
        let delta = calibrate_delta(beta_a, sys)?;
        Ok(Self {
            mu_0,
            beta_a,
            delta,
            v_0,
            k_sample: 0,
        })
    }

    pub fn beta_b(&self) -> f64 {
        self.delta * self.beta_a
    }

    /// Mean photon number in the sidebands, `μ = μ₀(1 - d^S_{00}(β_A)²)`.
    pub fn sideband_photons(&self, sys: &SystemParams) -> f64 {
        let c = d00(sys.sidebands, self.beta_a);
        self.mu_0 * (1.0 - c * c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_0 >= 0.0 && self.mu_0.is_finite()) {
            return Err(domain("mu_0", self.mu_0, "mu_0 >= 0"));
        }
        if !(0.0..=PI).contains(&self.beta_a) {
            return Err(domain("beta_A", self.beta_a, "0 <= beta_A <= pi"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(domain("delta", self.delta, "delta > 0"));
        }
        if !(self.v_0 >= 0.0) {
            return Err(domain("v_0", self.v_0, "v_0 >= 0"));
        }
        Ok(())
    }
}

/// Product of coherent states over the modes `k = -S..=S`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodeState {
    sidebands: u32,
    amplitudes: Vec<Complex64>,
}

impl MultimodeState {
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, k: i32) -> Complex64 {
        self.amplitudes[(k + self.sidebands as i32) as usize]
    }

    /// `Σ_k |α_k|²`.
    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Alice's modulator output `α_k = √μ₀ d^S_{0k}(β_A) e^{-i(θ₁+φ_A)k}`.
pub fn alice_state(
    mu_0: f64,
    beta_a: f64,
    phi_a: f64,
    sys: &SystemParams,
) -> Result<MultimodeState> {
    if !(mu_0 >= 0.0) {
        return Err(domain("mu_0", mu_0, "mu_0 >= 0"));
    }
    let row = wigner_d_row(sys.sidebands, beta_a)?;
    let root = mu_0.sqrt();
    let amplitudes = row
        .iter()
        .map(|(k, d)| Complex64::from_polar(root * d, -(sys.theta_1 + phi_a) * k as f64))
        .collect();
    Ok(MultimodeState {
        sidebands: sys.sidebands,
        amplitudes,
    })
}

/// Combined rotation angle after Bob's modulator,
/// `cos β' = cos β_A cos β_B - sin β_A sin β_B cos Δφ`.
pub fn beta_prime(beta_a: f64, beta_b: f64, delta_phi: f64) -> Result<f64> {
    let (sa, ca) = beta_a.sin_cos();
    let (sb, cb) = beta_b.sin_cos();
    let c = ca * cb - sa * sb * delta_phi.cos();
    if c.abs() > 1.0 + 1e-12 {
        return Err(ScwError::Internal(format!(
            "cos β' = {c} outside [-1, 1]"
        )));
    }
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Small-angle form `β' ≈ β_A √(δ² + 2δ cos Δφ + 1)`. Diagnostic only.
pub fn beta_prime_small_angle(beta_a: f64, delta: f64, delta_phi: f64) -> f64 {
    beta_a * (delta * delta + 2.0 * delta * delta_phi.cos() + 1.0).max(0.0).sqrt()
}

/// Relative phase entering the interference: `φ_A - φ_B + φ₀`.
pub fn relative_phase(phi_a: f64, phi_b: f64, sys: &SystemParams) -> f64 {
    phi_a - phi_b + sys.phase_offset
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonNumbers {
    /// Sideband arm.
    pub n1: f64,
    /// Carrier arm.
    pub n2: f64,
}

impl PhotonNumbers {
    pub fn difference(&self) -> f64 {
        self.n1 - self.n2
    }
}

/// Mean photon numbers at the two detector arms for one transmission window.
pub fn detector_photon_numbers(
    tun: &TunableParams,
    sys: &SystemParams,
    eta: f64,
    phi_a: f64,
    phi_b: f64,
) -> Result<PhotonNumbers> {
    photons_at_relative_phase(tun, sys, eta, relative_phase(phi_a, phi_b, sys))
}

pub(crate) fn photons_at_relative_phase(
    tun: &TunableParams,
    sys: &SystemParams,
    eta: f64,
    delta_phi: f64,
) -> Result<PhotonNumbers> {
    let bp = beta_prime(tun.beta_a, tun.beta_b(), delta_phi)?;
    let d = d00(sys.sidebands, bp);
    let total = tun.mu_0 * eta * sys.eta_bob;
    let n2 = total * (1.0 - sys.carrier_attenuation) * d * d;
    Ok(PhotonNumbers { n1: total - n2, n2 })
}

/// Carrier photons before Bob's modulator, `n_LO = μ₀ η |d^S_{00}(β_A)|²`.
pub fn local_oscillator_photons(tun: &TunableParams, sys: &SystemParams, eta: f64) -> f64 {
    let c = d00(sys.sidebands, tun.beta_a);
    tun.mu_0 * eta * c * c
}

/// Normalized quadrature mean `v = (n₁ - n₂) s / (2 √n_LO)`.
pub fn quadrature_mean(
    tun: &TunableParams,
    sys: &SystemParams,
    eta: f64,
    phi_a: f64,
    phi_b: f64,
) -> Result<f64> {
    quadrature_mean_at(tun, sys, eta, relative_phase(phi_a, phi_b, sys))
}

/// [`quadrature_mean`] as a function of the total relative phase.
pub fn quadrature_mean_at(
    tun: &TunableParams,
    sys: &SystemParams,
    eta: f64,
    delta_phi: f64,
) -> Result<f64> {
    if tun.mu_0 == 0.0 || eta == 0.0 {
        return Ok(0.0);
    }
    let n_lo = local_oscillator_photons(tun, sys, eta);
    // a carrier suppressed to rounding level leaves no phase reference
    if !(d00(sys.sidebands, tun.beta_a).abs() > 1e-12 && n_lo > 0.0) {
        return Err(ScwError::Degenerate(format!(
            "no carrier left for the local oscillator (β_A = {})",
            tun.beta_a
        )));
    }
    let p = photons_at_relative_phase(tun, sys, eta, delta_phi)?;
    Ok(p.difference() * sys.sensitivity / (2.0 * n_lo.sqrt()))
}

/// Readout means for Alice's two states of the `x` basis, `(φ_A = 0, φ_A = π)`
/// with `φ_B = 0`. The `p` basis gives the same pair.
pub fn signal_means(tun: &TunableParams, sys: &SystemParams, eta: f64) -> Result<(f64, f64)> {
    Ok((
        quadrature_mean(tun, sys, eta, 0.0, 0.0)?,
        quadrature_mean(tun, sys, eta, PI, 0.0)?,
    ))
}

/// Bob's readout orientation: `+1` when Alice's phase-0 state lands on the
/// positive side. Bob flips his readout by this sign so that her "0" states
/// read negative.
pub fn readout_polarity(tun: &TunableParams, sys: &SystemParams) -> Result<f64> {
    let p = photons_at_relative_phase(tun, sys, 1.0, relative_phase(0.0, 0.0, sys))?;
    Ok(if p.difference() >= 0.0 { 1.0 } else { -1.0 })
}

/// Upper end of the scanned calibration bracket.
pub const DELTA_SCAN_MAX: f64 = 10.0;
const DELTA_SCAN_POINTS: usize = 400;

/// Solves for `δ` so that Alice's two states in a matched basis give readout
/// means of equal size and opposite sign:
/// `(n₁ - n₂)(0, 0) + (n₁ - n₂)(π, 0) = 0`.
///
/// Takes the smallest root in `(0, 10]`. The residual is scaled by
/// `μ₀ η η_B`, so the result does not depend on those.
pub fn calibrate_delta(beta_a: f64, sys: &SystemParams) -> Result<f64> {
    if !(beta_a > 0.0 && beta_a < PI / 2.0) {
        return Err(domain("beta_A", beta_a, "0 < beta_A < pi/2"));
    }
    let unit = TunableParams {
        mu_0: 1.0,
        beta_a,
        delta: 1.0,
        v_0: 0.0,
        k_sample: 0,
    };
    let phase_0 = relative_phase(0.0, 0.0, sys);
    let phase_pi = relative_phase(PI, 0.0, sys);
    let residual = |delta: f64| -> Result<(f64, f64)> {
        let t = TunableParams { delta, ..unit };
        let a = photons_at_relative_phase(&t, sys, 1.0, phase_0)?.difference();
        let b = photons_at_relative_phase(&t, sys, 1.0, phase_pi)?.difference();
        Ok((a + b, a))
    };

    let step = DELTA_SCAN_MAX / DELTA_SCAN_POINTS as f64;
    let mut lo = step * 1e-3;
    let (mut r_lo, _) = residual(lo)?;
    for i in 1..=DELTA_SCAN_POINTS {
        let hi = step * i as f64;
        let (r_hi, _) = residual(hi)?;
        if r_lo == 0.0 {
            return Ok(lo);
        }
        if r_lo.signum() != r_hi.signum() {
            let (mut a, mut b, mut fa) = (lo, hi, r_lo);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let (fm, _) = residual(mid)?;
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            let root = 0.5 * (a + b);
            let (r, separation) = residual(root)?;
            if r.abs() > 1e-10 || separation == 0.0 {
                return Err(ScwError::Internal(format!(
                    "calibration root δ = {root} leaves residual {r:e}"
                )));
            }
            return Ok(root);
        }
        lo = hi;
        r_lo = r_hi;
    }
    Err(ScwError::NoRoot {
        lo: 0.0,
        hi: DELTA_SCAN_MAX,
    })
}
