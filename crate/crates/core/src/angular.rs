//! Wigner d-function rows and the modulation-index to mixing-angle map.
//!
//! Phase modulation with `S` sideband pairs acts on the carrier like a
//! rotation of a spin-`S` system: the carrier amplitude is spread over the
//! sidebands `k = -S..=S` with weights `d^S_{0k}(β)`.
//!
//! Sign convention is Varshalovich (equivalently Wigner's formula with the
//! Condon–Shortley phase): `d^j_{m'm}(β) = <j m'| exp(-iβJ_y) |j m>`, so that
//! for `j = 1`
//!
//! ```text
//! d^1_{0,-1} = -sin β / √2,   d^1_{00} = cos β,   d^1_{0,1} = sin β / √2.
//! ```

use crate::error::{domain, Result, ScwError};

/// Largest sideband count evaluated with the explicit factorial sum. Above
/// this the row comes from the associated-Legendre recursion.
pub const CLOSED_FORM_MAX_SIDEBANDS: u32 = 10;

const UNITARITY_LIMIT: f64 = 1e-9;

/// The row `d^S_{0k}(β)` for `k = -S..=S`.
#[derive(Debug, Clone, PartialEq)]
pub struct DRow {
    sidebands: u32,
    beta: f64,
    values: Vec<f64>,
}

impl DRow {
    pub fn sidebands(&self) -> u32 {
        self.sidebands
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Values ordered by `k` from `-S` to `S`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `d^S_{0k}`; panics if `|k| > S`.
    pub fn get(&self, k: i32) -> f64 {
        let s = self.sidebands as i32;
        assert!(k.abs() <= s, "sideband index {k} outside -{s}..={s}");
        self.values[(k + s) as usize]
    }

    /// `(k, d^S_{0k})` pairs in increasing `k`.
    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        let s = self.sidebands as i32;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i as i32 - s, v))
    }

    /// `Σ_k d_{0k}²`, which is one for an exact row.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Mixing angle for modulation index `m` with `S` sideband pairs:
/// `cos β = 1 - (m / (S + 1/2))² / 2`, dispersion neglected.
pub fn beta_from_index(m: f64, sidebands: u32) -> Result<f64> {
    let half = sidebands as f64 + 0.5;
    if !(m >= 0.0 && m <= 2.0 * half) {
        return Err(domain("modulation index", m, "0 <= m <= 2(S + 1/2)"));
    }
    let ratio = m / half;
    let cos_beta = 1.0 - 0.5 * ratio * ratio;
    Ok(cos_beta.clamp(-1.0, 1.0).acos())
}

/// Inverse of [`beta_from_index`].
pub fn index_from_beta(beta: f64, sidebands: u32) -> Result<f64> {
    check_beta(beta)?;
    let half = sidebands as f64 + 0.5;
    // 1 - cos β = 2 sin²(β/2)
    Ok(2.0 * half * (0.5 * beta).sin())
}

/// The row `d^S_{0k}(β)` for `β ∈ [0, π]`.
pub fn wigner_d_row(sidebands: u32, beta: f64) -> Result<DRow> {
    check_beta(beta)?;
    let row = if sidebands <= CLOSED_FORM_MAX_SIDEBANDS {
        closed_form_row(sidebands, beta)
    } else {
        recursive_row(sidebands, beta)
    };
    let drift = (row.norm_sqr() - 1.0).abs();
    if drift > UNITARITY_LIMIT {
        return Err(ScwError::Internal(format!(
            "d-row for S = {sidebands}, β = {beta} has Σd² - 1 = {drift:e}"
        )));
    }
    Ok(row)
}

/// Row from the explicit Wigner sum. Exact to rounding for small `S`.
pub fn closed_form_row(sidebands: u32, beta: f64) -> DRow {
    let j = sidebands as i64;
    let fact = factorials(2 * sidebands as usize);
    let (sh, ch) = (0.5 * beta).sin_cos();
    let mut values = Vec::with_capacity(2 * sidebands as usize + 1);
    for k in -j..=j {
        let prefactor =
            (fact[j as usize] * fact[j as usize] * fact[(j + k) as usize] * fact[(j - k) as usize])
                .sqrt();
        let mut sum = 0.0;
        for s in k.max(0)..=j.min(j + k) {
            let denom = fact[(j + k - s) as usize]
                * fact[s as usize]
                * fact[(s - k) as usize]
                * fact[(j - s) as usize];
            let sign = if (s - k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let cos_pow = (2 * j + k - 2 * s) as i32;
            let sin_pow = (2 * s - k) as i32;
            sum += sign / denom * ch.powi(cos_pow) * sh.powi(sin_pow);
        }
        values.push(prefactor * sum);
    }
    DRow {
        sidebands,
        beta,
        values,
    }
}

/// Row from the normalized associated-Legendre recursion in degree at fixed
/// order, `d^S_{0k}(β) = (-1)^k √((S-k)!/(S+k)!) P_S^k(cos β)`.
pub fn recursive_row(sidebands: u32, beta: f64) -> DRow {
    let l_max = sidebands as usize;
    let (y, x) = beta.sin_cos();
    let mut values = vec![0.0; 2 * l_max + 1];
    // diagonal term N_k^k, carried along as k increases
    let mut diag = 1.0;
    for k in 0..=l_max {
        if k > 0 {
            let kf = k as f64;
            diag *= -((2.0 * kf - 1.0) / (2.0 * kf)).sqrt() * y;
        }
        let normalized = legendre_column(k, l_max, x, diag);
        let d_pos = if k % 2 == 0 { normalized } else { -normalized };
        values[l_max + k] = d_pos;
        // d_{0,-k} = (-1)^k d_{0k}
        values[l_max - k] = normalized;
    }
    DRow {
        sidebands,
        beta,
        values,
    }
}

/// Runs `N_l^k` up from `l = k` to `l_max` and returns `N_{l_max}^k`.
fn legendre_column(k: usize, l_max: usize, x: f64, diag: f64) -> f64 {
    if l_max == k {
        return diag;
    }
    let kf = k as f64;
    let mut prev = diag;
    let mut cur = x * (2.0 * kf + 1.0).sqrt() * diag;
    for l in (k + 2)..=l_max {
        let lf = l as f64;
        let next = ((2.0 * lf - 1.0) * x * cur - ((lf - 1.0).powi(2) - kf * kf).sqrt() * prev)
            / (lf * lf - kf * kf).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `d^S_{00}(β) = P_S(cos β)` for any real angle.
///
/// This is the analytic continuation used when the argument leaves `[0, π]`,
/// as in the state overlap `d^S_{00}(2β_A)`.
pub fn d00(sidebands: u32, beta: f64) -> f64 {
    legendre_p(sidebands, beta.cos())
}

/// Legendre polynomial `P_n(x)` by Bonnet's recursion.
pub fn legendre_p(n: u32, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut p0, mut p1) = (1.0, x);
            for l in 1..n {
                let lf = l as f64;
                let p2 = ((2.0 * lf + 1.0) * x * p1 - lf * p0) / (lf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=std::f64::consts::PI).contains(&beta) {
        Ok(())
    } else {
        Err(domain("beta", beta, "0 <= beta <= pi"))
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 1.0;
    out.push(acc);
    for i in 1..=n {
        acc *= i as f64;
        out.push(acc);
    }
    out
}
