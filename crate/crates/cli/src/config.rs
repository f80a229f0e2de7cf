//! Run configuration: a TOML file of `[section]` tables with `key = value`
//! pairs. Every key is optional; unknown keys are rejected. Angles are in
//! degrees.
//!
//! ```toml
//! seed = 7
//!
//! [system]
//! period_s = 1e-7
//! eta_bob = 0.2291          # 10^-0.64
//! carrier_attenuation = 1e-6
//! phase_offset_deg = 5.0
//! sidebands = 1
//! sensitivity = 3.0
//!
//! [channel]
//! loss_db = [0.0, 1.0, 2.0]
//! xi = [0.0, 0.1, 0.2]
//!
//! [search]
//! mu_0_min = 1e-3
//! mu_0_max = 10.0
//! v_0_max_sigmas = 6.0
//! starts = 8
//!
//! [finite_key]
//! n = [1e8, 1e10, "inf"]
//! eps_s = 1e-10
//! f_ec = 1.15
//! syndrome = "soft"
//!
//! [tunables]                # fixed operating point for `simulate`
//! mu_0 = 1.5
//! beta_a_deg = 23.5
//! v_0 = 1.6
//!
//! [output]                  # default paths when --out is absent
//! sweep = "rates.csv"
//! keyrate = "point.json"
//! simulate = "mc.json"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use scw_qkd::search::{GridSize, SearchBounds};
use scw_qkd::{
    BlockSize, FiniteKeyConfig, Result as CoreResult, SearchOptions, SweepSpec,
    SyndromeModel, SystemParams, TunableParams,
};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    channel: RawChannel,
    #[serde(default)]
    search: RawSearch,
    #[serde(default)]
    finite_key: RawFiniteKey,
    tunables: Option<RawTunables>,
    #[serde(default)]
    output: OutputPaths,
}

/// Default output files per command.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub sweep: Option<PathBuf>,
    pub keyrate: Option<PathBuf>,
    pub simulate: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    period_s: Option<f64>,
    eta_bob: Option<f64>,
    carrier_attenuation: Option<f64>,
    phase_offset_deg: Option<f64>,
    sidebands: Option<u32>,
    sensitivity: Option<f64>,
    bases: Option<u32>,
    theta_1_deg: Option<f64>,
    theta_2_deg: Option<f64>,
    optical_frequency_hz: Option<f64>,
    microwave_frequency_hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    loss_db: Option<Vec<f64>>,
    xi: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    mu_0_min: Option<f64>,
    mu_0_max: Option<f64>,
    beta_a_min_deg: Option<f64>,
    beta_a_max_deg: Option<f64>,
    v_0_min_sigmas: Option<f64>,
    v_0_max_sigmas: Option<f64>,
    k_sample: Option<u64>,
    grid_mu_0: Option<usize>,
    grid_beta_a: Option<usize>,
    grid_v_0: Option<usize>,
    starts: Option<usize>,
    random_starts: Option<usize>,
    max_evals: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFiniteKey {
    n: Option<Vec<BlockSize>>,
    eps_s: Option<f64>,
    eps_pa: Option<f64>,
    check_ec_bits: Option<u32>,
    f_ec: Option<f64>,
    dq: Option<f64>,
    syndrome: Option<SyndromeModel>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTunables {
    mu_0: f64,
    beta_a_deg: f64,
    v_0: f64,
    #[serde(default)]
    k_sample: u64,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub system: SystemParams,
    pub loss_db: Vec<f64>,
    pub xi: Vec<f64>,
    pub n_values: Vec<BlockSize>,
    pub finite: FiniteKeyConfig,
    pub search: SearchOptions,
    pub tunables: Option<TunableParams>,
    pub output: OutputPaths,
    /// Verbatim file contents, embedded in outputs.
    pub source: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> std::result::Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        Self::from_raw(raw, text.to_owned()).map_err(|e| e.to_string())
    }

    pub fn defaults() -> Self {
        Self::from_raw(RawConfig::default(), String::new()).expect("defaults are valid")
    }

    fn from_raw(raw: RawConfig, source: String) -> CoreResult<Self> {
        let d = SystemParams::default();
        let s = raw.system;
        let system = SystemParams {
            period_s: s.period_s.unwrap_or(d.period_s),
            eta_bob: s.eta_bob.unwrap_or(d.eta_bob),
            carrier_attenuation: s.carrier_attenuation.unwrap_or(d.carrier_attenuation),
            phase_offset: s.phase_offset_deg.map_or(d.phase_offset, f64::to_radians),
            sidebands: s.sidebands.unwrap_or(d.sidebands),
            sensitivity: s.sensitivity.unwrap_or(d.sensitivity),
            bases: s.bases.unwrap_or(d.bases),
            theta_1: s.theta_1_deg.map_or(d.theta_1, f64::to_radians),
            theta_2: s.theta_2_deg.map_or(d.theta_2, f64::to_radians),
            optical_frequency_hz: s.optical_frequency_hz,
            microwave_frequency_hz: s.microwave_frequency_hz,
        };
        system.validate()?;

        let fd = FiniteKeyConfig::default();
        let f = raw.finite_key;
        let finite = FiniteKeyConfig {
            eps_s: f.eps_s.unwrap_or(fd.eps_s),
            eps_pa: f.eps_pa.unwrap_or(fd.eps_pa),
            check_ec_bits: f.check_ec_bits.unwrap_or(fd.check_ec_bits),
            f_ec: f.f_ec.unwrap_or(fd.f_ec),
            dq: f.dq.unwrap_or(fd.dq),
            syndrome: f.syndrome.unwrap_or(fd.syndrome),
        };
        finite.validate()?;

        let bd = SearchBounds::default();
        let r = raw.search;
        let od = SearchOptions::default();
        let gd = GridSize::default();
        let search = SearchOptions {
            bounds: SearchBounds {
                mu_0: (r.mu_0_min.unwrap_or(bd.mu_0.0), r.mu_0_max.unwrap_or(bd.mu_0.1)),
                beta_a: (
                    r.beta_a_min_deg.map_or(bd.beta_a.0, f64::to_radians),
                    r.beta_a_max_deg.map_or(bd.beta_a.1, f64::to_radians),
                ),
                v_0_sigmas: (
                    r.v_0_min_sigmas.unwrap_or(bd.v_0_sigmas.0),
                    r.v_0_max_sigmas.unwrap_or(bd.v_0_sigmas.1),
                ),
                k_sample: r.k_sample.unwrap_or(bd.k_sample),
            },
            grid: GridSize {
                mu_0: r.grid_mu_0.unwrap_or(gd.mu_0),
                beta_a: r.grid_beta_a.unwrap_or(gd.beta_a),
                v_0: r.grid_v_0.unwrap_or(gd.v_0),
            },
            starts: r.starts.unwrap_or(od.starts),
            random_starts: r.random_starts.unwrap_or(od.random_starts),
            max_evals: r.max_evals.unwrap_or(od.max_evals),
            seed: raw.seed.unwrap_or(0),
            ..od
        };
        search.validate()?;

        let loss_db = raw
            .channel
            .loss_db
            .unwrap_or_else(|| (0..40).map(|i| 0.25 * i as f64).collect());
        let xi = raw.channel.xi.unwrap_or_else(|| vec![0.1]);
        let n_values = f.n.unwrap_or_else(|| vec![BlockSize::Infinite]);
        let spec = SweepSpec {
            loss_grid: loss_db.clone(),
            noise_levels: xi.clone(),
            n_values: n_values.clone(),
            finite,
            search: search.clone(),
        };
        spec.validate()?;

        let tunables = match raw.tunables {
            None => None,
            Some(t) => {
                let mut tun = TunableParams::calibrated(t.mu_0, t.beta_a_deg.to_radians(), t.v_0, &system)?;
                tun.k_sample = t.k_sample;
                tun.validate()?;
                Some(tun)
            }
        };

        Ok(RunConfig {
            seed: raw.seed.unwrap_or(0),
            system,
            loss_db,
            xi,
            n_values,
            finite,
            search,
            tunables,
            output: raw.output,
            source,
        })
    }

    /// The sweep grid, with `seed` overriding the configured one.
    pub fn sweep_spec(&self, seed: u64) -> SweepSpec {
        let mut search = self.search.clone();
        search.seed = seed;
        SweepSpec {
            loss_grid: self.loss_db.clone(),
            noise_levels: self.xi.clone(),
            n_values: self.n_values.clone(),
            finite: self.finite,
            search,
        }
    }
}
