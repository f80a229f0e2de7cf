//! Key-rate pipeline for subcarrier-wave continuous-variable QKD.
//!
//! Alice phase-modulates an optical carrier so that part of its power moves
//! into sidebands; Bob modulates again and reads the sideband power
//! difference with a balanced detector. From the readout statistics this
//! crate computes the post-selected bit error rate, the Holevo bound on the
//! eavesdropper's information, and asymptotic and finite-key secret key
//! rates. It also optimizes those rates over the free parameters and checks
//! the analytics with a round-level Monte Carlo.
//!
//! ```
//! use scw_qkd::{asymptotic_key_rate, ChannelModel, SystemParams, TunableParams};
//!
//! let sys = SystemParams::default();
//! let tun = TunableParams::calibrated(10.0, 0.16, 1.7, &sys).unwrap();
//! let ch = ChannelModel::new(3.0, 0.1).unwrap();
//! let k = asymptotic_key_rate(&tun, &sys, &ch).unwrap();
//! assert!(k.rate > 0.0);
//! ```

// `!(x > y)` is used on purpose so that NaN fails every domain check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angular;
pub mod error;
pub mod finitekey;
pub mod noise;
pub mod optics;
pub mod par;
pub mod quad;
pub mod search;
pub mod security;
pub mod simulate;

pub use error::{Result, ScwError};
pub use finitekey::{finite_key_rate, FiniteKeyConfig, SyndromeModel};
pub use noise::{decision_stats, ChannelModel, DecisionStats};
pub use optics::{calibrate_delta, SystemParams, TunableParams};
pub use par::Execution;
pub use search::{optimize_point, sweep, BlockSize, KeyRateReport, Objective, SearchOptions, SweepSpec};
pub use security::{asymptotic_key_rate, holevo_dr, KeyRate, RateStatus};
pub use simulate::{compare_analytic, simulate_rounds, EmpiricalStats};
