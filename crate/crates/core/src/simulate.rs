//! Round-level Monte Carlo of the protocol.
//!
//! Each round Alice picks one of four phases, Bob one of two bases, and the
//! readout is drawn from the Gaussian quadrature distribution around the
//! model mean. Rounds are generated in fixed-size chunks; chunk `i` draws from
//! ChaCha8 stream `i` of the run seed, so the result depends on the seed and
//! the round count only, not on the thread count.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, ScwError};
use crate::noise::{self, ChannelModel};
use crate::optics::{self, SystemParams, TunableParams};
use crate::par::{map_indexed, Execution};

/// Rounds per RNG stream.
pub const CHUNK_ROUNDS: u64 = 1 << 16;

/// Two-sided z used for the reported confidence intervals.
pub const CONFIDENCE_Z: f64 = 3.0;

/// `|z|` at or above which [`compare_analytic`] reports a mismatch.
pub const MISMATCH_Z: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    X,
    P,
}

impl Basis {
    fn phase(self) -> f64 {
        match self {
            Basis::X => 0.0,
            Basis::P => FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Index of Alice's state; her phase is `alice_state · π/2`.
    pub alice_state: u8,
    pub alice_phase: f64,
    pub alice_basis: Basis,
    pub bob_basis: Basis,
    /// Readout, oriented so that Alice's bit-0 states have a negative mean.
    pub v_sample: f64,
    pub sift_kept: bool,
    pub accepted: bool,
    pub alice_bit: u8,
    pub bob_bit: Option<u8>,
}

impl RoundRecord {
    pub fn is_error(&self) -> bool {
        self.bob_bit.is_some_and(|b| b != self.alice_bit)
    }
}

/// Readout means for every (Alice state, Bob basis) pair, in Bob's
/// orientation.
#[derive(Debug, Clone, Copy)]
struct RoundModel {
    means: [[f64; 2]; 4],
    sigma: f64,
    v_0: f64,
}

impl RoundModel {
    fn new(tun: &TunableParams, sys: &SystemParams, ch: &ChannelModel) -> Result<Self> {
        tun.validate()?;
        sys.validate()?;
        ch.validate()?;
        let eta = ch.transmittance();
        let orientation = -optics::readout_polarity(tun, sys)?;
        let mut means = [[0.0; 2]; 4];
        for (state, row) in means.iter_mut().enumerate() {
            let phi_a = state as f64 * FRAC_PI_2;
            for (b, basis) in [Basis::X, Basis::P].into_iter().enumerate() {
                row[b] = orientation * optics::quadrature_mean(tun, sys, eta, phi_a, basis.phase())?;
            }
        }
        Ok(Self {
            means,
            sigma: ch.sigma(),
            v_0: tun.v_0,
        })
    }

    fn round<R: Rng>(&self, rng: &mut R) -> RoundRecord {
        let state: u8 = rng.random_range(0..4);
        let bob_basis = if rng.random::<bool>() { Basis::P } else { Basis::X };
        let z: f64 = rng.sample(StandardNormal);
        let alice_basis = if state.is_multiple_of(2) { Basis::X } else { Basis::P };
        let b = match bob_basis {
            Basis::X => 0,
            Basis::P => 1,
        };
        let v = self.means[state as usize][b] + self.sigma * z;
        let sift_kept = alice_basis == bob_basis;
        let accepted = sift_kept && v.abs() >= self.v_0;
        RoundRecord {
            alice_state: state,
            alice_phase: state as f64 * FRAC_PI_2,
            alice_basis,
            bob_basis,
            v_sample: v,
            sift_kept,
            accepted,
            alice_bit: u8::from(state >= 2),
            bob_bit: accepted.then_some(u8::from(v >= 0.0)),
        }
    }
}

/// Counters of a run plus a running variance of the sifted readout around
/// its model mean.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    rounds: u64,
    sifted: u64,
    accepted: u64,
    errors: u64,
    residual_mean: f64,
    residual_m2: f64,
}

impl Tally {
    fn push(&mut self, r: &RoundRecord, model_mean: f64) {
        self.rounds += 1;
        if !r.sift_kept {
            return;
        }
        self.sifted += 1;
        let x = r.v_sample - model_mean;
        let d = x - self.residual_mean;
        self.residual_mean += d / self.sifted as f64;
        self.residual_m2 += d * (x - self.residual_mean);
        if r.accepted {
            self.accepted += 1;
            self.errors += u64::from(r.is_error());
        }
    }

    fn merge(self, other: Tally) -> Tally {
        let n = self.sifted + other.sifted;
        let (mean, m2) = if n == 0 {
            (0.0, 0.0)
        } else {
            let (na, nb) = (self.sifted as f64, other.sifted as f64);
            let d = other.residual_mean - self.residual_mean;
            (
                self.residual_mean + d * nb / n as f64,
                self.residual_m2 + other.residual_m2 + d * d * na * nb / n as f64,
            )
        };
        Tally {
            rounds: self.rounds + other.rounds,
            sifted: n,
            accepted: self.accepted + other.accepted,
            errors: self.errors + other.errors,
            residual_mean: mean,
            residual_m2: m2,
        }
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunk_count(count: u64) -> u64 {
    count.div_ceil(CHUNK_ROUNDS)
}

fn chunk_len(count: u64, chunk: u64) -> u64 {
    (count - chunk * CHUNK_ROUNDS).min(CHUNK_ROUNDS)
}

/// A binomial confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval for `successes` out of `trials` at `z` standard
/// deviations. `[0, 1]` when there are no trials.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Interval {
        lo: (center - half).clamp(0.0, p),
        hi: (center + half).clamp(p, 1.0),
    }
}

/// Tallies of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub rounds: u64,
    pub sifted: u64,
    pub accepted: u64,
    pub errors: u64,
    /// Fraction of rounds with matching bases.
    pub sift_rate: f64,
    pub sift_rate_ci: Interval,
    /// Fraction of sifted rounds that pass the threshold, `P̂`.
    pub accept_rate: f64,
    pub accept_rate_ci: Interval,
    /// Error fraction among accepted rounds, `Q̂`; zero if none passed.
    pub qber: f64,
    pub qber_ci: Interval,
    /// Sample variance of the sifted readouts around their model means.
    pub readout_variance: f64,
    pub seed: u64,
    pub chunk_rounds: u64,
    pub chunks: u64,
}

impl EmpiricalStats {
    fn from_tally(t: &Tally, seed: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        EmpiricalStats {
            rounds: t.rounds,
            sifted: t.sifted,
            accepted: t.accepted,
            errors: t.errors,
            sift_rate: ratio(t.sifted, t.rounds),
            sift_rate_ci: wilson_interval(t.sifted, t.rounds, CONFIDENCE_Z),
            accept_rate: ratio(t.accepted, t.sifted),
            accept_rate_ci: wilson_interval(t.accepted, t.sifted, CONFIDENCE_Z),
            qber: ratio(t.errors, t.accepted),
            qber_ci: wilson_interval(t.errors, t.accepted, CONFIDENCE_Z),
            readout_variance: if t.sifted > 1 {
                t.residual_m2 / (t.sifted - 1) as f64
            } else {
                f64::NAN
            },
            seed,
            chunk_rounds: CHUNK_ROUNDS,
            chunks: chunk_count(t.rounds),
        }
    }
}

/// Simulates `count` rounds with the default execution.
pub fn simulate_rounds(
    count: u64,
    tun: &TunableParams,
    sys: &SystemParams,
    ch: &ChannelModel,
    seed: u64,
) -> Result<EmpiricalStats> {
    simulate_rounds_with(count, tun, sys, ch, seed, Execution::default())
}

pub fn simulate_rounds_with(
    count: u64,
    tun: &TunableParams,
    sys: &SystemParams,
    ch: &ChannelModel,
    seed: u64,
    execution: Execution,
) -> Result<EmpiricalStats> {
    if count == 0 {
        return Err(domain("rounds", 0.0, "rounds >= 1"));
    }
    let model = RoundModel::new(tun, sys, ch)?;
    let chunks = chunk_count(count);
    let len = usize::try_from(chunks).map_err(|_| domain("rounds", count as f64, "fewer chunks than usize::MAX"))?;
    let tallies = map_indexed(len, execution, |i| {
        let chunk = i as u64;
        let mut rng = chunk_rng(seed, chunk);
        let mut tally = Tally::default();
        for _ in 0..chunk_len(count, chunk) {
            let r = model.round(&mut rng);
            let b = usize::from(r.bob_basis == Basis::P);
            tally.push(&r, model.means[r.alice_state as usize][b]);
        }
        tally
    });
    let total = tallies.into_iter().fold(Tally::default(), Tally::merge);
    Ok(EmpiricalStats::from_tally(&total, seed))
}

/// The first `count` rounds of the run that [`simulate_rounds`] would tally
/// for the same seed.
pub fn trace_rounds(
    count: u64,
    tun: &TunableParams,
    sys: &SystemParams,
    ch: &ChannelModel,
    seed: u64,
) -> Result<Vec<RoundRecord>> {
    let model = RoundModel::new(tun, sys, ch)?;
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    for chunk in 0..chunk_count(count) {
        let mut rng = chunk_rng(seed, chunk);
        for _ in 0..chunk_len(count, chunk) {
            out.push(model.round(&mut rng));
        }
    }
    Ok(out)
}

/// Simulated versus analytic post-selection statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub q_hat: f64,
    pub q: f64,
    pub z_q: f64,
    pub p_hat: f64,
    pub p: f64,
    pub z_p: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl ComparisonReport {
    pub fn verdict(&self) -> Result<()> {
        if self.passed {
            return Ok(());
        }
        let mut failing = Vec::new();
        if !(self.z_q.abs() < self.threshold) {
            failing.push(format!("Q̂ = {} vs Q = {} (z = {:.2})", self.q_hat, self.q, self.z_q));
        }
        if !(self.z_p.abs() < self.threshold) {
            failing.push(format!("P̂ = {} vs P = {} (z = {:.2})", self.p_hat, self.p, self.z_p));
        }
        Err(ScwError::Mismatch(failing.join("; ")))
    }
}

/// Binomial z-score of `hat` from `trials` draws against probability `p`.
fn binomial_z(hat: f64, p: f64, trials: u64) -> f64 {
    let sd = (p * (1.0 - p) / trials as f64).sqrt();
    if sd > 0.0 {
        (hat - p) / sd
    } else if hat == p {
        0.0
    } else {
        f64::INFINITY
    }
}

/// z-scores of `Q̂` and `P̂` against the closed-form post-selection statistics
/// at the same parameters. Passes iff both are below [`MISMATCH_Z`] in size.
pub fn compare_analytic(
    stats: &EmpiricalStats,
    tun: &TunableParams,
    sys: &SystemParams,
    ch: &ChannelModel,
) -> Result<ComparisonReport> {
    let (m0, m1) = optics::signal_means(tun, sys, ch.transmittance())?;
    let (p, q) = match noise::decision_stats(tun.v_0, m0, m1, ch.xi) {
        Ok(s) => (s.p, s.q),
        Err(ScwError::EmptyAcceptance { p }) => (p, 0.5),
        Err(e) => return Err(e),
    };
    let z_p = binomial_z(stats.accept_rate, p, stats.sifted.max(1));
    let z_q = if stats.accepted == 0 {
        0.0
    } else {
        binomial_z(stats.qber, q, stats.accepted)
    };
    Ok(ComparisonReport {
        q_hat: stats.qber,
        q,
        z_q,
        p_hat: stats.accept_rate,
        p,
        z_p,
        threshold: MISMATCH_Z,
        passed: z_q.abs() < MISMATCH_Z && z_p.abs() < MISMATCH_Z,
    })
}
