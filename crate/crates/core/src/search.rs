//! Key-rate maximization per operating point and loss sweeps.
//!
//! The decision vector is `(μ₀, β_A, v₀)`; `δ` always comes from
//! [`calibrate_delta`](crate::optics::calibrate_delta). The sample size `k`
//! only ever subtracts from the finite-key length, so it sits at its lower
//! bound. The search maps the box to the unit cube (logarithmic in `μ₀`,
//! `v₀` in units of the readout σ), ranks a coarse grid, and refines the best
//! grid cells plus a few seeded random points with a projected Nelder–Mead.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScwError};
use crate::finitekey::{finite_key_rate_with, FiniteKeyConfig};
use crate::noise::ChannelModel;
use crate::optics::{SystemParams, TunableParams};
use crate::par::{map_indexed, Execution};
use crate::security::{asymptotic_key_rate_with, KeyRate, RateOptions, RateStatus};

const DIM: usize = 3;
type Point = [f64; DIM];

/// Relative rate difference below which two optima count as tied.
const TIE_REL: f64 = 1e-9;

/// Box bounds of the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBounds {
    pub mu_0: (f64, f64),
    pub beta_a: (f64, f64),
    /// Threshold range in units of the readout standard deviation.
    pub v_0_sigmas: (f64, f64),
    /// Parameter-estimation sample size used by finite-key objectives.
    pub k_sample: u64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            mu_0: (1e-3, 10.0),
            beta_a: (0.01, std::f64::consts::FRAC_PI_2 - 1e-3),
            v_0_sigmas: (0.0, 6.0),
            k_sample: 0,
        }
    }
}

impl SearchBounds {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !(ordered(self.mu_0) && self.mu_0.0 > 0.0) {
            return Err(ScwError::Config(format!(
                "mu_0 bounds {:?} must satisfy 0 < lo < hi",
                self.mu_0
            )));
        }
        if !(ordered(self.beta_a)
            && self.beta_a.0 > 0.0
            && self.beta_a.1 < std::f64::consts::FRAC_PI_2)
        {
            return Err(ScwError::Config(format!(
                "beta_A bounds {:?} must satisfy 0 < lo < hi < pi/2",
                self.beta_a
            )));
        }
        if !(ordered(self.v_0_sigmas) && self.v_0_sigmas.0 >= 0.0) {
            return Err(ScwError::Config(format!(
                "v_0 bounds {:?} must satisfy 0 <= lo < hi",
                self.v_0_sigmas
            )));
        }
        Ok(())
    }
}

/// Coarse-grid resolution per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub mu_0: usize,
    pub beta_a: usize,
    pub v_0: usize,
}

impl Default for GridSize {
    fn default() -> Self {
        Self {
            mu_0: 9,
            beta_a: 9,
            v_0: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub bounds: SearchBounds,
    pub grid: GridSize,
    /// Local refinements per point; `random_starts` of them start from seeded
    /// uniform draws, the rest from the best grid cells.
    pub starts: usize,
    pub random_starts: usize,
    pub seed: u64,
    /// Evaluation budget of one local refinement.
    pub max_evals: usize,
    /// Simplex size (unit-cube coordinates) at which a refinement stops.
    pub xtol: f64,
    pub rate: RateOptions,
    /// Extra starting points refined in addition to `starts`.
    pub warm_starts: Vec<TunableParams>,
    pub execution: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            bounds: SearchBounds::default(),
            grid: GridSize::default(),
            starts: 8,
            random_starts: 2,
            seed: 0,
            max_evals: 3000,
            xtol: 1e-9,
            rate: RateOptions::default(),
            warm_starts: Vec::new(),
            execution: Execution::default(),
        }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        let g = self.grid;
        if g.mu_0 < 2 || g.beta_a < 2 || g.v_0 < 2 {
            return Err(ScwError::Config(
                "grid needs at least 2 points per axis".into(),
            ));
        }
        if self.starts == 0 || self.random_starts > self.starts {
            return Err(ScwError::Config(format!(
                "need 1 <= starts and random_starts <= starts (got {} and {})",
                self.starts, self.random_starts
            )));
        }
        if self.max_evals < 10 * DIM || !(self.xtol > 0.0) {
            return Err(ScwError::Config("refinement budget too small".into()));
        }
        Ok(())
    }
}

/// What to maximize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Asymptotic,
    Finite { n: u64, config: FiniteKeyConfig },
}

impl Objective {
    pub fn block_size(&self) -> BlockSize {
        match self {
            Objective::Asymptotic => BlockSize::Infinite,
            Objective::Finite { n, .. } => BlockSize::Finite(*n),
        }
    }

    pub fn evaluate(
        &self,
        tun: &TunableParams,
        sys: &SystemParams,
        ch: &ChannelModel,
        opts: &RateOptions,
    ) -> Result<KeyRate> {
        match self {
            Objective::Asymptotic => asymptotic_key_rate_with(tun, sys, ch, opts),
            Objective::Finite { n, config } => finite_key_rate_with(tun, sys, ch, config, *n, opts),
        }
    }
}

/// Sifted block size of a curve; `Infinite` selects the asymptotic rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockSize {
    Finite(u64),
    Infinite,
}

impl BlockSize {
    pub fn objective(self, config: FiniteKeyConfig) -> Objective {
        match self {
            BlockSize::Finite(n) => Objective::Finite { n, config },
            BlockSize::Infinite => Objective::Asymptotic,
        }
    }
}

impl fmt::Display for BlockSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockSize::Finite(n) => write!(f, "{n}"),
            BlockSize::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for BlockSize {
    type Err = ScwError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(BlockSize::Infinite);
        }
        let n = s
            .parse::<f64>()
            .ok()
            .filter(|n| *n >= 1.0 && n.fract() == 0.0 && *n < 2f64.powi(64))
            .ok_or_else(|| ScwError::Config(format!("block size {s:?} is not a positive integer or \"inf\"")))?;
        Ok(BlockSize::Finite(n as u64))
    }
}

impl Serialize for BlockSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BlockSize::Finite(n) => s.serialize_u64(*n),
            BlockSize::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for BlockSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = BlockSize;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or \"inf\"")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<BlockSize, E> {
                if v == 0 {
                    return Err(E::custom("block size must be positive"));
                }
                Ok(BlockSize::Finite(v))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<BlockSize, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom("block size must be positive"))
                    .and_then(|v| self.visit_u64(v))
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<BlockSize, E> {
                BlockSize::from_str(&v.to_string()).map_err(E::custom)
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<BlockSize, E> {
                BlockSize::from_str(v).map_err(E::custom)
            }
        }
        d.deserialize_any(Visitor)
    }
}

/// Result of [`optimize_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub params: TunableParams,
    pub rate: KeyRate,
    /// Objective evaluations spent.
    pub evaluations: usize,
}

struct Problem<'a> {
    sys: &'a SystemParams,
    ch: &'a ChannelModel,
    objective: &'a Objective,
    opts: &'a SearchOptions,
    sigma: f64,
}

impl Problem<'_> {
    fn params(&self, u: &Point) -> Result<TunableParams> {
        let b = &self.opts.bounds;
        let (ml, mh) = (b.mu_0.0.log10(), b.mu_0.1.log10());
        let mu_0 = 10f64.powf(lerp(ml, mh, u[0]));
        let beta_a = lerp(b.beta_a.0, b.beta_a.1, u[1]);
        let v_0 = lerp(b.v_0_sigmas.0, b.v_0_sigmas.1, u[2]) * self.sigma;
        let mut tun = TunableParams::calibrated(mu_0, beta_a, v_0, self.sys)?;
        tun.k_sample = b.k_sample;
        Ok(tun)
    }

    fn coords(&self, tun: &TunableParams) -> Point {
        let b = &self.opts.bounds;
        let (ml, mh) = (b.mu_0.0.log10(), b.mu_0.1.log10());
        [
            unlerp(ml, mh, tun.mu_0.max(f64::MIN_POSITIVE).log10()),
            unlerp(b.beta_a.0, b.beta_a.1, tun.beta_a),
            unlerp(b.v_0_sigmas.0, b.v_0_sigmas.1, tun.v_0 / self.sigma),
        ]
    }

    fn evaluate(&self, tun: &TunableParams) -> Result<KeyRate> {
        self.objective.evaluate(tun, self.sys, self.ch, &self.opts.rate)
    }

    /// Signed rate, `-∞` where the model is undefined.
    fn value(&self, u: &Point) -> f64 {
        match self.params(u).and_then(|t| self.evaluate(&t)) {
            Ok(r) if r.signed_rate.is_finite() => r.signed_rate,
            _ => f64::NEG_INFINITY,
        }
    }
}

fn lerp(lo: f64, hi: f64, t: f64) -> f64 {
    lo + (hi - lo) * t
}

fn unlerp(lo: f64, hi: f64, x: f64) -> f64 {
    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

fn project(p: &mut Point) {
    for x in p.iter_mut() {
        *x = x.clamp(0.0, 1.0);
    }
}

struct Refined {
    point: Point,
    value: f64,
    evaluations: usize,
}

/// Projected Nelder–Mead maximizing `f` on the unit cube, restarted around
/// the incumbent until a restart no longer improves it.
fn refine<F: Fn(&Point) -> f64>(f: &F, start: Point, max_evals: usize, xtol: f64) -> Refined {
    let mut best = Refined {
        point: start,
        value: f(&start),
        evaluations: 1,
    };
    let mut step = 0.1;
    for _ in 0..6 {
        let budget = max_evals.saturating_sub(best.evaluations);
        if budget < 2 * DIM {
            break;
        }
        let run = nelder_mead(f, best.point, best.value, step, budget, xtol);
        let evaluations = best.evaluations + run.evaluations;
        let gain = run.value - best.value;
        let improved = gain > 1e-12 * best.value.abs().max(f64::MIN_POSITIVE);
        if run.value >= best.value {
            best = Refined {
                evaluations,
                ..run
            };
        } else {
            best.evaluations = evaluations;
        }
        if !improved && step <= 0.02 {
            break;
        }
        step = 0.02;
    }
    best
}

fn nelder_mead<F: Fn(&Point) -> f64>(
    f: &F,
    start: Point,
    start_value: f64,
    step: f64,
    max_evals: usize,
    xtol: f64,
) -> Refined {
    // minimize the negated objective
    let cost = |p: &Point| -f(p);
    let mut evals = 0usize;
    let mut simplex: Vec<(Point, f64)> = Vec::with_capacity(DIM + 1);
    simplex.push((start, -start_value));
    for i in 0..DIM {
        let mut p = start;
        p[i] += if p[i] + step <= 1.0 { step } else { -step };
        project(&mut p);
        evals += 1;
        simplex.push((p, cost(&p)));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best_p, best_c) = simplex[0];
        if best_c == f64::INFINITY {
            break;
        }
        let extent = simplex[1..]
            .iter()
            .flat_map(|(p, _)| p.iter().zip(best_p.iter()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if extent <= xtol {
            break;
        }

        let mut centroid = [0.0; DIM];
        for (p, _) in &simplex[..DIM] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / DIM as f64;
            }
        }
        let (worst_p, worst_c) = simplex[DIM];
        let along = |t: f64| {
            let mut p = [0.0; DIM];
            for i in 0..DIM {
                p[i] = centroid[i] + t * (worst_p[i] - centroid[i]);
            }
            project(&mut p);
            p
        };

        let reflected = along(-1.0);
        let reflected_c = cost(&reflected);
        evals += 1;
        let second_worst_c = simplex[DIM - 1].1;
        if reflected_c < best_c {
            let expanded = along(-2.0);
            let expanded_c = cost(&expanded);
            evals += 1;
            simplex[DIM] = if expanded_c < reflected_c {
                (expanded, expanded_c)
            } else {
                (reflected, reflected_c)
            };
            continue;
        }
        if reflected_c < second_worst_c {
            simplex[DIM] = (reflected, reflected_c);
            continue;
        }
        let (contracted, limit) = if reflected_c < worst_c {
            (along(-0.5), reflected_c)
        } else {
            (along(0.5), worst_c)
        };
        let contracted_c = cost(&contracted);
        evals += 1;
        if contracted_c < limit {
            simplex[DIM] = (contracted, contracted_c);
            continue;
        }
        for vertex in simplex.iter_mut().skip(1) {
            let mut p = [0.0; DIM];
            for i in 0..DIM {
                p[i] = best_p[i] + 0.5 * (vertex.0[i] - best_p[i]);
            }
            *vertex = (p, cost(&p));
            evals += 1;
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Refined {
        point: simplex[0].0,
        value: -simplex[0].1,
        evaluations: evals,
    }
}

/// `true` if `a` should replace `b`: a clearly higher rate, or a tied rate
/// with smaller `μ₀`, then smaller `v₀`.
fn preferred(a: (f64, &TunableParams), b: (f64, &TunableParams)) -> bool {
    let scale = a.0.abs().max(b.0.abs());
    if a.0.is_finite() && b.0.is_finite() && (a.0 - b.0).abs() <= TIE_REL * scale {
        (a.1.mu_0, a.1.v_0) < (b.1.mu_0, b.1.v_0)
    } else {
        a.0 > b.0
    }
}

/// Maximizes the signed rate of `objective` at one channel point.
///
/// Fails with [`ScwError::Infeasible`] when no tried point has a positive
/// rate; the error carries the best signed rate and its parameters.
pub fn optimize_point(
    ch: &ChannelModel,
    sys: &SystemParams,
    objective: &Objective,
    opts: &SearchOptions,
) -> Result<Optimum> {
    ch.validate()?;
    sys.validate()?;
    opts.validate()?;
    let problem = Problem {
        sys,
        ch,
        objective,
        opts,
        sigma: ch.sigma(),
    };
    let g = opts.grid;
    let axis = |i: usize, n: usize| i as f64 / (n - 1) as f64;
    let cells = g.mu_0 * g.beta_a * g.v_0;
    let grid_values = map_indexed(cells, opts.execution, |idx| {
        let (i, rest) = (idx / (g.beta_a * g.v_0), idx % (g.beta_a * g.v_0));
        let (j, k) = (rest / g.v_0, rest % g.v_0);
        let u = [axis(i, g.mu_0), axis(j, g.beta_a), axis(k, g.v_0)];
        (u, problem.value(&u))
    });

    let mut ranked: Vec<usize> = (0..cells).collect();
    ranked.sort_by(|&a, &b| grid_values[b].1.total_cmp(&grid_values[a].1).then(a.cmp(&b)));
    let mut starts: Vec<Point> = ranked
        .iter()
        .take(opts.starts - opts.random_starts)
        .map(|&i| grid_values[i].0)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        starts.push([rng.random(), rng.random(), rng.random()]);
    }
    starts.extend(opts.warm_starts.iter().map(|t| problem.coords(t)));

    let value = |u: &Point| problem.value(u);
    let runs = map_indexed(starts.len(), opts.execution, |i| {
        refine(&value, starts[i], opts.max_evals, opts.xtol)
    });

    let mut evaluations = cells;
    let mut best: Option<(f64, TunableParams)> = None;
    for run in &runs {
        evaluations += run.evaluations;
        let Ok(tun) = problem.params(&run.point) else {
            continue;
        };
        let take = match &best {
            None => true,
            Some((v, t)) => preferred((run.value, &tun), (*v, t)),
        };
        if take {
            best = Some((run.value, tun));
        }
    }
    let Some((_, params)) = best else {
        return Err(ScwError::Infeasible {
            best_rate: f64::NEG_INFINITY,
            best: None,
        });
    };
    let rate = problem.evaluate(&params)?;
    if rate.status != RateStatus::Secure {
        return Err(ScwError::Infeasible {
            best_rate: rate.signed_rate,
            best: Some(Box::new(params)),
        });
    }
    Ok(Optimum {
        params,
        rate,
        evaluations,
    })
}

/// Grid of a loss sweep. Reports come out curve-major: by noise level, then
/// block size, then loss.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub loss_grid: Vec<f64>,
    pub noise_levels: Vec<f64>,
    /// Block sizes, one curve each. Empty means the asymptotic curve only.
    pub n_values: Vec<BlockSize>,
    pub finite: FiniteKeyConfig,
    pub search: SearchOptions,
}

impl SweepSpec {
    pub fn asymptotic(loss_grid: Vec<f64>, noise_levels: Vec<f64>) -> Self {
        Self {
            loss_grid,
            noise_levels,
            n_values: vec![BlockSize::Infinite],
            finite: FiniteKeyConfig::default(),
            search: SearchOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn increasing<T: PartialOrd>(what: &str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                return Err(ScwError::Config(format!("{what} is empty")));
            }
            if v.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(ScwError::Config(format!("{what} is not strictly increasing")));
            }
            Ok(())
        }
        increasing("loss grid", &self.loss_grid)?;
        increasing("noise levels", &self.noise_levels)?;
        if !self.n_values.is_empty() {
            increasing("block sizes", &self.n_values)?;
        }
        if let Some(l) = self.loss_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(ScwError::Config(format!("loss {l} dB must be finite and >= 0")));
        }
        if let Some(x) = self.noise_levels.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(ScwError::Config(format!("excess noise {x} must be finite and >= 0")));
        }
        self.finite.validate()?;
        self.search.validate()
    }

    fn curves(&self) -> Vec<BlockSize> {
        if self.n_values.is_empty() {
            vec![BlockSize::Infinite]
        } else {
            self.n_values.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    /// No positive rate anywhere in the search box.
    NoKey,
    /// The point could not be evaluated.
    Failed,
}

impl fmt::Display for PointStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointStatus::Ok => "ok",
            PointStatus::NoKey => "no_key",
            PointStatus::Failed => "failed",
        })
    }
}

impl FromStr for PointStatus {
    type Err = ScwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(PointStatus::Ok),
            "no_key" => Ok(PointStatus::NoKey),
            "failed" => Ok(PointStatus::Failed),
            _ => Err(ScwError::Config(format!("unknown status {s:?}"))),
        }
    }
}

/// One optimized operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub loss_db: f64,
    pub xi: f64,
    pub n: BlockSize,
    /// Optimized rate in bit/s; zero unless `status` is `Ok`.
    pub rate: f64,
    pub signed_rate: f64,
    pub q: f64,
    pub p: f64,
    pub chi: f64,
    pub mu_0: f64,
    /// Derived sideband photon number `μ₀(1 - d^S_{00}(β_A)²)`.
    pub mu: f64,
    pub beta_a: f64,
    pub delta: f64,
    pub v_0: f64,
    pub k_sample: u64,
    pub status: PointStatus,
    pub message: Option<String>,
}

impl KeyRateReport {
    fn from_outcome(
        ch: &ChannelModel,
        n: BlockSize,
        sys: &SystemParams,
        outcome: &Result<Optimum>,
    ) -> Self {
        let mut report = KeyRateReport {
            loss_db: ch.loss_db,
            xi: ch.xi,
            n,
            rate: 0.0,
            signed_rate: f64::NAN,
            q: f64::NAN,
            p: f64::NAN,
            chi: f64::NAN,
            mu_0: f64::NAN,
            mu: f64::NAN,
            beta_a: f64::NAN,
            delta: f64::NAN,
            v_0: f64::NAN,
            k_sample: 0,
            status: PointStatus::Failed,
            message: None,
        };
        let fill_params = |r: &mut KeyRateReport, t: &TunableParams| {
            r.mu_0 = t.mu_0;
            r.mu = t.sideband_photons(sys);
            r.beta_a = t.beta_a;
            r.delta = t.delta;
            r.v_0 = t.v_0;
            r.k_sample = t.k_sample;
        };
        match outcome {
            Ok(opt) => {
                fill_params(&mut report, &opt.params);
                report.rate = opt.rate.rate;
                report.signed_rate = opt.rate.signed_rate;
                report.chi = opt.rate.chi;
                if let Some(s) = opt.rate.stats {
                    report.q = s.q;
                    report.p = s.p;
                }
                report.status = PointStatus::Ok;
            }
            Err(ScwError::Infeasible { best_rate, best }) => {
                report.signed_rate = *best_rate;
                if let Some(t) = best {
                    fill_params(&mut report, t);
                }
                report.status = PointStatus::NoKey;
                report.message = Some(outcome.as_ref().unwrap_err().to_string());
            }
            Err(e) => report.message = Some(e.to_string()),
        }
        report
    }

    pub fn params(&self) -> Option<TunableParams> {
        let t = TunableParams {
            mu_0: self.mu_0,
            beta_a: self.beta_a,
            delta: self.delta,
            v_0: self.v_0,
            k_sample: self.k_sample,
        };
        t.validate().ok().map(|_| t)
    }
}

#[derive(Clone)]
struct Slot {
    ch: ChannelModel,
    n: BlockSize,
    outcome: Result<Optimum>,
}

impl Slot {
    fn signed(&self) -> f64 {
        match &self.outcome {
            Ok(o) => o.rate.signed_rate,
            Err(ScwError::Infeasible { best_rate, .. }) => *best_rate,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn rate(&self) -> f64 {
        match &self.outcome {
            Ok(o) => o.rate.rate,
            _ => 0.0,
        }
    }

    fn params(&self) -> Option<TunableParams> {
        match &self.outcome {
            Ok(o) => Some(o.params),
            Err(ScwError::Infeasible { best, .. }) => best.as_deref().copied(),
            Err(_) => None,
        }
    }
}

/// Optimizes every `(Ξ, n, loss)` point of the grid.
///
/// Loss points run in parallel. Within one loss point the noise levels run
/// from noisiest to cleanest and block sizes from smallest to largest, each
/// warm-started from its neighbours' optima. A final pass re-optimizes any
/// point that a neighbour with an easier channel beats, warm-started from
/// that neighbour, so the curves are ordered whenever the search can find
/// the better optimum. Failures are recorded per point.
pub fn sweep(spec: &SweepSpec, sys: &SystemParams) -> Result<Vec<KeyRateReport>> {
    spec.validate()?;
    sys.validate()?;
    let curves = spec.curves();
    let (nl, nx, nn) = (spec.loss_grid.len(), spec.noise_levels.len(), curves.len());
    let index = |x: usize, c: usize, l: usize| (x * nn + c) * nl + l;

    let run = |ch: &ChannelModel, n: BlockSize, warm: Vec<TunableParams>| -> Result<Optimum> {
        let mut opts = spec.search.clone();
        opts.warm_starts.extend(warm);
        optimize_point(ch, sys, &n.objective(spec.finite), &opts)
    };

    let per_loss = map_indexed(nl, spec.search.execution, |l| {
        let loss = spec.loss_grid[l];
        let mut column: Vec<Option<Slot>> = vec![None; nx * nn];
        for x in (0..nx).rev() {
            for c in 0..nn {
                let slot = match ChannelModel::new(loss, spec.noise_levels[x]) {
                    Ok(ch) => {
                        let mut warm = Vec::new();
                        if x + 1 < nx {
                            warm.extend(column[(x + 1) * nn + c].as_ref().and_then(Slot::params));
                        }
                        if c > 0 {
                            warm.extend(column[x * nn + c - 1].as_ref().and_then(Slot::params));
                        }
                        Slot {
                            ch,
                            n: curves[c],
                            outcome: run(&ch, curves[c], warm),
                        }
                    }
                    Err(e) => Slot {
                        ch: ChannelModel {
                            loss_db: loss,
                            xi: spec.noise_levels[x],
                        },
                        n: curves[c],
                        outcome: Err(e),
                    },
                };
                column[x * nn + c] = Some(slot);
            }
        }
        column
    });

    let mut slots: Vec<Option<Slot>> = vec![None; nl * nx * nn];
    for (l, column) in per_loss.into_iter().enumerate() {
        for (k, slot) in column.into_iter().enumerate() {
            slots[index(k / nn, k % nn, l)] = slot;
        }
    }
    let mut slots: Vec<Slot> = slots.into_iter().map(|s| s.expect("every slot filled")).collect();

    // (easier, harder, strict): the easier channel must beat the harder one
    let mut dominance = Vec::new();
    for x in 0..nx {
        for c in 0..nn {
            for l in 1..nl {
                dominance.push((index(x, c, l - 1), index(x, c, l), false));
            }
        }
    }
    for x in 1..nx {
        for c in 0..nn {
            for l in 0..nl {
                dominance.push((index(x - 1, c, l), index(x, c, l), true));
            }
        }
    }
    for x in 0..nx {
        for (c, n) in curves.iter().enumerate().skip(1) {
            if *n == BlockSize::Infinite {
                continue;
            }
            for l in 0..nl {
                dominance.push((index(x, c, l), index(x, c - 1, l), true));
            }
        }
    }

    for _ in 0..8 {
        let mut changed = false;
        for &(easy, hard, strict) in &dominance {
            let (re, rh) = (slots[easy].rate(), slots[hard].rate());
            let violated = rh > 0.0 && if strict { re <= rh } else { re < rh };
            if !violated {
                continue;
            }
            let Some(warm) = slots[hard].params() else {
                continue;
            };
            let s = &slots[easy];
            let retry = run(&s.ch, s.n, vec![warm]);
            let gain = match &retry {
                Ok(o) => o.rate.signed_rate > s.signed(),
                Err(_) => false,
            };
            if gain {
                slots[easy].outcome = retry;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    Ok(slots
        .iter()
        .map(|s| KeyRateReport::from_outcome(&s.ch, s.n, sys, &s.outcome))
        .collect())
}
