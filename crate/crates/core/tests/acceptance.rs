//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p scw-qkd --test acceptance`.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scw_qkd::angular::wigner_d_row;
use scw_qkd::noise::decision_stats_quadrature;
use scw_qkd::quad::Tolerance;
use scw_qkd::search::{Optimum, PointStatus};
use scw_qkd::*;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn operating_optimum() -> Optimum {
    let ch = ChannelModel::new(3.0, 0.1).unwrap();
    optimize_point(&ch, &SystemParams::default(), &Objective::Asymptotic, &SearchOptions::default())
        .expect("key at 3 dB")
}

fn cutoff() -> Outcome {
    let sys = SystemParams::default();
    let loss: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
    let spec = SweepSpec::asymptotic(loss, vec![0.1]);
    let start = Instant::now();
    let reports = sweep(&spec, &sys).unwrap();
    let elapsed = start.elapsed();
    let first_dark = reports.iter().position(|r| r.status != PointStatus::Ok);
    let Some(i) = first_dark.filter(|&i| i > 0) else {
        return outcome(false, format!("no zero crossing on 0..9.75 dB ({elapsed:.1?})"));
    };
    let lit_before = reports[..i].iter().all(|r| r.rate > 0.0);
    let dark_after = reports[i..].iter().all(|r| r.rate == 0.0);
    let crossing = 0.5 * (reports[i - 1].loss_db + reports[i].loss_db);
    outcome(
        lit_before && dark_after && (7.5..=10.5).contains(&crossing) && elapsed <= Duration::from_secs(300),
        format!(
            "K = 0 from {:.2} dB (last positive {:.2} dB, {:.3e} bit/s), crossing ≈ {crossing:.3} dB; 40-point sweep in {elapsed:.1?}",
            reports[i].loss_db,
            reports[i - 1].loss_db,
            reports[i - 1].rate
        ),
    )
}

fn ordering() -> Outcome {
    let sys = SystemParams::default();
    let losses: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let blocks = [
        BlockSize::Finite(100_000_000),
        BlockSize::Finite(10_000_000_000),
        BlockSize::Finite(1_000_000_000_000),
        BlockSize::Finite(100_000_000_000_000),
        BlockSize::Infinite,
    ];
    let mut spec = SweepSpec::asymptotic(losses.clone(), vec![0.0, 0.1, 0.2]);
    spec.n_values = blocks.to_vec();
    let r = sweep(&spec, &sys).unwrap();
    let (nl, nn) = (losses.len(), blocks.len());
    let at = |x: usize, c: usize, l: usize| r[(x * nn + c) * nl + l].rate;
    let mut checked = 0;
    let mut violations = Vec::new();
    for c in 0..nn {
        for l in 0..nl {
            let k = [at(0, c, l), at(1, c, l), at(2, c, l)];
            if k.iter().all(|&v| v > 0.0) {
                checked += 1;
                if !(k[0] > k[1] && k[1] > k[2]) {
                    violations.push(format!("Ξ order at n={}, {} dB: {k:?}", blocks[c], losses[l]));
                }
            }
        }
    }
    for x in 0..3 {
        for l in 0..nl {
            for c in 1..nn {
                let (small, large) = (at(x, c - 1, l), at(x, c, l));
                if small > 0.0 {
                    checked += 1;
                    if !(large > small) {
                        violations.push(format!(
                            "n order at Ξ={}, {} dB: R({}) = {small} vs R({}) = {large}",
                            spec.noise_levels[x], losses[l], blocks[c - 1], blocks[c]
                        ));
                    }
                }
            }
        }
    }
    let failed = r.iter().filter(|p| p.status == PointStatus::Failed).count();
    outcome(
        violations.is_empty() && failed == 0 && checked > 0,
        if violations.is_empty() {
            format!("{checked} strict inequalities hold over {} points", r.len())
        } else {
            violations.join("; ")
        },
    )
}

fn convergence() -> Outcome {
    let sys = SystemParams::default();
    let ch = ChannelModel::new(3.0, 0.1).unwrap();
    let opts = SearchOptions::default();
    let k = optimize_point(&ch, &sys, &Objective::Asymptotic, &opts).unwrap();
    let config = FiniteKeyConfig {
        f_ec: 1.0,
        dq: 0.0,
        ..Default::default()
    };
    let r = optimize_point(
        &ch,
        &sys,
        &Objective::Finite {
            n: 100_000_000_000_000,
            config,
        },
        &opts,
    )
    .unwrap();
    let gap = (r.rate.rate - k.rate.rate).abs() / k.rate.rate;
    outcome(
        gap < 0.01,
        format!(
            "K = {:.4} bit/s, R(1e14) = {:.4} bit/s, relative gap {gap:.2e} (f_EC = 1, ΔQ = 0)",
            k.rate.rate, r.rate.rate
        ),
    )
}

fn monte_carlo() -> Outcome {
    let sys = SystemParams::default();
    let ch = ChannelModel::new(3.0, 0.1).unwrap();
    let opt = operating_optimum();
    let start = Instant::now();
    let stats = simulate_rounds(10_000_000, &opt.params, &sys, &ch, 2024).unwrap();
    let elapsed = start.elapsed();
    let cmp = compare_analytic(&stats, &opt.params, &sys, &ch).unwrap();
    outcome(
        cmp.passed && elapsed <= Duration::from_secs(120),
        format!(
            "Q̂ = {:.5} vs Q = {:.5} (z = {:+.2}), P̂ = {:.5e} vs P = {:.5e} (z = {:+.2}); 1e7 rounds in {elapsed:.1?}",
            cmp.q_hat, cmp.q, cmp.z_q, cmp.p_hat, cmp.p, cmp.z_p
        ),
    )
}

fn angular() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_norm = 0f64;
    let mut worst_sym = 0f64;
    for sidebands in 0..=20u32 {
        for _ in 0..100 {
            let beta = rng.random_range(0.0..=PI);
            let row = wigner_d_row(sidebands, beta).unwrap();
            worst_norm = worst_norm.max((row.norm_sqr() - 1.0).abs());
            for k in 1..=sidebands as i32 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                worst_sym = worst_sym.max((row.get(k) - sign * row.get(-k)).abs());
            }
        }
    }
    let mut worst_j1 = 0f64;
    for _ in 0..100 {
        let beta = rng.random_range(0.0..=PI);
        let s = beta.sin() / 2f64.sqrt();
        let row = wigner_d_row(1, beta).unwrap();
        for (x, y) in row.values().iter().zip([-s, beta.cos(), s]) {
            worst_j1 = worst_j1.max((x - y).abs());
        }
    }
    outcome(
        worst_norm < 1e-10 && worst_sym < 1e-10 && worst_j1 <= 2.0 * f64::EPSILON,
        format!("max |Σd² - 1| = {worst_norm:.1e}, max antisymmetry error = {worst_sym:.1e}, max j=1 error = {worst_j1:.1e}"),
    )
}

fn integration_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0f64;
    let mut sets = 0;
    while sets < 100 {
        let m = rng.random_range(0.0..3.0);
        let asym = rng.random_range(-0.3..0.3);
        let xi = rng.random_range(0.0..1.0);
        let v_0 = rng.random_range(0.0..3.0);
        let Ok(cf) = decision_stats(v_0, m + asym, -m + asym, xi) else {
            continue;
        };
        let q = decision_stats_quadrature(v_0, m + asym, -m + asym, xi, Tolerance::default()).unwrap();
        worst = worst.max((cf.e - q.e).abs()).max((cf.p - q.p).abs());
        sets += 1;
    }
    outcome(worst < 1e-9, format!("max |closed form - quadrature| over E and P = {worst:.1e}"))
}

fn degenerate_inputs() -> Outcome {
    let sys = SystemParams::default();
    let ch = ChannelModel::new(3.0, 0.1).unwrap();
    let flat = TunableParams {
        mu_0: 1.5,
        beta_a: 0.0,
        delta: 1.0,
        v_0: 0.5,
        k_sample: 0,
    };
    let k_flat = asymptotic_key_rate(&flat, &sys, &ch).unwrap();
    let stats = simulate_rounds(1_000_000, &flat, &sys, &ch, 77).unwrap();
    let sd = (0.25 / stats.accepted as f64).sqrt();
    let q_ok = (stats.qber - 0.5).abs() < 3.0 * sd;
    let chi_dark = holevo_dr(0.0, 0.4, sys.sidebands).unwrap();
    let far = TunableParams {
        v_0: 1e4,
        ..operating_optimum().params
    };
    let k_far = asymptotic_key_rate(&far, &sys, &ch).unwrap();
    let (m0, m1) = optics::signal_means(&far, &sys, ch.transmittance()).unwrap();
    let aborted = k_far.status == RateStatus::Aborted
        && matches!(decision_stats(far.v_0, m0, m1, ch.xi), Err(ScwError::EmptyAcceptance { .. }));
    outcome(
        k_flat.rate == 0.0 && q_ok && chi_dark == 0.0 && aborted,
        format!(
            "β_A = 0: K = {}, Q̂ = {:.4} ± {:.4}; μ₀ = 0: χ = {chi_dark}; v₀ = 1e4: status {:?}",
            k_flat.rate, stats.qber, sd, k_far.status
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("cutoff reproduction", cutoff),
        ("curve ordering", ordering),
        ("asymptotic convergence", convergence),
        ("Monte Carlo validation", monte_carlo),
        ("angular suite", angular),
        ("integration oracle", integration_oracle),
        ("degenerate inputs", degenerate_inputs),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        all &= o.passed;
        println!(
            "criterion {} {:<24} {}  {} [{:.1?}]",
            i + 1,
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
