//! Built-in diagnostics re-running the angular and integration identities.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scw_qkd::angular::wigner_d_row;
use scw_qkd::noise::decision_stats_quadrature;
use scw_qkd::quad::Tolerance;
use scw_qkd::decision_stats;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub worst_error: f64,
    pub tolerance: f64,
}

const SEED: u64 = 0x5eed;

fn unitarity(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0f64;
    for sidebands in 0..=20u32 {
        for _ in 0..100 {
            let row = wigner_d_row(sidebands, rng.random_range(0.0..=PI)).expect("beta in range");
            worst = worst.max((row.norm_sqr() - 1.0).abs());
            for k in 1..=sidebands as i32 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                worst = worst.max((row.get(k) - sign * row.get(-k)).abs());
            }
        }
    }
    Check {
        name: "d-row unitarity and antisymmetry, S <= 20",
        passed: worst < 1e-10,
        worst_error: worst,
        tolerance: 1e-10,
    }
}

fn spin_one(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0f64;
    for _ in 0..100 {
        let beta = rng.random_range(0.0..=PI);
        let s = beta.sin() / 2f64.sqrt();
        let row = wigner_d_row(1, beta).expect("beta in range");
        for (x, y) in row.values().iter().zip([-s, beta.cos(), s]) {
            worst = worst.max((x - y).abs());
        }
    }
    Check {
        name: "j = 1 row against the explicit matrix",
        passed: worst <= 2.0 * f64::EPSILON,
        worst_error: worst,
        tolerance: 2.0 * f64::EPSILON,
    }
}

fn erf_vs_quadrature(rng: &mut ChaCha8Rng) -> Check {
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
        let Ok(q) = decision_stats_quadrature(v_0, m + asym, -m + asym, xi, Tolerance::default()) else {
            worst = f64::INFINITY;
            break;
        };
        worst = worst.max((cf.e - q.e).abs()).max((cf.p - q.p).abs());
        sets += 1;
    }
    Check {
        name: "closed-form E, P against adaptive quadrature",
        passed: worst < 1e-9,
        worst_error: worst,
        tolerance: 1e-9,
    }
}

pub fn run() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    vec![unitarity(&mut rng), spin_one(&mut rng), erf_vs_quadrature(&mut rng)]
}
