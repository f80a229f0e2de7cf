use scw_qkd::search::{GridSize, PointStatus, SearchBounds};
use scw_qkd::*;

fn sys() -> SystemParams {
    SystemParams::default()
}

fn optimum(loss: f64, xi: f64) -> search::Optimum {
    let ch = ChannelModel::new(loss, xi).unwrap();
    optimize_point(&ch, &sys(), &Objective::Asymptotic, &SearchOptions::default()).unwrap()
}

#[test]
fn same_seed_same_optimum() {
    let a = optimum(3.0, 0.1);
    let b = optimum(3.0, 0.1);
    assert_eq!(a.params, b.params);
    assert_eq!(a.rate.rate.to_bits(), b.rate.rate.to_bits());
}

#[test]
fn reported_rate_is_reproducible_from_parameters() {
    let opt = optimum(3.0, 0.1);
    let again = asymptotic_key_rate(&opt.params, &sys(), &ChannelModel::new(3.0, 0.1).unwrap()).unwrap();
    assert!((again.rate - opt.rate.rate).abs() <= 1e-10 * opt.rate.rate);
    let recal = calibrate_delta(opt.params.beta_a, &sys()).unwrap();
    assert_eq!(recal, opt.params.delta);
}

#[test]
fn optimum_is_a_local_maximum() {
    let s = sys();
    let ch = ChannelModel::new(3.0, 0.1).unwrap();
    let opt = optimum(3.0, 0.1);
    let best = opt.rate.rate;
    let b = SearchBounds::default();
    let v_max = b.v_0_sigmas.1 * ch.sigma();
    let p = opt.params;
    for factor in [0.99, 1.01] {
        let candidates = [
            (p.mu_0 * factor, p.beta_a, p.v_0),
            (p.mu_0, p.beta_a * factor, p.v_0),
            (p.mu_0, p.beta_a, p.v_0 * factor),
        ];
        for (mu_0, beta_a, v_0) in candidates {
            if mu_0 > b.mu_0.1 || beta_a > b.beta_a.1 || v_0 > v_max {
                continue;
            }
            let t = TunableParams::calibrated(mu_0, beta_a, v_0, &s).unwrap();
            let k = asymptotic_key_rate(&t, &s, &ch).unwrap().rate;
            assert!(k <= best * (1.0 + 1e-8), "{t:?}: {k} > {best}");
        }
    }
}

#[test]
fn beyond_the_cutoff_is_infeasible() {
    let ch = ChannelModel::new(15.0, 0.1).unwrap();
    let err = optimize_point(&ch, &sys(), &Objective::Asymptotic, &SearchOptions::default()).unwrap_err();
    match err {
        ScwError::Infeasible { best_rate, .. } => assert!(best_rate <= 0.0),
        other => panic!("expected infeasibility, got {other}"),
    }
}

#[test]
fn refinement_beats_a_dense_grid() {
    let s = sys();
    for xi in [0.0, 0.1] {
        let ch = ChannelModel::new(0.0, xi).unwrap();
        let opt = optimum(0.0, xi);
        let b = SearchBounds::default();
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..20 {
            let mu_0 = 10f64.powf(-3.0 + 4.0 * i as f64 / 19.0);
            for j in 0..20 {
                let beta_a = b.beta_a.0 + (b.beta_a.1 - b.beta_a.0) * j as f64 / 19.0;
                let Ok(t0) = TunableParams::calibrated(mu_0, beta_a, 0.0, &s) else {
                    continue;
                };
                for k in 0..20 {
                    let t = TunableParams {
                        v_0: 6.0 * ch.sigma() * k as f64 / 19.0,
                        ..t0
                    };
                    grid_best = grid_best.max(asymptotic_key_rate(&t, &s, &ch).unwrap().rate);
                }
            }
        }
        assert!(opt.rate.rate >= grid_best, "Ξ={xi}: {} < {grid_best}", opt.rate.rate);
        assert!(opt.params.v_0 > 0.0);
    }
}

#[test]
fn post_selection_pays_off_with_noise() {
    let ch = ChannelModel::new(0.0, 0.1).unwrap();
    let free = optimum(0.0, 0.1);
    let opts = SearchOptions {
        bounds: SearchBounds {
            v_0_sigmas: (0.0, 1e-9),
            ..Default::default()
        },
        ..Default::default()
    };
    assert!(free.params.v_0 > 0.0);
    // without a threshold there is no key at all
    match optimize_point(&ch, &sys(), &Objective::Asymptotic, &opts) {
        Err(ScwError::Infeasible { best_rate, .. }) => assert!(best_rate <= 0.0),
        other => panic!("expected no key without post-selection, got {other:?}"),
    }
}

#[test]
fn single_point_sweep_equals_optimize_point() {
    let spec = SweepSpec::asymptotic(vec![3.0], vec![0.1]);
    let reports = sweep(&spec, &sys()).unwrap();
    assert_eq!(reports.len(), 1);
    let opt = optimum(3.0, 0.1);
    let r = &reports[0];
    assert_eq!(r.status, PointStatus::Ok);
    assert_eq!(r.rate, opt.rate.rate);
    assert_eq!(r.params().unwrap(), opt.params);
}

fn small_spec() -> SweepSpec {
    let mut spec = SweepSpec::asymptotic(vec![1.0, 5.0, 12.0], vec![0.0, 0.2]);
    spec.search.grid = GridSize {
        mu_0: 5,
        beta_a: 6,
        v_0: 5,
    };
    spec.search.starts = 4;
    spec
}

#[test]
fn sweep_is_bit_reproducible_and_ordered() {
    let spec = small_spec();
    let a = sweep(&spec, &sys()).unwrap();
    let b = sweep(&spec, &sys()).unwrap();
    let mut seq = spec.clone();
    seq.search.execution = Execution::Sequential;
    let c = sweep(&seq, &sys()).unwrap();
    assert_eq!(a.len(), 6);
    for ((x, y), z) in a.iter().zip(&b).zip(&c) {
        assert_eq!(x.rate.to_bits(), y.rate.to_bits());
        assert_eq!(x.rate.to_bits(), z.rate.to_bits());
    }
    // curve-major: Ξ = 0 first
    assert_eq!((a[0].xi, a[0].loss_db), (0.0, 1.0));
    assert_eq!((a[3].xi, a[3].loss_db), (0.2, 1.0));
    for curve in a.chunks(3) {
        assert!(curve[0].rate > curve[1].rate);
        assert_eq!(curve[2].status, PointStatus::NoKey);
        assert_eq!(curve[2].rate, 0.0);
    }
    for l in 0..2 {
        assert!(a[l].rate > a[3 + l].rate);
    }
}

#[test]
fn finite_curves_rise_with_block_size() {
    let mut spec = small_spec();
    spec.loss_grid = vec![2.0, 4.0];
    spec.noise_levels = vec![0.1];
    spec.n_values = vec![
        BlockSize::Finite(100_000_000),
        BlockSize::Finite(10_000_000_000),
        BlockSize::Infinite,
    ];
    let r = sweep(&spec, &sys()).unwrap();
    assert_eq!(r.len(), 6);
    for l in 0..2 {
        assert!(r[l].rate < r[2 + l].rate);
        assert!(r[2 + l].rate < r[4 + l].rate);
        assert_eq!(r[4 + l].n, BlockSize::Infinite);
    }
}
