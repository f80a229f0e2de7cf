use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use scw_qkd::search::PointStatus;
use scw_qkd::{BlockSize, ChannelModel, FiniteKeyConfig, SystemParams, TunableParams};
use scw_qkd::security::RateOptions;

fn scwqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scwqkd"))
        .args(args)
        .env_remove("SCW_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn keyrate_below_the_cutoff_is_positive() {
    let o = scwqkd(&["keyrate", "--loss-db", "3", "--xi", "0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["report"]["rate"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["seed"], 0);
}

#[test]
fn keyrate_beyond_the_cutoff_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("point.json");
    let o = scwqkd(&["keyrate", "--loss-db", "15", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["report"]["status"], "no_key");
}

#[test]
fn finite_mode_needs_a_finite_block() {
    assert_eq!(code(&scwqkd(&["keyrate", "--mode", "finite", "--n", "inf"])), 1);
    let o = scwqkd(&["keyrate", "--loss-db", "2", "--mode", "finite", "--n", "1e10"]);
    assert_eq!(code(&o), 0);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["report"]["n"], 10_000_000_000u64);
}

#[test]
fn bad_configs_exit_1_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        ("malformed.toml", "[system\nperiod_s = 1e-7\n"),
        ("unknown.toml", "[system]\nperiod = 1e-7\n"),
        ("range.toml", "[system]\neta_bob = 2.0\n"),
        ("empty.toml", "[channel]\nloss_db = []\n"),
    ];
    for (name, text) in configs {
        let cfg = write(dir.path(), name, text);
        for cmd in ["keyrate", "sweep", "simulate"] {
            let out = dir.path().join(format!("{name}.{cmd}.out"));
            let o = scwqkd(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap()]);
            assert_eq!(code(&o), 1, "{name} {cmd}");
            assert!(!out.exists(), "{name} {cmd} wrote output");
            assert!(String::from_utf8_lossy(&o.stderr).contains(name));
        }
    }
    let o = scwqkd(&["keyrate", "--config", &dir.path().join("unknown.toml").to_string_lossy()]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&scwqkd(&[])), 1);
    assert_eq!(code(&scwqkd(&["simulate", "--rounds", "0"])), 1);
    assert_eq!(code(&scwqkd(&["keyrate", "--n", "2.5"])), 1);
    assert_eq!(code(&scwqkd(&["keyrate", "--loss-db", "-1"])), 1);
    assert_eq!(code(&scwqkd(&["sweep"])), 1);
    assert_eq!(code(&scwqkd(&["--help"])), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_scwqkd"))
        .arg("selftest")
        .env("SCW_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_passes_and_repeats_byte_for_byte() {
    let a = scwqkd(&["simulate", "--seed", "5"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = scwqkd(&["simulate", "--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["stats"]["rounds"], 1_000_000);
    assert_eq!(doc["comparison"]["passed"], true);
    assert_eq!(doc["tunables_source"], "optimized");
    let c = scwqkd(&["simulate", "--seed", "6"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn simulate_with_configured_tunables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.toml",
        "[tunables]\nmu_0 = 1.6\nbeta_a_deg = 23.5\nv_0 = 0.9\n",
    );
    let o = scwqkd(&["simulate", "--config", &cfg, "--loss-db", "3", "--rounds", "200000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["tunables_source"], "config");
    assert_eq!(doc["tunables"]["mu_0"], 1.6);
    assert!(doc["config"].as_str().unwrap().contains("beta_a_deg"));
}

#[test]
fn selftest_passes() {
    let o = scwqkd(&["selftest"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
}

fn parse(field: &str) -> f64 {
    field.parse().unwrap()
}

#[test]
fn sweep_csv_round_trips_through_the_rate_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "seed = 4\n\
         [channel]\nloss_db = [0.5, 3.0, 6.0, 14.0]\nxi = [0.0, 0.1]\n\
         [search]\ngrid_mu_0 = 5\ngrid_beta_a = 6\ngrid_v_0 = 5\nstarts = 4\n\
         [finite_key]\nn = [1e9, \"inf\"]\nf_ec = 1.1\n",
    );
    let out = dir.path().join("rates.csv");
    let o = scwqkd(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(&out).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.starts_with("loss_db,xi,n,K_or_R_bits_per_s,Q,P,chi,mu0,beta_A,delta,v0,k_sample,status\n"));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4 * 2 * 2);

    let sys = SystemParams::default();
    let finite = FiniteKeyConfig {
        f_ec: 1.1,
        ..Default::default()
    };
    let mut positive = 0;
    for row in &rows {
        let status: PointStatus = row[12].parse().unwrap();
        let rate = parse(&row[3]);
        if status != PointStatus::Ok {
            assert_eq!(rate, 0.0);
            continue;
        }
        positive += 1;
        let ch = ChannelModel::new(parse(&row[0]), parse(&row[1])).unwrap();
        let n: BlockSize = row[2].parse().unwrap();
        let tun = TunableParams {
            mu_0: parse(&row[7]),
            beta_a: parse(&row[8]),
            delta: parse(&row[9]),
            v_0: parse(&row[10]),
            k_sample: row[11].parse().unwrap(),
        };
        let again = n
            .objective(finite)
            .evaluate(&tun, &sys, &ch, &RateOptions::default())
            .unwrap()
            .rate;
        assert!((again - rate).abs() <= 1e-9 * rate, "{row:?}: {again}");
    }
    assert!(positive >= 8);
    assert!(rows.iter().filter(|r| &r[0] == "14.0").all(|r| &r[12] == "no_key"));

    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("rates.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["complete"], true);
    assert_eq!(meta["rows"], 16);
    assert_eq!(meta["seed"], 4);
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert!(meta["config"].as_str().unwrap().contains("f_ec = 1.1"));

    // same inputs, same bytes
    let again = dir.path().join("again.csv");
    let o = scwqkd(&["sweep", "--config", &cfg, "--out", again.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn sweep_curves_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "order.toml",
        "[channel]\nloss_db = [1.0, 4.0]\nxi = [0.0, 0.1, 0.2]\n\
         [finite_key]\nn = [1e8, 1e10, \"inf\"]\n",
    );
    let out = dir.path().join("order.csv");
    let o = scwqkd(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let rate: Vec<f64> = reader.records().map(|r| parse(&r.unwrap()[3])).collect();
    // loss-major, then Ξ, then n
    let at = |l: usize, x: usize, c: usize| rate[(l * 3 + x) * 3 + c];
    for l in 0..2 {
        for c in 0..3 {
            assert!(at(l, 0, c) > at(l, 1, c) && at(l, 1, c) > at(l, 2, c));
        }
        for x in 0..3 {
            assert!(at(l, x, 0) < at(l, x, 1) && at(l, x, 1) < at(l, x, 2));
        }
    }
}
