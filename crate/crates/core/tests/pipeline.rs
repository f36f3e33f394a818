use std::process::Command;

use otfs_ipac::config::{AdcBits, SimConfig};
use otfs_ipac::sim::{run_sweep_with_workers, write_csv, CsvMetadata, Simulator, SweepSpec};

const BIN: &str = env!("CARGO_BIN_EXE_otfs-ipac");
const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/sweep_two_point.csv");

fn config(snr: &[f64], bits: &[AdcBits], trials: usize) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.frame.snr_db = snr.to_vec();
    cfg.sweep.bits = bits.to_vec();
    cfg.sweep.trials = trials;
    cfg
}

fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

#[test]
fn ideal_converter_at_high_snr_localizes_within_a_metre() {
    let cfg = config(&[60.0], &[AdcBits::Infinite], 1);
    let sim = Simulator::new(&cfg).unwrap();
    let trials = 60;
    let good = (0..trials)
        .filter(|&t| sim.run_trial(60.0, AdcBits::Infinite, 1, t).unwrap().position_se < 1.0)
        .count();
    assert!(good * 10 >= trials as usize * 9, "{good}/{trials}");
}

#[test]
fn resolutions_agree_when_noise_dominates() {
    let all = [
        AdcBits::Finite(3),
        AdcBits::Finite(4),
        AdcBits::Finite(5),
        AdcBits::Infinite,
    ];
    let cfg = config(&[-20.0], &all, 1);
    let sim = Simulator::new(&cfg).unwrap();
    let trials = 100;
    let mut per_bits = Vec::new();
    for bits in all {
        let m: Vec<_> = (0..trials).map(|t| sim.run_trial(-20.0, bits, 1, t).unwrap()).collect();
        let avg = |f: fn(&otfs_ipac::sim::TrialMetrics) -> f64| m.iter().map(f).sum::<f64>() / trials as f64;
        per_bits.push([avg(|t| t.position_se), avg(|t| t.doppler_se), avg(|t| t.gain_se)]);
    }
    for k in 0..3 {
        let vals: Vec<f64> = per_bits.iter().map(|v| db(v[k])).collect();
        let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1.0, "metric {k}: {vals:?}");
    }
}

#[test]
fn line_of_sight_is_identified_above_twenty_db() {
    let bits = [AdcBits::Finite(3), AdcBits::Finite(5), AdcBits::Infinite];
    let cfg = config(&[20.0, 40.0], &bits, 1);
    let sim = Simulator::new(&cfg).unwrap();
    for snr in [20.0, 40.0] {
        for b in bits {
            let trials = if b.is_infinite() { 200 } else { 40 };
            let hits = (0..trials)
                .filter(|&t| {
                    let d = sim.dump_trial(snr, b, 1, t).unwrap();
                    let los = d.true_paths.paths[0];
                    let e = d.estimates[0];
                    e.delay == los.delay && (e.aoa - los.aoa).abs() < 1f64.to_radians()
                })
                .count();
            assert!(
                hits * 100 >= 95 * trials as usize,
                "snr {snr} bits {b}: {hits}/{trials}"
            );
        }
    }
}

fn golden_rows() -> String {
    let mut cfg = config(&[0.0, 30.0], &[AdcBits::Finite(4)], 3);
    cfg.frame.seed = 5;
    let spec = SweepSpec::from_config(&cfg).unwrap();
    let sim = Simulator::new(&cfg).unwrap();
    let rows = run_sweep_with_workers(&sim, &spec, 2).unwrap();
    let mut meta = CsvMetadata::for_config(&cfg, spec.seed);
    meta.created_unix = 0;
    let mut out = Vec::new();
    write_csv(&mut out, &rows, &meta).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn csv_matches_golden_file() {
    let actual = golden_rows();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(GOLDEN, &actual).unwrap();
    }
    let expected = std::fs::read_to_string(GOLDEN).expect("golden file present");
    let (a, e): (Vec<&str>, Vec<&str>) = (actual.lines().collect(), expected.lines().collect());
    assert_eq!(a.len(), e.len());
    assert_eq!(a.len(), 7 + 2 * 7);
    for (la, le) in a.iter().zip(&e) {
        if la.starts_with('#') || la.starts_with("snr_db") {
            assert_eq!(la, le);
            continue;
        }
        let fa: Vec<&str> = la.split(',').collect();
        let fe: Vec<&str> = le.split(',').collect();
        assert_eq!(fa.len(), 6);
        assert_eq!((fa[0], fa[1], fa[2], fa[4], fa[5]), (fe[0], fe[1], fe[2], fe[4], fe[5]));
        let (va, ve): (f64, f64) = (fa[3].parse().unwrap(), fe[3].parse().unwrap());
        assert!((va - ve).abs() <= 1e-9 * ve.abs().max(1e-300), "{la} vs {le}");
    }
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let cfg = config(&[10.0, 30.0], &[AdcBits::Finite(3), AdcBits::Infinite], 6);
    let spec = SweepSpec::from_config(&cfg).unwrap();
    let sim = Simulator::new(&cfg).unwrap();
    let one = run_sweep_with_workers(&sim, &spec, 1).unwrap();
    let four = run_sweep_with_workers(&sim, &spec, 4).unwrap();
    assert_eq!(one, four);
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

#[test]
fn cli_validate_config_on_defaults() {
    let out = run(&["validate-config"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

#[test]
fn cli_unknown_flag_exits_two_with_usage() {
    let out = run(&["sweep", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn cli_crlb_prints_bounds_only() {
    let out = run(&["crlb", "--bits", "5", "--snr", "30", "--trials", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    let metrics: Vec<&str> = rows.iter().map(|r| r.split(',').nth(2).unwrap()).collect();
    assert_eq!(metrics, ["crlb_position", "crlb_doppler", "crlb_gain"]);
}

#[test]
fn cli_bad_config_gives_one_line_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[frame]\nm = 0\n").unwrap();
    let out = run(&["validate-config", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error:"));
}

#[test]
fn cli_sweep_writes_expected_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("small.toml");
    let mut cfg = config(&[10.0, 20.0], &[AdcBits::Finite(4), AdcBits::Infinite], 2);
    cfg.sweep.metrics = ["position_mse", "doppler_mse", "gain_mse", "crlb_position", "ber"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    std::fs::write(&cfg_path, cfg.to_toml()).unwrap();
    let out_path = dir.path().join("out.csv");
    let out = run(&[
        "sweep",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let data = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(data, 20);
}

#[test]
fn cli_single_trial_dump_is_json() {
    let out = run(&["single-trial", "--dump", "--snr", "20", "--bits", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(v["estimates"].as_array().unwrap().len(), 3);
    assert!(v["r_ad"].as_array().unwrap().len() == 128 * 16);
}

#[test]
fn cli_rejects_bad_values() {
    for args in [
        ["crlb", "--bits", "0"],
        ["crlb", "--snr", "loud"],
        ["crlb", "--snr-convention", "sideways"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}
