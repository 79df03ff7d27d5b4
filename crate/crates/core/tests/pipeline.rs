use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

use cmsdr::pipeline::{
    run_grid, run_sweep, run_trial, write_csv, Method, SweepGrid, TrialConfig, TrialReport, CSV_HEADER,
};
use cmsdr::signal::ModulationScheme;
use cmsdr::{Error, C64};

fn identity(method: Method, seed: u64) -> TrialConfig {
    TrialConfig {
        taps: vec![C64::new(1.0, 0.0)],
        snr_db: None,
        order: 0,
        frame_len: 64,
        method,
        seed,
        ..TrialConfig::default()
    }
}

fn small_grid() -> (SweepGrid, TrialConfig) {
    let grid = SweepGrid { snr_db: vec![5.0, 15.0], trials: 3, methods: vec![Method::CmSdp, Method::CmaSgd, Method::MmseGenie] };
    let base = TrialConfig { order: 3, frame_len: 48, ..TrialConfig::default() };
    (grid, base)
}

#[test]
fn reports_are_reproducible() {
    for method in Method::ALL {
        let cfg = TrialConfig { method, order: 3, frame_len: 48, seed: 17, ..TrialConfig::default() };
        let a = run_trial(&cfg).unwrap().without_timing();
        let b = run_trial(&cfg).unwrap().without_timing();
        assert_eq!(a, b, "{method}");
        let back: TrialReport = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
        assert!((0.0..=1.0).contains(&a.ber));
    }
}

#[test]
fn noiseless_identity_channel_is_error_free() {
    for method in [Method::CmaSgd, Method::CmSdp, Method::MmseGenie] {
        for seed in 0..10 {
            let r = run_trial(&identity(method, seed)).unwrap();
            assert_eq!(r.ber, 0.0, "{method} seed {seed}");
        }
    }
}

#[test]
fn qpsk_identity_channel_is_error_free() {
    for method in [Method::CmSdp, Method::MmseGenie] {
        let cfg = TrialConfig { modulation: ModulationScheme::Qpsk, ..identity(method, 4) };
        assert_eq!(run_trial(&cfg).unwrap().ber, 0.0, "{method}");
    }
}

/// Blind decisions come out complemented about half the time.
#[test]
fn blind_sign_is_a_coin_flip() {
    let n = 200u64;
    let flipped = (0..n)
        .into_par_iter()
        .filter(|&s| run_trial(&identity(Method::CmSdp, s)).unwrap().sign_flipped == Some(true))
        .count() as u64;
    let b = Binomial::new(0.5, n).unwrap();
    let p = 2.0 * b.cdf(flipped).min(b.sf(flipped.saturating_sub(1))).min(0.5);
    assert!(p >= 0.05, "{flipped}/{n} flipped, p = {p}");
}

#[test]
fn csv_has_one_row_per_trial() {
    let (grid, base) = small_grid();
    let out = run_grid(&grid, &base).unwrap();
    assert_eq!(out.reports.len(), grid.trials * grid.methods.len() * grid.snr_db.len());
    assert_eq!(out.summary.len(), grid.methods.len() * grid.snr_db.len());
    let mut buf = Vec::new();
    write_csv(&mut buf, &out.reports, false).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), out.reports.len());
    assert!(rows.iter().all(|r| r[11].is_empty()));
    assert_eq!(&rows[0][0], "CM_SDP");
    assert_eq!(&rows[0][2], "0");
    assert_eq!(&rows[0][3], &base.seed.to_string());
}

#[test]
fn sweep_file_is_reproducible() {
    let (grid, base) = small_grid();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let sa = run_sweep(&grid, &base, &a, false).unwrap();
    let sb = run_sweep(&grid, &base, &b, false).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(sa.iter().map(|s| s.mean_ber).collect::<Vec<_>>(), sb.iter().map(|s| s.mean_ber).collect::<Vec<_>>());
}

#[test]
fn timing_column_is_opt_in() {
    let (grid, base) = small_grid();
    let out = run_grid(&SweepGrid { methods: vec![Method::CmSdp], trials: 1, ..grid }, &base).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &out.reports, true).unwrap();
    let row = csv::Reader::from_reader(buf.as_slice()).records().next().unwrap().unwrap();
    assert!(row[11].parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn invalid_configurations_are_rejected() {
    assert!(TrialConfig::from_json(r#"{"frame_len": 64, "unknown": 1}"#).is_err());
    let qpsk_code = TrialConfig { method: Method::CmSdpCode, modulation: ModulationScheme::Qpsk, ..TrialConfig::default() };
    assert!(matches!(run_trial(&qpsk_code), Err(e) if e.exit_code() == 2));
    let empty = SweepGrid { snr_db: vec![], trials: 1, methods: vec![Method::CmSdp] };
    assert!(matches!(run_grid(&empty, &TrialConfig::default()), Err(Error::Config(_))));
}
