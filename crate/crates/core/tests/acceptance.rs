//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//!     cargo test -p cmsdr --release --test acceptance

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

use cmsdr::conic::{solve, svec, ConeSpec, ConicProblem, SolverSettings, SparseMatrix};
use cmsdr::formulation::{bordered_matrix, build_basic_cm_sdp, hermitian_embed};
use cmsdr::gf2::{generate_asymmetric_code, ParityCheckMatrix};
use cmsdr::pipeline::{
    prepare, run_grid, run_trial_with_code, write_csv, CodeSpec, Method, SweepGrid, TrialConfig, TrialReport,
};
use cmsdr::C64;

const SEEDS_EXACT: u64 = 50;
const SEEDS_PHASE: u64 = 200;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, budget: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "criterion {id} {name}: {} ({}; {:.1}s of {}s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn cn(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

fn bits_of(x: u32, n: usize) -> Vec<u8> {
    (0..n).map(|k| (x >> k & 1) as u8).collect()
}

/// Random full-column-support parity-check matrices with `n <= 14`. Even
/// indices get even-weight rows only, so the corpus mixes both kinds.
fn code_corpus() -> Vec<ParityCheckMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();
    while out.len() < 10 {
        let even_only = out.len() % 2 == 0;
        let n = rng.random_range(6..=14);
        let m = rng.random_range(2..=n / 2);
        let rows: Vec<Vec<u8>> = (0..m)
            .map(|_| {
                let mut r: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.35))).collect();
                if even_only && r.iter().filter(|&&b| b == 1).count() % 2 == 1 {
                    let k = rng.random_range(0..n);
                    r[k] ^= 1;
                }
                r
            })
            .collect();
        if rows.iter().any(|r| r.iter().filter(|&&b| b == 1).count() < 2) {
            continue;
        }
        if let Ok(h) = ParityCheckMatrix::from_dense(&rows) {
            out.push(h);
        }
    }
    out
}

fn polytope_integrality() -> Outcome {
    let mut mismatches = 0;
    let mut vectors = 0u64;
    for h in code_corpus() {
        let n = h.cols();
        let ineqs = h.parity_inequalities(n).expect("degrees within n");
        for x in 0..1u32 << n {
            let b = bits_of(x, n);
            let f: Vec<f64> = b.iter().map(|&v| f64::from(v)).collect();
            let in_polytope = ineqs.iter().all(|q| q.is_satisfied(&f, 0.0));
            if in_polytope != h.is_codeword(&b).unwrap() {
                mismatches += 1;
            }
            vectors += 1;
        }
    }
    Outcome { pass: mismatches == 0, detail: format!("{mismatches} mismatches over {vectors} binary vectors") }
}

fn asymmetry() -> Outcome {
    let mut mismatches = 0;
    let mut kinds = (0, 0);
    for h in code_corpus() {
        let n = h.cols();
        let brute = (0..1u32 << n)
            .map(|x| bits_of(x, n))
            .filter(|b| h.is_codeword(b).unwrap())
            .all(|b| !h.is_codeword(&b.iter().map(|v| v ^ 1).collect::<Vec<_>>()).unwrap());
        if brute {
            kinds.0 += 1;
        } else {
            kinds.1 += 1;
        }
        if brute != h.is_asymmetric().asymmetric {
            mismatches += 1;
        }
    }
    Outcome {
        pass: mismatches == 0 && kinds.0 > 0 && kinds.1 > 0,
        detail: format!("{mismatches} mismatches; {} asymmetric, {} symmetric codes", kinds.0, kinds.1),
    }
}

fn closed_form_problems() -> Vec<(&'static str, ConicProblem, f64)> {
    let lp = ConicProblem::new(
        vec![1.0],
        SparseMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap(),
        vec![-1.0],
        ConeSpec { nonneg: 1, ..Default::default() },
    )
    .unwrap();
    // min tr(diag(1, 3) Z) s.t. tr Z = 1, Z psd
    let c = svec(&DMatrix::from_diagonal(&nalgebra::dvector![1.0, 3.0]));
    let mut t = vec![(0, 0, 1.0), (0, 2, 1.0)];
    t.extend((0..3).map(|k| (1 + k, k, -1.0)));
    let eig = ConicProblem::new(
        c,
        SparseMatrix::from_triplets(4, 3, &t).unwrap(),
        vec![1.0, 0.0, 0.0, 0.0],
        ConeSpec { zero: 1, psd: vec![2], ..Default::default() },
    )
    .unwrap();
    let soc = ConicProblem::new(
        vec![1.0],
        SparseMatrix::from_triplets(3, 1, &[(0, 0, -1.0)]).unwrap(),
        vec![0.0, 3.0, 4.0],
        ConeSpec { soc: vec![3], ..Default::default() },
    )
    .unwrap();
    vec![("lp", lp, 1.0), ("min_eigenvalue", eig, 1.0), ("soc_norm", soc, 5.0)]
}

fn solver_correctness() -> Outcome {
    let settings = SolverSettings::default();
    let mut worst_closed = 0.0f64;
    for (_, p, want) in closed_form_problems() {
        let s = solve(&p, &settings).unwrap();
        worst_closed = worst_closed.max((s.primal_objective - want).abs());
    }
    let fixtures: serde_json::Value =
        serde_json::from_str(include_str!("fixtures/random_sdps.json")).expect("fixture json");
    let mut worst_rel = 0.0f64;
    let mut count = 0;
    for case in fixtures["cases"].as_array().unwrap() {
        let p = ConicProblem::from_json(&case["problem"].to_string()).unwrap();
        let want = case["reference_objective"].as_f64().unwrap();
        let s = solve(&p, &settings).unwrap();
        worst_rel = worst_rel.max((s.primal_objective - want).abs() / want.abs().max(1.0));
        count += 1;
    }
    Outcome {
        pass: worst_closed <= 1e-5 && worst_rel <= 1e-4 && count == 20,
        detail: format!("closed-form max |err| {worst_closed:.2e}; {count} random SDPs max rel err {worst_rel:.2e}"),
    }
}

fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    hermitian_embed(m).unwrap().symmetric_eigenvalues().min()
}

fn embedding_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut schur_fail = 0;
    let mut worst_trace = 0.0f64;
    for _ in 0..100 {
        let q = rng.random_range(1..=6);
        let w = DVector::from_fn(q, |_, _| cn(&mut rng));
        let ww = &w * w.adjoint();
        if min_eigenvalue(&bordered_matrix(&ww, &w)) < -1e-9 {
            schur_fail += 1;
        }
        let v = DVector::from_fn(q, |_, _| cn(&mut rng));
        let short = &ww - (&v * v.adjoint()).scale(0.5 / v.norm_squared());
        if min_eigenvalue(&bordered_matrix(&short, &w)) >= -1e-9 {
            schur_fail += 1;
        }
    }
    for seed in 0..100 {
        let cfg = TrialConfig {
            order: (seed % 5) as usize,
            frame_len: 32,
            seed,
            method: Method::CmSdp,
            ..TrialConfig::default()
        };
        let regs = prepare(&cfg, None).unwrap().regressors;
        let (problem, layout) = build_basic_cm_sdp(&regs).unwrap();
        let q = regs.taps();
        let g = DMatrix::from_fn(q, q, |_, _| cn(&mut rng));
        let w_mat = &g * g.adjoint();
        let u = layout.pack(&w_mat, None, &vec![0.0; regs.len()], None, None).unwrap();
        let mut au = vec![0.0; problem.num_rows()];
        problem.a.mul_vec(&u, &mut au);
        let tw = hermitian_embed(&w_mat).unwrap();
        for (n, x) in regs.rank1().iter().enumerate() {
            let exact = (x * &w_mat).trace().re;
            let half = 0.5 * (hermitian_embed(x).unwrap() * &tw).trace();
            let row = au[problem.cones.zero + 2 * n];
            let scale = exact.abs().max(1.0);
            worst_trace = worst_trace.max((row - exact).abs() / scale).max((half - exact).abs() / scale);
        }
    }
    Outcome {
        pass: schur_fail == 0 && worst_trace <= 1e-10,
        detail: format!("{schur_fail} Schur-block failures in 200; worst trace-identity error {worst_trace:.2e}"),
    }
}

fn identity_config(method: Method, seed: u64) -> TrialConfig {
    TrialConfig {
        taps: vec![C64::new(1.0, 0.0)],
        snr_db: None,
        order: 0,
        frame_len: 64,
        method,
        code: CodeSpec::Generate { n: 24, m: 12, row_degree: 3, seed: 0 },
        seed,
        ..TrialConfig::default()
    }
}

fn identity_runs(method: Method, seeds: u64, code: Option<&ParityCheckMatrix>) -> Vec<TrialReport> {
    (0..seeds)
        .into_par_iter()
        .map(|s| run_trial_with_code(&identity_config(method, s), code).expect("trial runs"))
        .collect()
}

fn exact_recovery() -> Outcome {
    let reports = identity_runs(Method::CmSdp, SEEDS_EXACT, None);
    let ok = reports
        .iter()
        .filter(|r| r.ber == 0.0 && r.solver.as_ref().is_some_and(|s| s.objective <= 1e-6))
        .count();
    let worst = reports.iter().filter_map(|r| r.solver.as_ref()).map(|s| s.objective).fold(f64::MIN, f64::max);
    Outcome {
        pass: ok as u64 == SEEDS_EXACT,
        detail: format!("{ok}/{SEEDS_EXACT} seeds with objective <= 1e-6 and BER 0; max objective {worst:.2e}"),
    }
}

/// Smallest and largest counts inside the two-sided 99% band of Bin(n, 1/2).
fn binomial_band(n: u64) -> (u64, u64) {
    let b = Binomial::new(0.5, n).unwrap();
    let lo = (0..=n).find(|&k| b.cdf(k) > 0.005).unwrap();
    let hi = (0..=n).find(|&k| b.sf(k) <= 0.005).unwrap();
    (lo, hi)
}

fn phase_ambiguity() -> Outcome {
    let reports = identity_runs(Method::CmSdp, SEEDS_PHASE, None);
    let k = reports.iter().filter(|r| r.sign_correct).count() as u64;
    let (lo, hi) = binomial_band(SEEDS_PHASE);
    Outcome {
        pass: (lo..=hi).contains(&k),
        detail: format!("sign correct {k}/{SEEDS_PHASE}, band [{lo}, {hi}]"),
    }
}

fn default_code() -> ParityCheckMatrix {
    identity_config(Method::CmSdpCode, 0).code.load().unwrap()
}

fn phase_resolution() -> Outcome {
    let h = default_code();
    let asym = h.is_asymmetric().asymmetric && h.cols() == 24 && h.rank() == 12;
    let reports = identity_runs(Method::CmSdpCode, SEEDS_PHASE, Some(&h));
    let k = reports.iter().filter(|r| r.sign_correct).count() as u64;
    let p = Binomial::new(0.5, SEEDS_PHASE).unwrap().sf(k.saturating_sub(1));
    let zero = reports.iter().filter(|r| r.ber == 0.0).count();
    Outcome {
        pass: asym && p < 0.01 && zero as u64 == SEEDS_PHASE,
        detail: format!(
            "asymmetric (24,12) code: {asym}; sign correct {k}/{SEEDS_PHASE} (one-sided p = {p:.3}); \
             BER 0 without search in {zero}/{SEEDS_PHASE}"
        ),
    }
}

fn dispersive_base() -> TrialConfig {
    TrialConfig {
        taps: vec![C64::new(1.0, 0.0), C64::new(0.4, 0.0)],
        order: 7,
        frame_len: 128,
        ..TrialConfig::default()
    }
}

fn dispersive_grid() -> SweepGrid {
    SweepGrid { snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0], trials: 50, methods: vec![Method::CmSdp, Method::MmseGenie] }
}

fn dispersive() -> Outcome {
    let out = run_grid(&dispersive_grid(), &dispersive_base()).unwrap();
    let mean = |m: Method| -> Vec<f64> { out.summary.iter().filter(|s| s.method == m).map(|s| s.mean_ber).collect() };
    let sdp = mean(Method::CmSdp);
    let mmse = mean(Method::MmseGenie);
    let monotone = sdp.windows(2).all(|p| p[1] <= p[0]);
    let (s20, m20) = (sdp[4], mmse[4]);
    let close = s20 <= 10.0 * m20;
    Outcome {
        pass: monotone && close,
        detail: format!(
            "CM_SDP mean BER {:?} non-increasing: {monotone}; at 20 dB {s20:.2e} vs MMSE {m20:.2e}, within 10x: {close}",
            sdp.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>()
        ),
    }
}

fn csv_bytes(reports: &[TrialReport]) -> Vec<u8> {
    let rows: Vec<(usize, TrialReport)> = reports.iter().cloned().enumerate().collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &rows, false).unwrap();
    buf
}

fn determinism() -> Outcome {
    let h = default_code();
    let runs = || -> Vec<Vec<u8>> {
        let grid = run_grid(&dispersive_grid(), &dispersive_base()).unwrap();
        let mut csv = Vec::new();
        write_csv(&mut csv, &grid.reports, false).unwrap();
        vec![
            csv_bytes(&identity_runs(Method::CmSdp, SEEDS_PHASE, None)),
            csv_bytes(&identity_runs(Method::CmSdpCode, SEEDS_PHASE, Some(&h))),
            csv,
        ]
    };
    let (a, b) = (runs(), runs());
    let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    Outcome { pass: same == a.len(), detail: format!("{same}/{} repeated runs byte-identical", a.len()) }
}

fn main() {
    let min = |m: u64| Duration::from_secs(60 * m);
    let results = [
        check(1, "polytope integrality", min(1), polytope_integrality),
        check(2, "asymmetry correctness", min(1), asymmetry),
        check(3, "solver correctness", min(2), solver_correctness),
        check(4, "Schur/embedding fidelity", Duration::from_secs(10), embedding_fidelity),
        check(5, "exact recovery", min(1), exact_recovery),
        check(6, "phase ambiguity", min(10), phase_ambiguity),
        check(7, "phase-ambiguity resolution", min(30), phase_resolution),
        check(8, "dispersive channel", min(60), dispersive),
        check(9, "determinism", min(120), determinism),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
