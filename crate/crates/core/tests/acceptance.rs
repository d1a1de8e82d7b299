//! Acceptance suite. Each test prints one PASS line (visible with
//! `cargo test --test acceptance -- --nocapture`) and pins the tolerances
//! and runtime budgets the project commits to. Tests serialize on a global
//! lock so the runtime budgets are measured without CPU contention.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use wcfa::artifact::{ModelArtifact, Provenance};
use wcfa::autodiff::finite_difference_check;
use wcfa::data::{PairScoreTable, ScoreRecord, SpeakerId};
use wcfa::estimator::{
    bootstrap_ci, fa_rate, worst_case_fa_empirical, zero_effort_fa, FaQuery, SimConfig,
};
use wcfa::locscale::fit_generative_gaussian_baseline;
use wcfa::model::{CoreInit, Family, ModelSpec, QueryNoise, RealizedModel};
use wcfa::plda::{plda_llr, simultaneous_diagonalize, PldaScoreParams};
use wcfa::rng::stream;
use wcfa::synth::{generate_synthetic_table, oracle_curve, GroundTruth};
use wcfa::train::{
    batch_noise, hard_fa_estimate_on_noise, initial_raw, make_training_batch, model_curve,
    relaxed_fa_estimate, train_discriminative, validate_mae, BatchItem, BatchObjective,
    EvalConfig, TrainConfig,
};

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

// ---------------------------------------------------------------------------
// 1. empirical estimator exactness on the hand-enumerable table
// ---------------------------------------------------------------------------

#[test]
fn c01_empirical_worst_case_exact() {
    let _guard = serial();
    let started = Instant::now();
    let table = PairScoreTable::from_records(
        [("A", "X", 0.1), ("A", "X", 0.3), ("A", "Y", 0.5), ("A", "Y", 0.7)]
            .iter()
            .map(|(e, t, s)| ScoreRecord {
                enroll: SpeakerId::new(*e),
                test: SpeakerId::new(*t),
                score: *s,
                partition: None,
            })
            .collect(),
    )
    .unwrap();
    // exhaustive selection: both impostors drawn, Y wins on mean 0.6 vs 0.2;
    // exactly one of {0.5, 0.7} clears tau = 0.6
    let est = worst_case_fa_empirical(
        &table,
        &FaQuery { n: 2, tau: 0.6 },
        &SimConfig {
            trials: 1000,
            seed: 42,
            with_replacement: false,
        },
    )
    .unwrap();
    assert_eq!(est.p_fa, 0.5);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "PASS [1] empirical worst-case exact: p_fa = {} in {:.0} ms",
        est.p_fa,
        elapsed.as_secs_f64() * 1e3
    );
}

// ---------------------------------------------------------------------------
// 2. closed-form LLR vs full-matrix Gaussian log-density oracle
// ---------------------------------------------------------------------------

fn full_matrix_llr(d: &[f64], e: &[f64], t: &[f64]) -> f64 {
    let dim = d.len();
    let mut tar = DMatrix::zeros(2 * dim, 2 * dim);
    let mut non = DMatrix::zeros(2 * dim, 2 * dim);
    for k in 0..dim {
        tar[(k, k)] = 1.0 + d[k];
        tar[(dim + k, dim + k)] = 1.0 + d[k];
        tar[(k, dim + k)] = 1.0;
        tar[(dim + k, k)] = 1.0;
        non[(k, k)] = 1.0 + d[k];
        non[(dim + k, dim + k)] = 1.0 + d[k];
    }
    let x = DVector::from_iterator(2 * dim, e.iter().chain(t.iter()).copied());
    let logpdf = |cov: &DMatrix<f64>| {
        let chol = cov.clone().cholesky().unwrap();
        let half_logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
        let solved = chol.solve(&x);
        -0.5 * (2 * dim) as f64 * (2.0 * std::f64::consts::PI).ln() - half_logdet
            - 0.5 * x.dot(&solved)
    };
    logpdf(&tar) - logpdf(&non)
}

#[test]
fn c02_llr_matches_full_matrix_oracle() {
    let _guard = serial();
    let started = Instant::now();
    let mut rng = stream(2025, &[2]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let dim = rng.gen_range(1..=8);
        let d: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.01..5.0)).collect();
        let e: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let t: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let params = PldaScoreParams::new(d.clone(), None).unwrap();
        let fast = plda_llr(&params, &e, &t).unwrap();
        let oracle = full_matrix_llr(&d, &e, &t);
        worst = worst.max((fast - oracle).abs());
    }
    let elapsed = started.elapsed();
    assert!(worst < 1e-8, "worst abs diff {worst}");
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "PASS [2] closed-form LLR vs full-matrix oracle: worst |diff| = {worst:.2e} over 1000 cases in {:.2} s",
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// 3. simultaneous diagonalization congruence
// ---------------------------------------------------------------------------

#[test]
fn c03_simultaneous_diagonalization() {
    let _guard = serial();
    let mut rng = stream(2025, &[3]);
    let mut spd = |dim: usize| {
        let r = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        &r * r.transpose() + DMatrix::identity(dim, dim) * 0.05
    };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let b = spd(6);
        let w = spd(6);
        let (a, d) = simultaneous_diagonalize(&b, &w).unwrap();
        let tb = &a * &b * a.transpose();
        let tw = &a * &w * a.transpose();
        worst = worst.max((tb - DMatrix::identity(6, 6)).amax());
        worst = worst.max((tw - DMatrix::from_diagonal(&DVector::from_vec(d))).amax());
    }
    assert!(worst < 1e-8, "worst off-target entry {worst}");
    println!("PASS [3] simultaneous diagonalization: worst off-target entry = {worst:.2e} over 100 SPD pairs");
}

// ---------------------------------------------------------------------------
// 4. gradient verification on the full relaxed objective
// ---------------------------------------------------------------------------

#[test]
fn c04_gradient_verification_all_families() {
    let _guard = serial();
    let started = Instant::now();
    let gt = GroundTruth {
        model: RealizedModel::Plda(PldaScoreParams::new(vec![0.5, 1.0, 1.5, 2.0], None).unwrap()),
        n_speakers: 40,
        scores_per_pair: 10,
        seed: 4,
    };
    let table = generate_synthetic_table(&gt).unwrap();
    let warp = || {
        Some(
            ModelSpec::warp_for_range(
                table.pooled_quantile(0.0),
                table.pooled_quantile(1.0),
                8,
            )
            .unwrap(),
        )
    };
    let configs: Vec<(String, ModelSpec)> = vec![
        ("gaussian-ls".into(), ModelSpec::gaussian_ls(None)),
        ("gaussian-ls+warp".into(), ModelSpec::gaussian_ls(warp())),
        ("pwl-ls".into(), ModelSpec::pwl_ls(8, None).unwrap()),
        ("pwl-ls+warp".into(), ModelSpec::pwl_ls(8, warp()).unwrap()),
        ("plda".into(), ModelSpec::plda(4, None).unwrap()),
        ("plda+warp".into(), ModelSpec::plda(4, warp()).unwrap()),
    ];
    let cfg = TrainConfig {
        t_train: 50,
        batch_size: 4,
        n_train_max: 20,
        scores_per_pair: 5,
        seed: 4,
        ..TrainConfig::default()
    }
    .calibrated_to(&table);

    let mut summary = String::new();
    for (name, spec) in &configs {
        let params = initial_raw(spec, &table).unwrap();
        let targets = make_training_batch(&table, &cfg, 0).unwrap();
        let noises = batch_noise(spec, &targets, &cfg, 0);
        let objective = BatchObjective {
            spec,
            items: targets
                .iter()
                .zip(noises)
                .map(|(t, noise)| BatchItem {
                    query: t.query,
                    target: t.empirical_p_fa,
                    noise,
                })
                .collect(),
            alpha_over_std: cfg.alpha / cfg.score_std,
            beta: cfg.beta,
        };
        let report = finite_difference_check(&objective, &params, 1e-6, 1e-4).unwrap();
        assert!(
            report.passing,
            "{name}: max rel err {} at param {}",
            report.max_rel_err, report.worst_index
        );
        summary.push_str(&format!("{name}={:.1e} ", report.max_rel_err));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "PASS [4] gradient verification < 1e-4: {summary}in {:.1} s",
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// 5 + 6. synthetic protocol mirror and extrapolation consistency
// ---------------------------------------------------------------------------

struct Mirror {
    gt: GroundTruth,
    table: PairScoreTable,
    plda_artifact: ModelArtifact,
    plda_mae: f64,
    pwl_mae: f64,
    gaussian_mae: f64,
    baseline_mae: f64,
    elapsed_s: f64,
}

fn mirror() -> &'static Mirror {
    static MIRROR: OnceLock<Mirror> = OnceLock::new();
    MIRROR.get_or_init(|| {
        let started = Instant::now();
        let gt = GroundTruth {
            model: RealizedModel::Plda(
                PldaScoreParams::new(vec![0.5, 1.0, 1.5, 2.0], None).unwrap(),
            ),
            n_speakers: 200,
            scores_per_pair: 25,
            seed: 0,
        };
        let table = generate_synthetic_table(&gt).unwrap();
        let cfg = TrainConfig {
            t_train: 100,
            steps: 2000,
            lr: 3e-3,
            n_train_max: 130,
            scores_per_pair: 10,
            seed: 0,
            ..TrainConfig::default()
        }
        .calibrated_to(&table);
        let eval = EvalConfig {
            trials: 2000,
            scores_per_pair: 25,
            seed: 1,
        };
        let val_range = (cfg.tau_min, cfg.tau_max);
        let validate = |model: &RealizedModel| {
            validate_mae(model, &table, (130, 199), val_range, 40, &eval).unwrap()
        };

        let (plda_artifact, _) =
            train_discriminative(&ModelSpec::plda(4, None).unwrap(), &table, &cfg).unwrap();
        let plda_mae = validate(&plda_artifact.realized().unwrap());

        let (pwl_artifact, _) =
            train_discriminative(&ModelSpec::pwl_ls(16, None).unwrap(), &table, &cfg).unwrap();
        let pwl_mae = validate(&pwl_artifact.realized().unwrap());

        let (gauss_artifact, _) =
            train_discriminative(&ModelSpec::gaussian_ls(None), &table, &cfg).unwrap();
        let gaussian_mae = validate(&gauss_artifact.realized().unwrap());

        let baseline = fit_generative_gaussian_baseline(&table).unwrap();
        let baseline_mae = validate(&RealizedModel::LocScale(baseline));

        Mirror {
            gt,
            table,
            plda_artifact,
            plda_mae,
            pwl_mae,
            gaussian_mae,
            baseline_mae,
            elapsed_s: started.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn c05_synthetic_protocol_mirror() {
    let _guard = serial();
    let m = mirror();
    assert!(
        m.plda_mae <= 2.5,
        "discriminative PLDA held-out MAE {}% > 2.5%",
        m.plda_mae
    );
    assert!(
        m.pwl_mae <= 2.5,
        "general-CDF location-scale held-out MAE {}% > 2.5%",
        m.pwl_mae
    );
    let best = m.plda_mae.min(m.pwl_mae).min(m.gaussian_mae);
    assert!(
        m.baseline_mae > best,
        "generative baseline ({}%) not strictly worse than best discriminative ({}%)",
        m.baseline_mae,
        best
    );
    assert!(m.elapsed_s < 900.0, "mirror took {} s", m.elapsed_s);
    println!(
        "PASS [5] synthetic protocol mirror: MAE plda={:.2}% pwl-ls={:.2}% gaussian-ls={:.2}% | generative baseline={:.2}% (worse than best) | {:.0} s",
        m.plda_mae, m.pwl_mae, m.gaussian_mae, m.baseline_mae, m.elapsed_s
    );
}

#[test]
fn c06_extrapolation_consistency_at_10x() {
    let _guard = serial();
    let m = mirror();
    // mid-range threshold: the middle of the empirical score mass
    let mid_tau = m.table.pooled_quantile(0.5);
    let oracle = oracle_curve(&m.gt, &[2000], &[mid_tau], 4000, 77).unwrap();
    let fitted = model_curve(
        &m.plda_artifact.realized().unwrap(),
        &[2000],
        &[mid_tau],
        4000,
        25,
        0.99,
        78,
    )
    .unwrap();
    let diff = (oracle.rows()[0].p_fa - fitted.rows()[0].p_fa).abs();
    assert!(diff <= 0.04, "N=2000 gap {diff} at tau {mid_tau}");
    println!(
        "PASS [6] extrapolation at N=2000 (10x beyond data): oracle {:.4} vs fitted {:.4}, |diff| = {:.4} <= 0.04",
        oracle.rows()[0].p_fa,
        fitted.rows()[0].p_fa,
        diff
    );
}

// ---------------------------------------------------------------------------
// 7. relaxation limits: sharp sigmoid + sharp softmax vs hard estimates
// ---------------------------------------------------------------------------

#[test]
fn c07_relaxation_limits() {
    let _guard = serial();
    let gt = GroundTruth {
        model: RealizedModel::Plda(PldaScoreParams::new(vec![0.5, 1.0, 1.5, 2.0], None).unwrap()),
        n_speakers: 40,
        scores_per_pair: 10,
        seed: 7,
    };
    let table = generate_synthetic_table(&gt).unwrap();
    let specs = vec![
        ModelSpec::gaussian_ls(None),
        ModelSpec::pwl_ls(16, None).unwrap(),
        ModelSpec::plda(4, None).unwrap(),
    ];
    let cfg = TrainConfig {
        alpha: 1000.0,
        beta: 100.0,
        ..TrainConfig::default()
    }
    .calibrated_to(&table);
    let mut worst: f64 = 0.0;
    let mut rng = stream(2025, &[7]);
    for spec in &specs {
        let raw = initial_raw(spec, &table).unwrap();
        for qi in 0..20 {
            let query = FaQuery {
                n: rng.gen_range(1..=40),
                tau: rng.gen_range(cfg.tau_min..cfg.tau_max),
            };
            let noise = QueryNoise::generate(
                spec.family,
                spec.dim,
                400,
                query.n,
                5,
                7,
                &[100 + qi],
            );
            let relaxed = relaxed_fa_estimate(spec, &raw, &query, &cfg, &noise);
            let hard = hard_fa_estimate_on_noise(spec, &raw, query.tau, &noise);
            worst = worst.max((relaxed - hard).abs());
        }
    }
    assert!(worst < 0.005, "worst |relaxed - hard| = {worst}");
    println!(
        "PASS [7] relaxation limits (alpha=1000, beta=100, shared noise): worst |relaxed - hard| = {worst:.2e} < 0.005"
    );
}

// ---------------------------------------------------------------------------
// 8. invariance under strictly increasing affine score warps
// ---------------------------------------------------------------------------

#[test]
fn c08_affine_warp_invariance() {
    let _guard = serial();
    let mut rng = stream(2025, &[8]);
    let mut records = Vec::new();
    // enroll tokens s* and test tokens t* never collide, so the full
    // cross product is valid
    for e in 0..6 {
        for t in 0..6 {
            for _ in 0..8 {
                records.push(ScoreRecord {
                    enroll: SpeakerId::new(format!("s{e}")),
                    test: SpeakerId::new(format!("t{t}")),
                    score: rng.sample::<f64, _>(StandardNormal) * 2.0 + 0.3,
                    partition: None,
                });
            }
        }
    }
    let table = PairScoreTable::from_records(records.clone()).unwrap();
    let (a, b) = (2.5, -1.75); // strictly increasing affine map
    let warped_table = PairScoreTable::from_records(
        records
            .iter()
            .map(|r| ScoreRecord {
                score: a * r.score + b,
                ..r.clone()
            })
            .collect(),
    )
    .unwrap();

    let mut worst: f64 = 0.0;
    for (enroll, test, set) in table.iter_pairs() {
        let wset = warped_table
            .scores_by_index(enroll, test)
            .expect("same pair structure");
        for tau in [-2.0, -0.3, 0.3, 1.4] {
            worst = worst.max((fa_rate(set, tau) - fa_rate(wset, a * tau + b)).abs());
        }
    }
    for tau in [-2.0, -0.3, 0.3, 1.4] {
        worst = worst
            .max((zero_effort_fa(&table, tau) - zero_effort_fa(&warped_table, a * tau + b)).abs());
        let cfg = SimConfig {
            trials: 500,
            seed: 88,
            with_replacement: false,
        };
        let plain = worst_case_fa_empirical(&table, &FaQuery { n: 3, tau }, &cfg).unwrap();
        let warped = worst_case_fa_empirical(
            &warped_table,
            &FaQuery {
                n: 3,
                tau: a * tau + b,
            },
            &cfg,
        )
        .unwrap();
        worst = worst.max((plain.p_fa - warped.p_fa).abs());
    }
    assert!(worst <= 1e-12, "worst deviation {worst}");
    println!("PASS [8] affine warp invariance: worst deviation = {worst:.1e} <= 1e-12");
}

// ---------------------------------------------------------------------------
// 9. CLI determinism across thread counts
// ---------------------------------------------------------------------------

#[test]
fn c09_cli_determinism_across_threads() {
    let _guard = serial();
    let bin = env!("CARGO_BIN_EXE_wcfa");
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("gt.json");
    std::fs::write(
        &truth,
        r#"{"family":"plda","d":[0.5,1.0,1.5,2.0],"n_speakers":30,"scores_per_pair":6,"seed":0}"#,
    )
    .unwrap();
    let scores = dir.path().join("scores.csv");
    let run = |args: &[&str]| {
        let out = std::process::Command::new(bin)
            .args(args)
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run(&[
        "simulate",
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        scores.to_str().unwrap(),
    ]);

    let est = |threads: &str, out: &std::path::Path| {
        run(&[
            "estimate",
            "--scores",
            scores.to_str().unwrap(),
            "--n-grid",
            "1,4,16",
            "--tau",
            "-1.0,0.5",
            "--trials",
            "400",
            "--seed",
            "7",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
    };
    let e1 = dir.path().join("e1.csv");
    let e8 = dir.path().join("e8.csv");
    est("1", &e1);
    est("8", &e8);
    let bytes1 = std::fs::read(&e1).unwrap();
    let bytes8 = std::fs::read(&e8).unwrap();
    assert_eq!(bytes1, bytes8, "estimate CSVs differ across thread counts");

    let model = dir.path().join("model.json");
    run(&[
        "fit",
        "--scores",
        scores.to_str().unwrap(),
        "--family",
        "plda",
        "--dim",
        "2",
        "--steps",
        "3",
        "--t-train",
        "20",
        "--batch-size",
        "4",
        "--n-train-max",
        "8",
        "--scores-per-pair",
        "4",
        "--seed",
        "0",
        "--out",
        model.to_str().unwrap(),
    ]);
    let extr = |threads: &str, out: &std::path::Path| {
        run(&[
            "extrapolate",
            "--model",
            model.to_str().unwrap(),
            "--n-grid",
            "1,100,10000",
            "--tau",
            "0.0,1.0",
            "--trials",
            "300",
            "--seed",
            "3",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
    };
    let x1 = dir.path().join("x1.csv");
    let x8 = dir.path().join("x8.csv");
    extr("1", &x1);
    extr("8", &x8);
    let xbytes1 = std::fs::read(&x1).unwrap();
    let xbytes8 = std::fs::read(&x8).unwrap();
    assert_eq!(xbytes1, xbytes8, "extrapolate CSVs differ across thread counts");
    assert_eq!(xbytes1.iter().filter(|&&b| b == b'\n').count(), 7);
    println!("PASS [9] CLI determinism: estimate and extrapolate CSVs byte-identical for --threads 1 vs 8");
}

// ---------------------------------------------------------------------------
// 10. property suites, >= 1000 random instances each
// ---------------------------------------------------------------------------

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cases(1000))]

    // monotone piecewise-linear realization is strictly increasing and
    // inversion is a left inverse on sane parameter scales
    #[test]
    fn p10_pwl_monotone_and_invertible(
        raw in prop::collection::vec(-4.0f64..4.0, 2..16),
        span in 0.5f64..5.0,
        lo in -3.0f64..3.0,
        x01 in 0.0f64..1.0,
    ) {
        let n = raw.len();
        let knots: Vec<f64> = (0..n).map(|i| lo + span * i as f64 / (n - 1) as f64).collect();
        let f = wcfa::pwl::MonotonePwl::new(wcfa::pwl::PwlDomain::RealLine, knots, raw)
            .unwrap();
        let ys = f.knot_values();
        prop_assert!(ys.windows(2).all(|w| w[1] > w[0]));
        let x = lo + span * x01;
        let y = f.eval_with(&ys, x);
        prop_assert!((f.inverse(y) - x).abs() < 1e-10);
    }

    // percentile bootstrap collapses on degenerate inputs: the interval has
    // zero width and sits at the common value (up to summation roundoff)
    #[test]
    fn p10_bootstrap_degenerate(
        value in -10.0f64..10.0,
        len in 1usize..40,
        b in 1usize..200,
        seed in 0u64..1000,
    ) {
        let per_trial = vec![value; len];
        let mut rng = stream(seed, &[10]);
        let (lo, hi) = bootstrap_ci(&per_trial, 0.99, b, &mut rng);
        prop_assert_eq!(lo, hi);
        prop_assert!((lo - value).abs() <= 1e-12 * value.abs().max(1.0));
    }

    // the best similarity over a growing (nested) candidate prefix never drops
    #[test]
    fn p10_nested_subset_monotonicity(
        sims in prop::collection::vec(-100.0f64..100.0, 1..60),
    ) {
        let mut best = f64::NEG_INFINITY;
        let mut prev = f64::NEG_INFINITY;
        for &s in &sims {
            best = best.max(s);
            prop_assert!(best >= prev);
            prev = best;
        }
    }

    // persist/load is an exact involution on valid artifacts
    #[test]
    fn p10_artifact_roundtrip(
        family_pick in 0u8..3,
        dim in 1usize..12,
        values in prop::collection::vec(-5.0f64..5.0, 40),
        seed in 0u64..u64::MAX,
    ) {
        let spec = match family_pick {
            0 => ModelSpec::gaussian_ls(None),
            1 => ModelSpec::pwl_ls(8, None).unwrap(),
            _ => ModelSpec::plda(dim, None).unwrap(),
        };
        let params: Vec<f64> = values[..spec.param_len()].to_vec();
        let artifact = ModelArtifact::from_spec(
            &spec,
            params,
            Provenance { config_hash: format!("{seed:x}"), seed },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        artifact.save(&path).unwrap();
        let back = ModelArtifact::load(&path).unwrap();
        prop_assert_eq!(artifact.params.len(), back.params.len());
        for (a, b) in artifact.params.iter().zip(&back.params) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn c10_property_suites_banner() {
    // the four p10_* proptest blocks above each run 1000 random instances
    let _guard = serial();
    println!("PASS [10] property suites: pwl monotonicity/inversion, bootstrap degenerate, nested-subset monotonicity, artifact involution (1000 cases each)");
}

// ---------------------------------------------------------------------------
// supporting checks used by several criteria
// ---------------------------------------------------------------------------

#[test]
fn moment_matched_baseline_is_reproducible() {
    let _guard = serial();
    let gt = GroundTruth {
        model: RealizedModel::Plda(PldaScoreParams::new(vec![0.5, 1.5], None).unwrap()),
        n_speakers: 30,
        scores_per_pair: 12,
        seed: 5,
    };
    let table = generate_synthetic_table(&gt).unwrap();
    let a = fit_generative_gaussian_baseline(&table).unwrap();
    let b = fit_generative_gaussian_baseline(&table).unwrap();
    assert_eq!(a.hyper_mean, b.hyper_mean);
    assert_eq!(a.hyper_chol, b.hyper_chol);
}

#[test]
fn initial_params_cover_every_family() {
    let _guard = serial();
    let spec = ModelSpec::plda(3, None).unwrap();
    let raw = spec
        .initial_params(&CoreInit::Plda {
            d: vec![1.0, 2.0, 0.5],
        })
        .unwrap();
    assert_eq!(raw.len(), spec.param_len());
    assert_eq!(spec.family, Family::Plda);
}
