//! Command-line front end: estimate, fit, extrapolate, simulate,
//! validate, gradcheck.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wcfa::artifact::ModelArtifact;
use wcfa::autodiff::finite_difference_check;
use wcfa::curve::{write_curve, CurveFormat, CurveRow, FaCurve};
use wcfa::data::{load_score_list, load_score_table, PairScoreTable, ScoreFormat};
use wcfa::estimator::{bootstrap_ci, min_dcf_threshold, worst_case_fa_empirical, FaQuery, SimConfig};
use wcfa::model::ModelSpec;
use wcfa::rng::{derive_seed, stream};
use wcfa::synth::{generate_synthetic_table, GroundTruthFile};
use wcfa::train::{
    batch_noise, extrapolate, initial_raw, make_training_batch, train_discriminative,
    validate_mae, BatchItem, BatchObjective, EvalConfig, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "wcfa",
    about = "Worst-case false-alarm estimation and extrapolation from detection scores",
    version
)]
struct Cli {
    /// Worker thread cap (results are identical for any value).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Csv,
    Jsonl,
}

impl From<FileFormat> for ScoreFormat {
    fn from(f: FileFormat) -> ScoreFormat {
        match f {
            FileFormat::Csv => ScoreFormat::Csv,
            FileFormat::Jsonl => ScoreFormat::Jsonl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    GaussianLs,
    PwlLs,
    Plda,
}

#[derive(Args)]
struct ScoresArgs {
    /// Score file with columns/keys enroll,test,score[,partition].
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FileFormat,
    /// Keep only rows with this partition label.
    #[arg(long)]
    partition: Option<String>,
}

impl ScoresArgs {
    fn load(&self) -> wcfa::Result<PairScoreTable> {
        load_score_table(&self.scores, self.format.into(), self.partition.as_deref())
    }
}

#[derive(Args)]
struct TauArgs {
    /// Explicit thresholds.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    tau: Vec<f64>,
    /// Target-trial scores (one per line) for DCF-derived thresholds.
    #[arg(long)]
    dcf_target_scores: Option<PathBuf>,
    /// DCF cost triple c_miss,c_fa,p_target; repeatable.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Append)]
    dcf_costs: Vec<f64>,
}

impl TauArgs {
    fn resolve(&self, nontarget: &[f64]) -> wcfa::Result<Vec<f64>> {
        let mut taus = self.tau.clone();
        if !self.dcf_costs.is_empty() {
            if !self.dcf_costs.len().is_multiple_of(3) {
                return Err(wcfa::Error::Invalid(
                    "--dcf-costs takes c_miss,c_fa,p_target triples".into(),
                ));
            }
            let target_path = self.dcf_target_scores.as_ref().ok_or_else(|| {
                wcfa::Error::Invalid("--dcf-costs requires --dcf-target-scores".into())
            })?;
            let targets = load_score_list(target_path)?;
            for triple in self.dcf_costs.chunks(3) {
                taus.push(min_dcf_threshold(
                    &targets, nontarget, triple[0], triple[1], triple[2],
                ));
            }
        }
        if taus.is_empty() {
            return Err(wcfa::Error::Invalid(
                "no thresholds: pass --tau or --dcf-costs".into(),
            ));
        }
        Ok(taus)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Empirical worst-case FA curve from a score file.
    Estimate {
        #[command(flatten)]
        scores: ScoresArgs,
        /// Impostor population sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n_grid: Vec<usize>,
        #[command(flatten)]
        taus: TauArgs,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw impostor sets with replacement.
        #[arg(long)]
        with_replacement: bool,
        /// Bootstrap confidence level.
        #[arg(long, default_value_t = 0.99)]
        ci: f64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON copy.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Optional SVG plot.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Fit a score model discriminatively against empirical targets.
    Fit {
        #[command(flatten)]
        scores: ScoresArgs,
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// PLDA latent dimension.
        #[arg(long, default_value_t = 10)]
        dim: usize,
        /// Add a learnable monotone score warp.
        #[arg(long)]
        warp: bool,
        #[arg(long, default_value_t = 16)]
        warp_segments: usize,
        #[arg(long, default_value_t = 16)]
        quantile_segments: usize,
        #[arg(long, default_value_t = 300)]
        t_train: usize,
        #[arg(long, default_value_t = 20)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 20.0)]
        alpha: f64,
        #[arg(long, default_value_t = 10.0)]
        beta: f64,
        #[arg(long, default_value_t = 660)]
        n_train_max: usize,
        /// Threshold range lower bound (default: 0.1% pooled quantile).
        #[arg(long, allow_hyphen_values = true)]
        tau_min: Option<f64>,
        /// Threshold range upper bound (default: 99.9% pooled quantile).
        #[arg(long, allow_hyphen_values = true)]
        tau_max: Option<f64>,
        #[arg(long, default_value_t = 10)]
        scores_per_pair: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Training log (JSON lines); defaults to <out>.log.jsonl.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Extrapolate a fitted model over arbitrary population sizes.
    Extrapolate {
        /// Model JSON produced by `fit`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        n_grid: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        tau: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 25)]
        scores_per_pair: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Generate a synthetic score table from a ground-truth spec JSON.
    Simulate {
        #[arg(long)]
        truth: PathBuf,
        /// Output score CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Held-out MAE of a fitted model against empirical estimates.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        scores: ScoresArgs,
        #[arg(long)]
        n_lo: usize,
        #[arg(long)]
        n_hi: usize,
        #[arg(long, allow_hyphen_values = true)]
        tau_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        tau_max: Option<f64>,
        #[arg(long, default_value_t = 50)]
        queries: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 25)]
        scores_per_pair: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Verify training-objective gradients against central differences.
    Gradcheck {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long)]
        warp: bool,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        #[arg(long, default_value_t = 5)]
        scores_per_pair: usize,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn make_spec(
    family: FamilyArg,
    dim: usize,
    warp: bool,
    warp_segments: usize,
    quantile_segments: usize,
    table: &PairScoreTable,
) -> wcfa::Result<ModelSpec> {
    let warp = if warp {
        let pooled = table.pooled_scores();
        let lo = pooled.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = pooled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(ModelSpec::warp_for_range(lo, hi, warp_segments)?)
    } else {
        None
    };
    match family {
        FamilyArg::GaussianLs => Ok(ModelSpec::gaussian_ls(warp)),
        FamilyArg::PwlLs => ModelSpec::pwl_ls(quantile_segments, warp),
        FamilyArg::Plda => ModelSpec::plda(dim, warp),
    }
}

fn write_outputs(
    curve: &FaCurve,
    out: &PathBuf,
    json: &Option<PathBuf>,
    svg: &Option<PathBuf>,
) -> wcfa::Result<()> {
    write_curve(curve, out, CurveFormat::Csv)?;
    if let Some(path) = json {
        write_curve(curve, path, CurveFormat::Json)?;
    }
    if let Some(path) = svg {
        write_curve(curve, path, CurveFormat::Svg)?;
    }
    Ok(())
}

const DOM_CLI_CI: u64 = 30;
const DOM_GRADCHECK: u64 = 31;

fn run(cli: Cli) -> wcfa::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| wcfa::Error::Invalid(e.to_string()))?;
    }
    match cli.command {
        Command::Estimate {
            scores,
            n_grid,
            taus,
            trials,
            seed,
            with_replacement,
            ci,
            out,
            json,
            svg,
        } => {
            let table = scores.load()?;
            let taus = taus.resolve(&table.pooled_scores())?;
            let mut curve = FaCurve::new();
            for &n in &n_grid {
                for (ti, &tau) in taus.iter().enumerate() {
                    let est = worst_case_fa_empirical(
                        &table,
                        &FaQuery { n, tau },
                        &SimConfig {
                            trials,
                            seed: derive_seed(seed, &[n as u64, ti as u64]),
                            with_replacement,
                        },
                    )?;
                    let mut rng = stream(seed, &[DOM_CLI_CI, n as u64, ti as u64]);
                    let (lo, hi) = bootstrap_ci(&est.per_trial, ci, 1000, &mut rng);
                    curve.push(CurveRow {
                        n: n as u64,
                        tau,
                        p_fa: est.p_fa,
                        ci_lo: lo.min(est.p_fa).max(0.0),
                        ci_hi: hi.max(est.p_fa).min(1.0),
                    })?;
                }
            }
            write_outputs(&curve, &out, &json, &svg)?;
            eprintln!("wrote {} rows to {}", curve.rows().len(), out.display());
        }
        Command::Fit {
            scores,
            family,
            dim,
            warp,
            warp_segments,
            quantile_segments,
            t_train,
            batch_size,
            lr,
            steps,
            alpha,
            beta,
            n_train_max,
            tau_min,
            tau_max,
            scores_per_pair,
            seed,
            out,
            log,
        } => {
            let table = scores.load()?;
            let spec = make_spec(family, dim, warp, warp_segments, quantile_segments, &table)?;
            let mut cfg = TrainConfig {
                t_train,
                batch_size,
                lr,
                steps,
                alpha,
                beta,
                n_train_max,
                scores_per_pair,
                seed,
                ..TrainConfig::default()
            }
            .calibrated_to(&table);
            if let Some(t) = tau_min {
                cfg.tau_min = t;
            }
            if let Some(t) = tau_max {
                cfg.tau_max = t;
            }
            let (artifact, records) = train_discriminative(&spec, &table, &cfg)?;
            artifact.save(&out)?;
            let log_path = log.unwrap_or_else(|| {
                let mut p = out.clone();
                p.set_extension("log.jsonl");
                p
            });
            let mut text = String::new();
            for r in &records {
                text.push_str(&serde_json::to_string(r).expect("log record serializes"));
                text.push('\n');
            }
            std::fs::write(&log_path, text).map_err(|e| wcfa::Error::io(&log_path, e))?;
            let final_loss = records.last().map(|r| r.loss).unwrap_or(f64::NAN);
            eprintln!(
                "fit {} model -> {} (final loss {:.6}, log {})",
                artifact.family,
                out.display(),
                final_loss,
                log_path.display()
            );
        }
        Command::Extrapolate {
            model,
            n_grid,
            tau,
            trials,
            scores_per_pair,
            seed,
            out,
            json,
            svg,
        } => {
            let artifact = ModelArtifact::load(&model)?;
            let curve = extrapolate(&artifact, &n_grid, &tau, trials, scores_per_pair, seed)?;
            write_outputs(&curve, &out, &json, &svg)?;
            eprintln!("wrote {} rows to {}", curve.rows().len(), out.display());
        }
        Command::Simulate { truth, out } => {
            let gt = GroundTruthFile::load(&truth)?;
            let table = generate_synthetic_table(&gt)?;
            let mut text = String::from("enroll,test,score\n");
            let speakers = table.speakers();
            let mut pairs: Vec<_> = table.iter_pairs().collect();
            pairs.sort_by_key(|(e, t, _)| (*e, *t));
            for (e, t, set) in pairs {
                for s in set.scores() {
                    text.push_str(&format!(
                        "{},{},{}\n",
                        speakers[e as usize], speakers[t as usize], s
                    ));
                }
            }
            std::fs::write(&out, text).map_err(|e| wcfa::Error::io(&out, e))?;
            eprintln!(
                "wrote {} scores over {} pairs to {}",
                table.total_scores(),
                table.n_pairs(),
                out.display()
            );
        }
        Command::Validate {
            model,
            scores,
            n_lo,
            n_hi,
            tau_min,
            tau_max,
            queries,
            trials,
            scores_per_pair,
            seed,
        } => {
            let table = scores.load()?;
            let artifact = ModelArtifact::load(&model)?;
            let realized = artifact.realized()?;
            let tau_range = (
                tau_min.unwrap_or_else(|| table.pooled_quantile(0.001)),
                tau_max.unwrap_or_else(|| table.pooled_quantile(0.999)),
            );
            let mae = validate_mae(
                &realized,
                &table,
                (n_lo, n_hi),
                tau_range,
                queries,
                &EvalConfig {
                    trials,
                    scores_per_pair,
                    seed,
                },
            )?;
            println!("MAE {mae:.4}% over {queries} held-out queries (N in [{n_lo}, {n_hi}])");
        }
        Command::Gradcheck {
            family,
            dim,
            warp,
            trials,
            n_max,
            scores_per_pair,
            epsilon,
            tolerance,
            seed,
        } => {
            // a small synthetic corpus stands in for real scores
            let gt = wcfa::synth::GroundTruth {
                model: wcfa::model::RealizedModel::Plda(wcfa::plda::PldaScoreParams::new(
                    vec![0.5, 1.0, 1.5, 2.0],
                    None,
                )?),
                n_speakers: 40,
                scores_per_pair: 10,
                seed: derive_seed(seed, &[DOM_GRADCHECK]),
            };
            let table = generate_synthetic_table(&gt)?;
            let spec = make_spec(family, dim, warp, 8, 8, &table)?;
            let cfg = TrainConfig {
                t_train: trials,
                batch_size: 4,
                n_train_max: n_max.max(2),
                scores_per_pair,
                seed,
                ..TrainConfig::default()
            }
            .calibrated_to(&table);
            let params = initial_raw(&spec, &table)?;
            let targets = make_training_batch(&table, &cfg, 0)?;
            let noises = batch_noise(&spec, &targets, &cfg, 0);
            let objective = BatchObjective {
                spec: &spec,
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
            let report = finite_difference_check(&objective, &params, epsilon, tolerance)?;
            if report.passing {
                println!(
                    "PASS max_rel_err={:.3e} (tolerance {tolerance:.1e}, {} params)",
                    report.max_rel_err,
                    params.len()
                );
            } else {
                println!(
                    "FAIL max_rel_err={:.3e} at param {} (tolerance {tolerance:.1e})",
                    report.max_rel_err, report.worst_index
                );
                return Err(wcfa::Error::Invalid(
                    "gradient check failed".into(),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
