use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use uncertain_eval::barrier::{barrier_distribution, distinguishability_test};
use uncertain_eval::feedback::{fit_uncertainty, pooled_sigma, SigmaFallback};
use uncertain_eval::io;
use uncertain_eval::json;
use uncertain_eval::metrics::{rmse_distribution, McConfig};
use uncertain_eval::simulate::{draw_trials, generate_population, PopulationSpec};
use uncertain_eval::strategies::{
    run_strategy_comparison, DenoiseConfig, OmissionConfig, PredictorNoiseConfig, Resampler,
    StrategyInputs, StrategyPlan,
};

use crate::manifest::RunManifest;
use crate::{manifest_path_for, CliError};

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        log::info!("no seed given, using {s}");
        s
    })
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    obs: PathBuf,
    /// zero | pooled | fixed:<sigma>
    #[arg(long, default_value = "pooled")]
    fallback: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct FitSummary {
    n: usize,
    single_trial_pairs: usize,
    #[serde(serialize_with = "json::optional_number")]
    pooled_sigma: Option<f64>,
    fallback: String,
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let fallback: SigmaFallback = args.fallback.parse()?;
    let obs = io::read_observations_path(&args.obs)?;
    let data = fit_uncertainty(&obs, fallback)?;
    io::write_file(&args.out, |w| io::write_feedback(w, &data))?;
    RunManifest::new("fit")
        .input("obs", &args.obs)
        .config("fallback", &args.fallback)
        .output(&args.out)
        .write(&manifest_path_for(&args.out))?;

    let single = data
        .entries()
        .iter()
        .filter(|e| e.trials == Some(1))
        .count();
    print_json(&FitSummary {
        n: data.len(),
        single_trial_pairs: single,
        pooled_sigma: pooled_sigma(&data).ok(),
        fallback: args.fallback,
    })
}

#[derive(Debug, Args)]
pub struct DistinguishArgs {
    #[arg(long)]
    feedback: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    s1: f64,
    #[arg(long, allow_hyphen_values = true)]
    s2: f64,
}

pub fn distinguish(args: DistinguishArgs) -> Result<(), CliError> {
    let data = io::read_feedback_path(&args.feedback)?;
    let barrier = barrier_distribution(&data)?;
    let verdict = distinguishability_test(args.s1, args.s2, &barrier)?;
    print_json(&verdict)
}

#[derive(Debug, Args)]
pub struct RmseDistArgs {
    #[arg(long)]
    feedback: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Std of Gaussian noise attached to each prediction.
    #[arg(long)]
    tau: Option<f64>,
    /// Write every sample to this CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Serialize)]
struct RmseDistSummary {
    #[serde(serialize_with = "json::number")]
    mean: f64,
    #[serde(serialize_with = "json::number")]
    variance: f64,
    sample_count: usize,
    seed: u64,
    #[serde(serialize_with = "json::optional_number")]
    tau: Option<f64>,
    #[serde(serialize_with = "json::number")]
    barrier_mean: f64,
    #[serde(serialize_with = "json::number")]
    barrier_variance: f64,
}

pub fn rmse_dist(args: RmseDistArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed);
    let cfg = McConfig {
        sample_count: args.samples,
        seed,
        predictor_tau: args.tau,
    };
    cfg.validate()?;
    let data = io::read_feedback_path(&args.feedback)?;
    let preds = io::read_predictions_path(&args.pred)?;
    let barrier = barrier_distribution(&data)?;
    let dist = rmse_distribution(&data, &preds, &cfg)?;

    if let Some(dump) = &args.dump {
        io::write_file(dump, |w| io::write_samples(w, &dist.samples))?;
        RunManifest::new("rmse-dist")
            .input("feedback", &args.feedback)
            .input("pred", &args.pred)
            .config("samples", args.samples)
            .config("tau", args.tau)
            .seed(seed)
            .output(dump)
            .write(&manifest_path_for(dump))?;
    }

    print_json(&RmseDistSummary {
        mean: dist.mean,
        variance: dist.variance,
        sample_count: dist.sample_count,
        seed,
        tau: args.tau,
        barrier_mean: barrier.mean(),
        barrier_variance: barrier.variance(),
    })
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ResamplerArg {
    Median,
    Redraw,
}

#[derive(Debug, Args)]
pub struct StrategiesArgs {
    /// Repeated-trial ratings (needed for de-noising).
    #[arg(long)]
    obs: Option<PathBuf>,
    /// Per-pair mu/sigma; fitted from --obs when absent.
    #[arg(long)]
    feedback: Option<PathBuf>,
    #[arg(long)]
    pred: PathBuf,
    /// Run re-rating de-noising with this distance threshold (`inf` allowed).
    #[arg(long)]
    denoise_threshold: Option<f64>,
    #[arg(long, default_value_t = 100)]
    denoise_max_iter: usize,
    #[arg(long, value_enum, default_value = "median")]
    denoise_resampler: ResamplerArg,
    /// Run the predictor-noise strategy with this noise std.
    #[arg(long)]
    tau: Option<f64>,
    /// Run deviation omission at this significance level.
    #[arg(long)]
    omit_alpha: Option<f64>,
    /// Monte Carlo samples for the predictor-noise strategy.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn strategies(args: StrategiesArgs) -> Result<(), CliError> {
    if args.denoise_threshold.is_none() && args.tau.is_none() && args.omit_alpha.is_none() {
        return Err(CliError::Input(
            "no strategy requested; pass --denoise-threshold, --tau or --omit-alpha".into(),
        ));
    }
    if args.obs.is_none() && args.feedback.is_none() {
        return Err(CliError::Input("pass --obs or --feedback".into()));
    }
    let seed = resolve_seed(args.seed);
    let obs = args.obs.as_deref().map(io::read_observations_path).transpose()?;
    let feedback = args.feedback.as_deref().map(io::read_feedback_path).transpose()?;
    let preds = io::read_predictions_path(&args.pred)?;

    let plan = StrategyPlan {
        denoise: args.denoise_threshold.map(|threshold| DenoiseConfig {
            threshold,
            max_iterations: args.denoise_max_iter,
            resampler: match args.denoise_resampler {
                ResamplerArg::Median => Resampler::ReplaceWithMedian,
                ResamplerArg::Redraw => Resampler::RedrawFromModel,
            },
            seed,
        }),
        predictor_noise: args.tau.map(|tau| PredictorNoiseConfig {
            tau,
            mc: McConfig::new(args.samples, seed),
        }),
        omission: args.omit_alpha.map(|alpha| OmissionConfig { alpha }),
    };
    let inputs = StrategyInputs {
        observations: obs.as_ref(),
        feedback: feedback.as_ref(),
        predictions: &preds,
    };
    let reports = run_strategy_comparison(&inputs, &plan)?;
    print_json(&reports)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Population spec JSON.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    trials: u32,
    /// Round draws to the scale's steps and clamp them to its bounds.
    #[arg(long)]
    discretise: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const FEEDBACK_FILE: &str = "feedback.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

fn read_spec(path: &Path) -> Result<PopulationSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let spec: PopulationSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("invalid spec {}: {e}", path.display())))?;
    spec.validate()
        .map_err(|e| CliError::Input(format!("invalid spec {}: {e}", path.display())))?;
    Ok(spec)
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut spec = read_spec(&args.spec)?;
    if args.trials == 0 {
        return Err(CliError::Input("--trials must be at least 1".into()));
    }
    let seed = resolve_seed(spec.seed);
    spec.seed = Some(seed);

    let truth = generate_population(&spec, seed)?;
    let obs = draw_trials(&truth, args.trials, args.discretise, seed)?;
    std::fs::create_dir_all(&args.out_dir)?;

    let obs_path = args.out_dir.join(OBSERVATIONS_FILE);
    let fb_path = args.out_dir.join(FEEDBACK_FILE);
    let pred_path = args.out_dir.join(PREDICTIONS_FILE);
    io::write_file(&obs_path, |w| io::write_observations(w, &obs))?;
    io::write_file(&fb_path, |w| io::write_feedback(w, &truth.dataset))?;
    let mut manifest = RunManifest::new("simulate")
        .input("spec", &args.spec)
        .config("population", &spec)
        .config("trials", args.trials)
        .config("discretised", args.discretise)
        .seed(seed)
        .output(&obs_path)
        .output(&fb_path);
    if let Some(preds) = &truth.predictions {
        io::write_file(&pred_path, |w| io::write_predictions(w, preds))?;
        manifest = manifest.output(&pred_path);
    }
    manifest.write(&args.out_dir.join(MANIFEST_FILE))?;
    print_json(&manifest)
}
