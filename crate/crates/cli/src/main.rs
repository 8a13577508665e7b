mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use nnsurv::bounds::{bound_rhs, capital_lambda, knn_sufficient, BoundInputs, BoundKind};
use nnsurv::data::CsvSchema;
use nnsurv::experiment::{
    bench_plot_svg, consistency_plot_svg, run_benchmark_detailed, run_consistency_study, verify_knn_bound,
    write_rows_csv, BoundSetting, ConsistencySpec, DataSource, ExperimentSpec, GridOverride, KRule,
};
use nnsurv::model::{Estimator, MethodSpec, TreeOptions};
use nnsurv::evaluation::CensoringEstimator;
use nnsurv::selection::Criterion;
use nnsurv::synthetic::{write_synthetic_csv_to, GroundTruthModel};
use nnsurv::{Kernel, Metric};

use args::{
    BenchArgs, BoundsArgs, CensoringArg, Cli, Command, ConsistencyArgs, CriterionArg, KRuleArg, KernelArg, MetricArg, ModelArgs,
    ModelName, SynthArgs, VerifyArgs,
};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] nnsurv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Output { .. } => 3,
            CliError::Invariant(_) => 4,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(
                nnsurv::Error::InvalidConfig(_) | nnsurv::Error::UnTunable(_) | nnsurv::Error::KTooLarge { .. },
            ) => 2,
            CliError::Core(_) => 4,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    log::info!(
        "global: seed={} out_dir={} threads={}",
        cli.seed,
        cli.out_dir.display(),
        rayon::current_num_threads()
    );
    log::info!("arguments: {:?}", cli.command);
    fs::create_dir_all(&cli.out_dir).map_err(|source| CliError::Output {
        path: cli.out_dir.clone(),
        source,
    })?;
    match &cli.command {
        Command::Bench(a) => bench(cli, a, false),
        Command::Cv(a) => bench(cli, a, true),
        Command::Synth(a) => synth(cli, a),
        Command::Bounds(a) => bounds(cli, a),
        Command::VerifyBounds(a) => verify(cli, a),
        Command::Consistency(a) => consistency(cli, a),
    }
}

fn log_resolved(what: &str, value: &impl serde::Serialize) {
    match serde_json::to_string(value) {
        Ok(json) => log::info!("resolved {what}: {json}"),
        Err(e) => log::warn!("could not serialize {what}: {e}"),
    }
}

fn metric(m: MetricArg) -> Metric {
    match m {
        MetricArg::L1 => Metric::L1,
        MetricArg::L2 => Metric::L2,
    }
}

fn build_model(m: &ModelArgs) -> Result<GroundTruthModel> {
    Ok(match m.model {
        ModelName::Expreg => GroundTruthModel::exp_regression(m.h_t0, m.beta_t.clone(), m.h_c0, m.beta_c.clone())?,
        ModelName::Weibreg => {
            GroundTruthModel::weibull_regression(m.q, m.h_t0, m.beta_t.clone(), m.h_c0, m.beta_c.clone())?
        }
        ModelName::Weibmix => GroundTruthModel::weibull_mixture(m.q, m.psi_t1, m.psi_t2, m.psi_c1, m.psi_c2, m.nu)?,
    })
}

fn kernel(k: KernelArg, sigma: u8) -> Kernel {
    match k {
        KernelArg::Box => Kernel::Box,
        KernelArg::Triangle => Kernel::Triangle,
        KernelArg::Epanechnikov => Kernel::Epanechnikov,
        KernelArg::Tgauss => Kernel::TruncatedGaussian { sigma: sigma as f64 },
    }
}

/// Expands the `--estimator` list into concrete methods.
fn resolve_methods(a: &BenchArgs) -> Result<Vec<MethodSpec>> {
    let chosen = a.kernel.map(|k| kernel(k, a.tgauss_sigma));
    let mut out: Vec<MethodSpec> = Vec::new();
    for name in &a.estimators {
        let lower = name.trim().to_ascii_lowercase();
        let explicit_metric = lower.ends_with("-l1") || lower.ends_with("-l2");
        let estimators: Vec<Estimator> = match lower.as_str() {
            "kernel" => match chosen {
                Some(k) => vec![Estimator::Kernel(k)],
                None => [
                    Kernel::Box,
                    Kernel::Triangle,
                    Kernel::Epanechnikov,
                    Kernel::TruncatedGaussian {
                        sigma: a.tgauss_sigma as f64,
                    },
                ]
                .into_iter()
                .map(Estimator::Kernel)
                .collect(),
            },
            "wknn" if chosen.is_some() => vec![Estimator::WeightedKnn(chosen.unwrap())],
            "cdfreg-w" if chosen.is_some() => vec![Estimator::CdfRegWeighted(chosen.unwrap())],
            _ => vec![lower.parse::<MethodSpec>()?.estimator],
        };
        for e in estimators {
            let mut spec = if explicit_metric {
                lower.parse::<MethodSpec>()?
            } else {
                MethodSpec::new(e, metric(a.metric))
            };
            spec.tree = TreeOptions {
                min_leaf: a.min_leaf,
                mtry: a.mtry,
            };
            if !out.contains(&spec) {
                out.push(spec);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("no estimator selected".into()));
    }
    Ok(out)
}

fn grid_override(a: &BenchArgs) -> GridOverride {
    let depth = |d: usize| if d == 0 { None } else { Some(d) };
    let forest = match (&a.n_trees, &a.max_depth) {
        (None, None) => None,
        (trees, depths) => {
            let trees = trees.clone().unwrap_or_else(|| nnsurv::selection::FOREST_TREES.to_vec());
            let depths: Vec<Option<usize>> = match depths {
                Some(d) => d.iter().map(|&d| depth(d)).collect(),
                None => nnsurv::selection::FOREST_DEPTHS.to_vec(),
            };
            Some(trees.iter().flat_map(|&t| depths.iter().map(move |&d| (t, d))).collect())
        }
    };
    GridOverride {
        k_values: a.k.clone(),
        bandwidths: a.bandwidth.clone(),
        forest,
    }
}

fn experiment_spec(cli: &Cli, a: &BenchArgs) -> Result<ExperimentSpec> {
    let source = match &a.data {
        Some(path) => DataSource::Csv {
            path: path.clone(),
            schema: CsvSchema {
                time_column: a.time_col.clone(),
                event_column: a.event_col.clone(),
                ignore_columns: a.ignore_cols.clone(),
            },
        },
        None => DataSource::Synthetic {
            model: build_model(&a.model)?,
            n: a.n,
        },
    };
    let mut spec = ExperimentSpec::new(source, resolve_methods(a)?);
    spec.split_fraction = a.split_fraction;
    spec.repeats = a.splits;
    spec.folds = a.folds;
    let censoring = match a.ipec_censoring {
        CensoringArg::Same => CensoringEstimator::SameMethod,
        CensoringArg::Km => CensoringEstimator::MarginalKm,
    };
    spec.criterion = match a.criterion {
        CriterionArg::Cindex => Criterion::CIndex,
        CriterionArg::Ipec => Criterion::Ipec(censoring),
    };
    spec.ipec_censoring = censoring;
    spec.seed = cli.seed;
    spec.theta_lb = a.ipec_theta_lb;
    spec.tau_percentile = a.ipec_tau_percentile;
    spec.grid = grid_override(a);
    spec.validate()?;
    Ok(spec)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn bench(cli: &Cli, a: &BenchArgs, with_grid: bool) -> Result<()> {
    let spec = experiment_spec(cli, a)?;
    log_resolved("experiment", &spec);
    let data = spec.load()?;
    log::info!("dataset: {} records, {} features", data.len(), data.dim());
    let (rows, grid) = run_benchmark_detailed(&spec, &data)?;
    let stem = if with_grid { "cv" } else { "bench" };
    let csv = cli.out_dir.join(format!("{stem}.csv"));
    write_rows_csv(&rows, &csv)?;
    let title = match &a.data {
        Some(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        None => format!("{:?} (n = {})", a.model.model, a.n).to_lowercase(),
    };
    let svg = cli.out_dir.join(format!("{stem}.svg"));
    write_text(&svg, &bench_plot_svg(&title, &rows))?;
    log::info!("wrote {} and {}", csv.display(), svg.display());
    if with_grid {
        let g = cli.out_dir.join("cv_grid.csv");
        write_rows_csv(&grid, &g)?;
        log::info!("wrote {}", g.display());
    }
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        log::warn!("{failed} of {} method runs failed; see the status column", rows.len());
    }
    Ok(())
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let model = build_model(&a.model)?;
    log_resolved("model", &model);
    log::info!("n={} debug_truth={}", a.n, a.debug_truth);
    let (data, latent) = model.sample_with_truth(a.n, cli.seed)?;
    let path = a.out.clone().unwrap_or_else(|| cli.out_dir.join("synth.csv"));
    let file = fs::File::create(&path).map_err(|source| CliError::Output {
        path: path.clone(),
        source,
    })?;
    let schema = CsvSchema::new(a.time_col.clone(), a.event_col.clone());
    write_synthetic_csv_to(&data, a.debug_truth.then_some(latent.as_slice()), file, &schema)?;
    let (theta, tau) = model.theta_tau()?;
    log::info!("wrote {} records to {} (theta = {theta}, tau = {tau})", data.len(), path.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct BoundRow {
    kind: &'static str,
    term1: f64,
    term2: f64,
    term3: f64,
    term4: f64,
    total: f64,
    preconditions_hold: bool,
}

fn bounds(cli: &Cli, a: &BoundsArgs) -> Result<()> {
    let inp = BoundInputs {
        n: a.n,
        k: a.k,
        h: a.h,
        epsilon: a.epsilon,
        theta: a.theta,
        tau: a.tau,
        lambda_t: a.lambda_t,
        lambda_c: a.lambda_c,
        f_t_star: a.f_star,
        alpha: a.alpha,
        ball_mass: a.ball_mass,
        kappa: a.kappa,
        phi: a.phi,
    };
    log_resolved("bound inputs", &inp);
    inp.validate()?;
    let kinds: Vec<BoundKind> = a.kinds.iter().map(|k| k.parse()).collect::<nnsurv::Result<_>>()?;
    let sc = capital_lambda(&inp)?;
    println!("Lambda = {:.6e}  Lambda_K = {:.6e}  h* = {:.6e}", sc.lambda, sc.lambda_k, sc.h_star);
    println!(
        "{:<10} {:>13} {:>13} {:>13} {:>13} {:>13}  preconditions",
        "kind", "term1", "term2", "term3", "term4", "total"
    );
    let mut rows = Vec::new();
    for kind in kinds {
        let r = bound_rhs(kind, &inp)?;
        println!(
            "{:<10} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e}  {}",
            kind.name(),
            r.terms[0],
            r.terms[1],
            r.terms[2],
            r.terms[3],
            r.total,
            if r.preconditions_hold() { "hold" } else { "violated" }
        );
        for p in r.preconditions.iter().filter(|p| !p.holds) {
            println!("           violated: {}", p.description);
        }
        rows.push(BoundRow {
            kind: kind.name(),
            term1: r.terms[0],
            term2: r.terms[1],
            term3: r.terms[2],
            term4: r.terms[3],
            total: r.total,
            preconditions_hold: r.preconditions_hold(),
        });
    }
    if let Some(gamma) = a.gamma {
        let s = knn_sufficient(a.epsilon, gamma, a.theta, a.n, a.ball_mass)?;
        println!("sufficient k for gamma = {gamma}: [{}, {}] feasible = {}", s.k_lo, s.k_hi, s.feasible);
    }
    let path = cli.out_dir.join("bounds.csv");
    write_rows_csv(&rows, &path)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn parse_setting(s: &str) -> Result<(usize, usize, f64)> {
    let bad = || CliError::Config(format!("setting `{s}` is not of the form n:k:epsilon"));
    let parts: Vec<&str> = s.trim().split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<()> {
    let model = GroundTruthModel::exp_regression(a.h_t0, vec![a.beta_t], a.h_c0, vec![a.beta_c])?;
    log_resolved("model", &model);
    log::info!("x={} trials={}", a.x, a.trials);
    if !(0.0..=1.0).contains(&a.x) {
        return Err(CliError::Config(format!("query point {} lies outside [0,1]", a.x)));
    }
    let mut rows = Vec::new();
    for (i, s) in a.settings.iter().enumerate() {
        let (n, k, epsilon) = parse_setting(s)?;
        let setting = BoundSetting {
            label: format!("n={n};k={k};eps={epsilon}"),
            model: model.clone(),
            x: a.x,
            n,
            k,
            epsilon,
        };
        let (row, report) = verify_knn_bound(&setting, a.trials, nnsurv::rng::derive_seed(cli.seed, i as u64))?;
        log::info!(
            "{}: empirical {:?} vs bound {:.4e} (preconditions {})",
            row.setting,
            row.empirical_freq,
            row.rhs,
            if report.preconditions_hold() { "hold" } else { "violated" }
        );
        rows.push(row);
    }
    let path = cli.out_dir.join("verify_bounds.csv");
    write_rows_csv(&rows, &path)?;
    log::info!("wrote {}", path.display());
    let broken: Vec<&str> = rows
        .iter()
        .filter(|r| r.consistent == Some(false) && r.preconditions_hold)
        .map(|r| r.setting.as_str())
        .collect();
    if !broken.is_empty() {
        return Err(CliError::Invariant(format!(
            "empirical exceedance frequency above the bound beyond Monte-Carlo noise: {}",
            broken.join(", ")
        )));
    }
    Ok(())
}

fn consistency(cli: &Cli, a: &ConsistencyArgs) -> Result<()> {
    let model = build_model(&a.model)?;
    let k_rule = match a.k_rule {
        KRuleArg::Power => KRule::Power {
            scale: a.k_scale,
            exponent: a.k_exponent,
        },
        KRuleArg::Schedule => KRule::Schedule {
            alpha: a.alpha,
            d: model.dim() as f64,
            c1: a.c1,
            c2: a.c2,
        },
    };
    let spec = ConsistencySpec {
        model,
        n_values: a.n_values.clone(),
        k_rule,
        trials: a.trials,
        queries: a.queries,
        metric: metric(a.metric),
        seed: cli.seed,
    };
    log_resolved("consistency study", &spec);
    let rows = run_consistency_study(&spec)?;
    let csv = cli.out_dir.join("consistency.csv");
    write_rows_csv(&rows, &csv)?;
    let svg = cli.out_dir.join("consistency.svg");
    write_text(&svg, &consistency_plot_svg("k-NN sup-norm error", &rows))?;
    log::info!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}
