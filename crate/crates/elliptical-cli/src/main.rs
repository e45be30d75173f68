//! `elliptical` — fit, predict, benchmark, and QQ-fit elliptical-process
//! regression models.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numeric/training, 5 internal.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use elliptical::posterior::{predict, predictive_interval};
use elliptical::train::{fit, FitMode, TrainConfig};
use elliptical_cli::bench::{self, BenchReport, DataSpec};
use elliptical_cli::data::{SplitSpec, TargetSpec};
use elliptical_cli::error::{CliError, CliResult};
use elliptical_cli::model_io::{ModelFile, ModelMeta};
use elliptical_cli::qq::{self, SampleSource};

#[derive(Parser)]
#[command(name = "elliptical", version, about = "Elliptical-process regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write it to a JSON file.
    Fit(FitArgs),
    /// Predict with a fitted model on new inputs.
    Predict(PredictArgs),
    /// Repeated train/test comparison across seeds and modes.
    Benchmark(BenchArgs),
    /// Fit the mixing distribution to scalar samples and emit QQ data.
    Qq(QqArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Synthetic generator: synth | neal | friedman.
    #[arg(long, conflicts_with = "data")]
    r#gen: Option<String>,
    /// CSV file with a header row and numeric columns.
    #[arg(long)]
    data: Option<String>,
    /// Target column (name or zero-based index) for --data.
    #[arg(long)]
    target: Option<String>,
    /// Student-t scale parameter for the synth generator.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 50)]
    n_train: usize,
    #[arg(long, default_value_t = 50)]
    n_test: usize,
    /// Train fraction for --data when explicit counts are not wanted.
    #[arg(long)]
    split_fraction: Option<f64>,
}

impl DataArgs {
    fn spec(&self) -> CliResult<DataSpec> {
        match (&self.r#gen, &self.data) {
            (Some(g), None) => match g.as_str() {
                "synth" => Ok(DataSpec::Synth { eta: self.eta }),
                "neal" => Ok(DataSpec::Neal),
                "friedman" => Ok(DataSpec::Friedman),
                other => Err(CliError::Usage(format!(
                    "unknown generator '{other}' (expected synth, neal, or friedman)"
                ))),
            },
            (None, Some(path)) => {
                let target = match &self.target {
                    Some(t) => match t.parse::<usize>() {
                        Ok(i) => TargetSpec::Index(i),
                        Err(_) => TargetSpec::Name(t.clone()),
                    },
                    None => {
                        return Err(CliError::Usage("--data requires --target".into()));
                    }
                };
                let split = match self.split_fraction {
                    Some(f) => SplitSpec::Fraction(f),
                    None => SplitSpec::Counts(self.n_train, self.n_test),
                };
                Ok(DataSpec::Csv { path: path.clone(), target, split })
            }
            (None, None) => Err(CliError::Usage("either --gen or --data is required".into())),
            (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
        }
    }
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// TOML file with TrainConfig keys; flags below override it.
    #[arg(long)]
    config: Option<String>,
    /// Smoothness penalty weight λ.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Per-dimension lengthscales instead of one shared lengthscale.
    #[arg(long)]
    ard: bool,
}

impl TrainArgs {
    fn resolve(&self, seed: u64) -> CliResult<TrainConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Data(format!("cannot read config {path}: {e}")))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("config {path}: {e}")))?
            }
            None => TrainConfig::default(),
        };
        if let Some(v) = self.lambda {
            config.smoothness_lambda = v;
        }
        if let Some(v) = self.learning_rate {
            config.learning_rate = v;
        }
        if let Some(v) = self.max_iters {
            config.max_iters = v;
        }
        if let Some(v) = self.restarts {
            config.restarts = v;
        }
        if self.ard {
            config.ard = true;
        }
        config.seed = seed;
        Ok(config)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Model family: ep | gp | cap.
    #[arg(long, default_value = "ep")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model file (JSON).
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct PredictArgs {
    /// Fitted model file from `fit`.
    #[arg(long)]
    model: String,
    /// CSV of test inputs; must carry the model's feature columns.
    #[arg(long)]
    data: String,
    /// Output CSV with mean, variance, lo, hi per row.
    #[arg(long)]
    out: String,
    /// Central interval coverage.
    #[arg(long, default_value_t = 0.95)]
    coverage: f64,
    #[arg(long, default_value_t = 4000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also dump internals (cov_scale, u1, standardized diagonal) as JSON.
    #[arg(long)]
    debug: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Comma-separated list of modes.
    #[arg(long, default_value = "gp,ep,cap")]
    modes: String,
    /// Number of seeds (0, 1, ..., seeds-1).
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Output prefix: writes <out>.csv and <out>.json.
    #[arg(long)]
    out: String,
    /// Parallel workers (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct QqArgs {
    /// Sample generator: chisq | laplace.
    #[arg(long, conflicts_with = "data")]
    r#gen: Option<String>,
    /// Single-column CSV (header row) of samples.
    #[arg(long)]
    data: Option<String>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Scale parameter for the chisq generator.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Diversity of the laplace generator.
    #[arg(long, default_value_t = 0.5)]
    laplace_scale: f64,
    /// Truncation point of the generator mixing densities.
    #[arg(long, default_value_t = 0.01)]
    trunc: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes <out>_before.csv, <out>_after.csv, <out>_mixing.csv.
    #[arg(long)]
    out: String,
    #[arg(long, default_value_t = 10)]
    pieces: usize,
    #[arg(long, default_value_t = 0.2)]
    width: f64,
    #[arg(long, default_value_t = 0.01)]
    start: f64,
    #[arg(long, default_value_t = 3000)]
    iters: usize,
}

fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let mode: FitMode = args.mode.parse().map_err(|_| {
        CliError::Usage(format!("unknown mode '{}' (expected ep, gp, or cap)", args.mode))
    })?;
    let config = args.train.resolve(args.seed)?;
    let spec = args.data.spec()?;
    let (train, test) = spec.generate(args.data.n_train, args.data.n_test, args.seed)?;

    let model = fit(&train.standardized_x(), &train.standardized_y(), &config, mode)?;
    let diag = model.diagnostics.clone();
    let file = ModelFile {
        model,
        standardization: train.standardization.clone(),
        meta: ModelMeta {
            mode: mode.to_string(),
            dataset: spec.name(),
            seed: args.seed,
            feature_names: train.meta.feature_names.clone(),
            target_name: train.meta.target_name.clone(),
        },
    };
    file.save(&args.out)?;

    println!("fitted {} model on {} ({} train / {} test points)", mode, spec.name(), train.len(), test.len());
    println!("  nll        {:.6}", diag.final_nll);
    println!("  objective  {:.6}", diag.final_objective);
    println!(
        "  iterations {} ({}; restart {})",
        diag.iterations,
        if diag.converged { "converged" } else { "max iterations" },
        diag.restart
    );
    println!("  grad norm  {:.3e}", diag.grad_norm);
    let kp = &file.model.kernel;
    println!(
        "  kernel     lengthscale {:?}, signal sd {:.4}, noise sd {:.4}",
        kp.log_lengthscales.iter().map(|l| l.exp()).collect::<Vec<_>>(),
        kp.signal_var().sqrt(),
        kp.noise().sqrt()
    );
    let total: f64 = file.model.mixing.heights().iter().sum();
    let normalized: Vec<f64> =
        file.model.mixing.heights().iter().map(|h| (h / total * 1000.0).round() / 1000.0).collect();
    println!("  mixing     {normalized:?} on [{}, {}]", file.model.mixing.start(), file.model.mixing.end());
    println!("model written to {}", args.out);
    Ok(())
}

/// Assemble the test matrix from a CSV, by the model's feature names.
fn read_prediction_inputs(path: &str, meta: &ModelMeta) -> CliResult<nalgebra::DMatrix<f64>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {path}: {e}")))?;
    let headers: Vec<String> =
        reader.headers().map_err(|e| CliError::Data(format!("{path}: {e}")))?.iter()
            .map(|h| h.trim().to_string())
            .collect();
    let positions: Vec<usize> = meta
        .feature_names
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == name).ok_or_else(|| {
                CliError::Data(format!(
                    "{path} is missing feature column '{name}' required by the model"
                ))
            })
        })
        .collect::<CliResult<_>>()?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{path} row {}: {e}", line + 2)))?;
        let row = positions
            .iter()
            .map(|&col| {
                record[col].trim().parse::<f64>().map_err(|_| {
                    CliError::Data(format!(
                        "{path} row {} column '{}': non-numeric cell '{}'",
                        line + 2,
                        headers[col],
                        &record[col]
                    ))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{path}: no data rows")));
    }
    Ok(nalgebra::DMatrix::from_fn(rows.len(), meta.feature_names.len(), |i, j| rows[i][j]))
}

fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    if !(0.0..1.0).contains(&args.coverage) {
        return Err(CliError::Usage(format!("coverage {} outside [0, 1)", args.coverage)));
    }
    let file = ModelFile::load(&args.model)?;
    let x_raw = read_prediction_inputs(&args.data, &file.meta)?;
    let x_std = file.standardization.apply_x(&x_raw);

    let post = predict(&file.model, &x_std)?;
    let intervals =
        predictive_interval(&file.model, &x_std, args.coverage, args.mc_samples, args.seed)?;
    let variance_std = post.variance();

    let mut writer = csv::Writer::from_path(&args.out)
        .map_err(|e| CliError::Internal(format!("{}: {e}", args.out)))?;
    let mut header = file.meta.feature_names.clone();
    header.extend(["mean", "variance", "lo", "hi"].map(String::from));
    writer.write_record(&header).map_err(|e| CliError::Internal(e.to_string()))?;
    let y_std = file.standardization.y_std;
    for i in 0..x_raw.nrows() {
        let mut row: Vec<String> =
            (0..x_raw.ncols()).map(|j| format!("{}", x_raw[(i, j)])).collect();
        row.push(format!("{}", file.standardization.unapply_y(post.mean[i])));
        row.push(format!("{}", variance_std[i] * y_std * y_std));
        row.push(format!("{}", file.standardization.unapply_y(intervals[i].0)));
        row.push(format!("{}", file.standardization.unapply_y(intervals[i].1)));
        writer.write_record(&row).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Internal(e.to_string()))?;

    if let Some(debug_path) = &args.debug {
        let dump = serde_json::json!({
            "cov_scale": post.cov_scale,
            "u1": post.u1,
            "n1": post.n1,
            "scale_diag_standardized": post.scale.diagonal().iter().cloned().collect::<Vec<f64>>(),
            "variance_standardized": variance_std.iter().cloned().collect::<Vec<f64>>(),
            "y_std": y_std,
        });
        std::fs::write(debug_path, serde_json::to_string_pretty(&dump).unwrap())
            .map_err(|e| CliError::Internal(format!("writing {debug_path}: {e}")))?;
    }
    println!("wrote {} predictions to {}", x_raw.nrows(), args.out);
    Ok(())
}

fn cmd_benchmark(args: &BenchArgs) -> CliResult<()> {
    let modes: Vec<FitMode> = args
        .modes
        .split(',')
        .map(|m| {
            m.trim().parse::<FitMode>().map_err(|_| {
                CliError::Usage(format!("unknown mode '{m}' in --modes (expected ep, gp, cap)"))
            })
        })
        .collect::<CliResult<_>>()?;
    if modes.is_empty() || args.seeds == 0 {
        return Err(CliError::Usage("need at least one mode and one seed".into()));
    }
    let config = args.train.resolve(0)?;
    let spec = args.data.spec()?;
    let jobs = args.jobs.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });

    let rows =
        bench::run(&spec, &modes, args.seeds, args.data.n_train, args.data.n_test, &config, jobs);
    let summary = bench::summarize(&rows, &modes);

    let csv_path = format!("{}.csv", args.out);
    let json_path = format!("{}.json", args.out);
    bench::write_rows_csv(&rows, &csv_path)?;
    let report = BenchReport {
        dataset: spec.name(),
        n_train: args.data.n_train,
        n_test: args.data.n_test,
        seeds: args.seeds,
        config: &config,
        summary: &summary,
        rows: &rows,
    };
    bench::write_report_json(&report, &json_path)?;

    println!("benchmark on {} ({} seeds, {} jobs)", spec.name(), args.seeds, jobs);
    println!("{:<6} {:>18} {:>18} {:>10}", "mode", "mse (mean±std)", "ll (mean±std)", "completed");
    for s in &summary {
        let fmt = |mean: Option<f64>, std: Option<f64>| match (mean, std) {
            (Some(m), Some(sd)) => format!("{m:.4} ± {sd:.4}"),
            (Some(m), None) => format!("{m:.4}"),
            _ => "-".into(),
        };
        println!(
            "{:<6} {:>18} {:>18} {:>7}/{}",
            s.mode,
            fmt(s.mse_mean, s.mse_std),
            fmt(s.ll_mean, s.ll_std),
            s.completed,
            s.completed + s.failed
        );
    }
    println!("rows written to {csv_path}, summary to {json_path}");
    Ok(())
}

fn cmd_qq(args: &QqArgs) -> CliResult<()> {
    let samples: Vec<f64> = match (&args.r#gen, &args.data) {
        (Some(g), None) => {
            let source = match g.as_str() {
                "chisq" => SampleSource::ScaledChiSquare { eta: args.eta, trunc: args.trunc },
                "laplace" => {
                    SampleSource::TruncatedLaplace { scale: args.laplace_scale, trunc: args.trunc }
                }
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown QQ generator '{other}' (expected chisq or laplace)"
                    )))
                }
            };
            source.draw(args.samples, args.seed)?
        }
        (None, Some(path)) => {
            let mut reader = csv::Reader::from_path(path)
                .map_err(|e| CliError::Data(format!("cannot read {path}: {e}")))?;
            let mut out = Vec::new();
            for (line, record) in reader.records().enumerate() {
                let record =
                    record.map_err(|e| CliError::Data(format!("{path} row {}: {e}", line + 2)))?;
                let cell = record.get(0).unwrap_or("");
                out.push(cell.trim().parse::<f64>().map_err(|_| {
                    CliError::Data(format!("{path} row {}: non-numeric cell '{cell}'", line + 2))
                })?);
            }
            out
        }
        _ => return Err(CliError::Usage("qq needs exactly one of --gen or --data".into())),
    };
    if samples.len() < 100 {
        return Err(CliError::Data(format!(
            "QQ fitting needs at least 100 samples, got {}",
            samples.len()
        )));
    }

    let out = qq::run_qq(&samples, args.pieces, args.width, args.start, args.iters)?;
    qq::write_pairs_csv(&out.before, &format!("{}_before.csv", args.out))?;
    qq::write_pairs_csv(&out.after, &format!("{}_after.csv", args.out))?;
    qq::write_mixing_csv(&out.fitted, &format!("{}_mixing.csv", args.out))?;

    println!("QQ fit on {} samples", samples.len());
    println!(
        "  slope  {:.4} -> {:.4}",
        qq::qq_slope(&out.before),
        qq::qq_slope(&out.after)
    );
    println!(
        "  resid  {:.4} -> {:.4}",
        qq::qq_residual_sum(&out.before),
        qq::qq_residual_sum(&out.after)
    );
    println!(
        "wrote {0}_before.csv, {0}_after.csv, {0}_mixing.csv",
        args.out
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(), // clap prints; exits 2 on usage errors, 0 on --help
    };
    let result = match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Qq(args) => cmd_qq(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
