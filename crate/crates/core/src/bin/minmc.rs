// `!(x >= 0.0)` style checks are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use minmc::estimators::{FitArtifact, Surface};
use minmc::harness::{benchmark_for, export_report, fmt_f64, run_case_study, write_benchmark_csv, BenchmarkSpec, ExperimentConfig, ReportFormat};
use minmc::models::ConditionalSampler;
use minmc::numerics::linspace;
use minmc::sampling::{draw_sample_set, SampleSet};
use minmc::theory_checks::run_suite;
use minmc::{Error, PointSet, Result, RngStream};

#[derive(Parser)]
#[command(name = "minmc", version, about = "Price surfaces by minimizing a sampled ridge-regularized quadratic")]
struct Cli {
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit one surface and save it as fit.json.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Ridge level (default: the first one in the config).
        #[arg(long)]
        lambda: Option<f64>,
        /// Train on these samples instead of drawing from the model.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Also write the training samples as samples.csv.
        #[arg(long)]
        save_samples: bool,
    },
    /// Run a full case study and export its report.
    CaseStudy {
        #[arg(long)]
        config: PathBuf,
    },
    /// Benchmark prices on the config's grid.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's benchmark with this many simulations per point.
        #[arg(long)]
        n_sims: Option<usize>,
    },
    /// Run the inequality checks on fuzzed instances and print JSON verdicts.
    TheoryCheck,
    /// Evaluate a saved fit on a line of parameters.
    Curve {
        #[arg(long)]
        fit: PathBuf,
        /// Config supplying the parameter range and closed-form reference.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long, default_value_t = 500)]
        points: usize,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn out_dir(cli_dir: &Option<PathBuf>, config: Option<&ExperimentConfig>) -> Result<PathBuf> {
    let dir = cli_dir
        .clone()
        .or_else(|| config.and_then(|c| c.outputs.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Fit {
            config,
            lambda,
            samples,
            save_samples,
        } => {
            let config = load_config(config, cli.seed)?;
            let dir = out_dir(&cli.out_dir, Some(&config))?;
            let lambda = lambda.unwrap_or(config.lambdas[0]);
            let cell = config.cells()?[0];
            let stream = RngStream::new(config.seed);
            let set = match samples {
                Some(path) => SampleSet::read_csv(path)?,
                None => draw_sample_set(&config.model, &config.space, cell.n, cell.m, stream)?,
            };
            if *save_samples {
                set.write_csv(&dir.join("samples.csv"))?;
            }
            let surface = config
                .estimator
                .fit(&set, lambda, &mut stream.derive(u64::MAX).generator())?;
            let path = dir.join("fit.json");
            FitArtifact::new(surface, &set, lambda).save(&path)?;
            println!("{}", path.display());
            Ok(true)
        }
        Command::CaseStudy { config } => {
            let config = load_config(config, cli.seed)?;
            let dir = out_dir(&cli.out_dir, Some(&config))?;
            let report = run_case_study(&config)?;
            for path in export_report(&report, &dir, cli.format.into())? {
                println!("{}", path.display());
            }
            for row in &report.summary {
                eprintln!(
                    "lambda={} m={} median={} [{}, {}] ({} reps)",
                    row.lambda, row.m, row.median, row.q25, row.q75, row.completed
                );
            }
            if let Some(b) = &report.baseline {
                eprintln!("baseline median={} [{}, {}]", b.median, b.q25, b.q75);
            }
            Ok(report.is_complete())
        }
        Command::Benchmark { config, n_sims } => {
            let mut config = load_config(config, cli.seed)?;
            if let Some(n) = n_sims {
                config.benchmark = BenchmarkSpec::Mc { n_sims: *n };
                config.validate()?;
            }
            let dir = out_dir(&cli.out_dir, Some(&config))?;
            let bench = benchmark_for(&config)?;
            let path = match cli.format {
                Format::Csv => {
                    let p = dir.join("benchmark.csv");
                    write_benchmark_csv(&bench, &p)?;
                    p
                }
                Format::Json => {
                    let p = dir.join("benchmark.json");
                    write_text(&p, &serde_json::to_string_pretty(&bench)?)?;
                    p
                }
            };
            println!("{}", path.display());
            Ok(true)
        }
        Command::TheoryCheck => {
            let verdicts = run_suite(cli.seed.unwrap_or(0))?;
            println!("{}", serde_json::to_string_pretty(&verdicts)?);
            Ok(verdicts.iter().all(|v| v.pass))
        }
        Command::Curve {
            fit,
            config,
            lo,
            hi,
            points,
        } => {
            let artifact = FitArtifact::load(fit)?;
            if artifact.surface.input_dim() != 1 {
                return Err(Error::Config("curve export needs a one-parameter fit".into()));
            }
            let config = config.as_deref().map(|p| load_config(p, cli.seed)).transpose()?;
            let range = config.as_ref().map(|c| c.space.bounds[0]);
            let (lo, hi) = match (lo, hi, range) {
                (Some(a), Some(b), _) => (*a, *b),
                (a, b, Some([cl, ch])) => (a.unwrap_or(cl), b.unwrap_or(ch)),
                _ => return Err(Error::Config("give --lo and --hi, or --config".into())),
            };
            if *points < 2 || !(lo < hi) {
                return Err(Error::Config("need lo < hi and at least 2 points".into()));
            }
            let line = PointSet::from_scalars(linspace(lo, hi, *points));
            let preds = artifact.surface.predict_points(&line)?;
            let dir = out_dir(&cli.out_dir, config.as_ref())?;
            let rows: Vec<(f64, f64, Option<f64>)> = line
                .rows()
                .zip(preds)
                .map(|(t, p)| (t[0], p, config.as_ref().and_then(|c| c.model.analytic_price(t).ok())))
                .collect();
            let path = match cli.format {
                Format::Csv => {
                    let mut text = String::from("theta_1,price_fit,price_ref\n");
                    for (t, p, r) in &rows {
                        text.push_str(&format!("{},{},{}\n", fmt_f64(*t), fmt_f64(*p), r.map(fmt_f64).unwrap_or_default()));
                    }
                    let p = dir.join("curve.csv");
                    write_text(&p, &text)?;
                    p
                }
                Format::Json => {
                    let json: Vec<_> = rows
                        .iter()
                        .map(|(t, p, r)| serde_json::json!({"theta": [t], "price_fit": p, "price_ref": r}))
                        .collect();
                    let p = dir.join("curve.json");
                    write_text(&p, &serde_json::to_string_pretty(&json)?)?;
                    p
                }
            };
            println!("{}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
