//! Command-line front end: scenario studies, panel fitting, predictive
//! simulation and report generation.

use clap::{Parser, Subcommand};
use condvine::calibration::VineCalibration;
use condvine::data::{
    build_disaster_covariate, load_events, load_panel, windows_to_panel, OutPaths, RunConfig,
};
use condvine::dpm::{
    predictive_draws, run_chain, DpConfig, PosteriorTrace, TraceMeta, VineMixtureModel,
};
use condvine::error::{Error, Result};
use condvine::fsutil::atomic_write;
use condvine::margins::{fit_beta_margins, to_udata, MarginMhConfig, MarginMode};
use condvine::scenario::{histogram_bins_json, run_scenario, ScenarioRunConfig, ScenarioSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "condvine",
    about = "Dirichlet-process mixtures of conditional vine copulas",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one of the built-in simulation studies.
    SimulateScenario {
        /// Scenario id (1-5).
        #[arg(long)]
        id: usize,
        #[arg(long, default_value_t = 10)]
        replicates: usize,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 200)]
        burnin: usize,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5000)]
        predictive_draws: usize,
        /// Use the full study size (100 replicates, 5000 iterations,
        /// burn-in 1000) instead of the flags above.
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Fit margins and the mixture to a panel CSV.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        burnin: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
    },
    /// Draw posterior predictive samples from a saved trace.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 5000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Summaries (parameter and weight tables, histogram bins) from a
    /// saved trace.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 5000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Turn yearly event-level data into a windowed panel.
    PreparePanel {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value_t = 4)]
        window: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(match e {
            Error::Io { .. } | Error::Csv(_) => 2,
            Error::Config(_) | Error::Dimension(_) => 3,
            Error::Data(_) => 4,
            _ => 1,
        });
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SimulateScenario {
            id,
            replicates,
            iters,
            burnin,
            thin,
            seed,
            predictive_draws,
            paper_scale,
            out_dir,
        } => {
            let spec = ScenarioSpec::builtin(id)?;
            let mut cfg = if paper_scale {
                ScenarioRunConfig::paper_scale(seed)
            } else {
                ScenarioRunConfig {
                    replicates,
                    iterations: iters,
                    burnin,
                    thinning: thin,
                    seed,
                    predictive_draws,
                    out_dir: None,
                }
            };
            cfg.out_dir = out_dir;
            let report = run_scenario(&spec, &cfg)?;
            print!("{}", report.to_csv());
            Ok(())
        }
        Command::Fit {
            config,
            panel,
            out_dir,
            seed,
            iters,
            burnin,
            thin,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.dp.seed = s;
            }
            if let Some(v) = iters {
                cfg.dp.iterations = v;
            }
            if let Some(v) = burnin {
                cfg.dp.burnin = v;
            }
            if let Some(v) = thin {
                cfg.dp.thinning = v;
            }
            cfg.validate()?;
            fit(&cfg, &panel, &OutPaths::new(out_dir))
        }
        Command::Predict {
            config,
            trace,
            draws,
            seed,
            out_dir,
        } => {
            let cfg = RunConfig::load(&config)?;
            let trace = read_trace(&trace)?;
            let g0 = cfg.centering_measure()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = predictive_draws(&trace, &g0, draws, &mut rng)?;
            let out = OutPaths::new(out_dir);
            let d = trace.meta.spec.dimension;
            let mut csv = (1..=d)
                .map(|j| format!("u{j}"))
                .collect::<Vec<_>>()
                .join(",");
            csv.insert_str(0, "x,");
            csv.push('\n');
            for (x, u) in &samples {
                let row: Vec<String> = std::iter::once(format!("{:.10}", x[0]))
                    .chain(u.iter().map(|v| format!("{v:.10}")))
                    .collect();
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            atomic_write(&out.predictive(), &csv)?;
            println!("wrote {}", out.predictive().display());
            Ok(())
        }
        Command::Report {
            config,
            trace,
            draws,
            seed,
            out_dir,
        } => {
            let cfg = RunConfig::load(&config)?;
            let trace = read_trace(&trace)?;
            let out = OutPaths::new(out_dir);
            atomic_write(&out.cluster_summary(), &trace.cluster_summary_csv())?;
            atomic_write(&out.weight_summary(), &trace.weight_summary_csv())?;
            let g0 = cfg.centering_measure()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = predictive_draws(&trace, &g0, draws, &mut rng)?;
            let rows: Vec<Vec<f64>> = samples.into_iter().map(|(_, u)| u).collect();
            atomic_write(&out.histogram(), &histogram_bins_json(&rows, 20)?)?;
            println!(
                "wrote {}, {}, {}",
                out.cluster_summary().display(),
                out.weight_summary().display(),
                out.histogram().display()
            );
            Ok(())
        }
        Command::PreparePanel {
            events,
            window,
            out,
        } => {
            let events = load_events(&events)?;
            let panel = windows_to_panel(&events, window);
            let d = panel.first().map_or(4, |r| r.responses.len());
            let mut csv = String::from("country,period,");
            csv.push_str(
                &(1..=d)
                    .map(|j| format!("y{j}"))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            csv.push_str(",damage\n");
            for r in &panel {
                let ys: Vec<String> = r.responses.iter().map(|y| format!("{y:.10}")).collect();
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    r.country,
                    r.period,
                    ys.join(","),
                    r.damage
                ));
            }
            atomic_write(&out, &csv)?;
            println!("wrote {} ({} rows)", out.display(), panel.len());
            Ok(())
        }
    }
}

fn read_trace(path: &PathBuf) -> Result<PosteriorTrace> {
    if !path.exists() {
        return Err(Error::Data(format!("trace not found: {}", path.display())));
    }
    PosteriorTrace::read_ndjson(path)
}

fn fit(cfg: &RunConfig, panel_path: &PathBuf, out: &OutPaths) -> Result<()> {
    let records = load_panel(panel_path)?;
    if records.is_empty() {
        return Err(Error::Data("panel is empty".into()));
    }
    let d = records[0].responses.len();
    let spec = cfg.vine_spec()?;
    if spec.dimension != d {
        return Err(Error::Dimension(format!(
            "config vine dimension {} but panel has {d} responses",
            spec.dimension
        )));
    }
    let raw: Vec<Vec<f64>> = records.iter().map(|r| r.responses.clone()).collect();

    // Stage 1: margins (independent of the copula fit).
    let mut margin_rng = ChaCha8Rng::seed_from_u64(cfg.dp.seed ^ 0x4D41_5247);
    let udata = match cfg.margins.mode {
        MarginMode::BetaFit => {
            let fit = fit_beta_margins(&raw, &MarginMhConfig::default(), &mut margin_rng)?;
            atomic_write(&out.margin_summary(), &fit.summary_csv())?;
            to_udata(&raw, MarginMode::BetaFit, Some(&fit.margins))?
        }
        mode => to_udata(&raw, mode, None)?,
    };

    // Stage 2: mixture of conditional vines.
    let x = build_disaster_covariate(&records, cfg.covariate.damage_threshold);
    let covariates: Vec<Vec<f64>> = x.into_iter().map(|v| vec![v]).collect();
    let calib = VineCalibration::for_spec(&spec, cfg.calibration.kind, 1)?;
    let g0 = cfg.centering_measure()?;
    let mut model = VineMixtureModel::new(
        spec.clone(),
        calib.clone(),
        g0,
        udata,
        covariates,
    )?;
    let dp: DpConfig = cfg.dp;
    let kept = run_chain(&mut model, &dp)?;
    let trace = PosteriorTrace::from_states(
        TraceMeta {
            spec,
            calib,
            config: dp,
            n_obs: records.len(),
        },
        kept,
    );
    trace.write_ndjson(&out.trace())?;
    atomic_write(&out.cluster_summary(), &trace.cluster_summary_csv())?;
    atomic_write(&out.weight_summary(), &trace.weight_summary_csv())?;
    println!(
        "wrote {} ({} kept sweeps, modal clusters {})",
        out.trace().display(),
        trace.records.len(),
        trace.modal_cluster_count()
    );
    Ok(())
}
