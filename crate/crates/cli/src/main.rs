use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use auv_gnc::harness::{
    read_series_csv, run_campaign, run_episode, tuning_fragment, write_allan_csv, write_benchmark_csv, write_campaign_csv,
    write_campaign_summary_json, write_history_csv, write_metrics_json, write_timeseries_csv, CandidateEvaluator, Mode,
    ScenarioConfig, TrajectoryKind,
};
use auv_gnc::nav::{FilterKind, TuningVector};
use auv_gnc::par::{configure_threads, Execution};
use auv_gnc::sensors::{allan_deviation, fit_gm_params};
use auv_gnc::tune::{
    bo_minimize, pso_minimize, run_synthetic_benchmark, BoParams, OptBudget, OptResult, PsoParams, TuneError,
};

#[derive(Parser)]
#[command(name = "auvgnc", version, about = "AUV GNC simulation, filter tuning and Monte Carlo validation")]
struct Cli {
    /// Worker threads; outputs do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Evaluate everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    Sins,
    Hmm,
}

impl From<FilterArg> for FilterKind {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Sins => FilterKind::Sins,
            FilterArg::Hmm => FilterKind::Hmm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ol,
    Cl,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ol => Mode::Ol,
            ModeArg::Cl => Mode::Cl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OptArg {
    Bo,
    Pso,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode and write timeseries.csv and metrics.json.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        filter: Option<FilterArg>,
        #[arg(long)]
        mode: Option<ModeArg>,
    },
    /// Tune the five noise multipliers; writes history.csv and best.toml.
    Tune {
        #[arg(long)]
        filter: FilterArg,
        #[arg(long)]
        mode: ModeArg,
        #[arg(long, default_value = "bo")]
        opt: OptArg,
        #[arg(long, default_value_t = 225)]
        budget: usize,
        /// Optimizer seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seed of the three fixed tuning episodes.
        #[arg(long, default_value_t = 11)]
        scenario_seed: u64,
        /// Base scenario; defaults are used when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Monte Carlo campaign over trajectories, outages and seeds; writes
    /// campaign.csv and summary.json.
    Montecarlo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Outage durations, s.
        #[arg(long, value_delimiter = ',', default_value = "10,30")]
        outages: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Allan deviation of a single-column CSV series; writes allan.csv.
    Allan {
        #[arg(long)]
        input: PathBuf,
        /// Sampling rate, Hz.
        #[arg(long, default_value_t = 100.0)]
        rate: f64,
        /// Also fit (N, B, K) and print them.
        #[arg(long)]
        fit: bool,
        #[arg(long, default_value = "allan.csv")]
        out: PathBuf,
    },
    /// BO against PSO on the synthetic constrained benchmark; writes
    /// benchmark.csv with best-so-far curves.
    Benchmark {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 225)]
        budget: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ScenarioConfig::from_toml(&text)?)
        }
        None => Ok(ScenarioConfig::default()),
    }
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn report(result: &OptResult) {
    let crashes = result.history.iter().filter(|e| e.outcome.crashed).count();
    println!(
        "best a = {:?}  J = {:?}  g = {:?}  ({} evaluations, {} crashed)",
        result.best_x,
        result.best.j,
        result.best.g,
        result.history.len(),
        crashes
    );
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        configure_threads(n).map_err(anyhow::Error::msg)?;
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::available() };
    match cli.cmd {
        Cmd::Simulate { config, out, filter, mode } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(f) = filter {
                cfg.filter = f.into();
            }
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            cfg.record = true;
            out_dir(&out)?;
            let ep = run_episode(&cfg)?;
            write_timeseries_csv(&out.join("timeseries.csv"), &ep.timeseries)?;
            write_metrics_json(&out.join("metrics.json"), &ep.metrics)?;
            let m = &ep.metrics;
            println!(
                "rms_pos_err {:.4} m  rms_euler_err {:.4} deg  max_tracking_err {:.4} m  goal {}  crash {}",
                m.rms_pos_err, m.rms_euler_err, m.max_tracking_err, m.goal_reached, m.crash
            );
        }
        Cmd::Tune { filter, mode, opt, budget, seed, scenario_seed, config, out } => {
            let base = load_config(config.as_deref())?;
            out_dir(&out)?;
            let ev = CandidateEvaluator::new(&base, filter.into(), mode.into(), scenario_seed, exec);
            let b = OptBudget::with_max_evals(budget);
            let res = match opt {
                OptArg::Bo => bo_minimize(&ev, &b, &BoParams { log_objective: true, ..BoParams::default() }, seed),
                OptArg::Pso => pso_minimize(&ev, &b, &PsoParams::default(), seed, exec),
            };
            let (result, feasible) = match res {
                Ok(r) => (r, true),
                Err(TuneError::NoFeasiblePoint(r)) => (*r, false),
                Err(e) => return Err(e.into()),
            };
            write_history_csv(&out.join("history.csv"), &result)?;
            fs::write(out.join("best.toml"), tuning_fragment(&TuningVector::from_slice(&result.best_x))?)?;
            report(&result);
            if !feasible {
                bail!("no feasible candidate; best.toml holds the least-violating one");
            }
        }
        Cmd::Montecarlo { config, runs, seed, outages, out } => {
            let base = load_config(config.as_deref())?;
            out_dir(&out)?;
            let res = run_campaign(&base, runs, seed, &TrajectoryKind::ALL, &outages, exec)?;
            write_campaign_csv(&out.join("campaign.csv"), &res)?;
            write_campaign_summary_json(&out.join("summary.json"), &res)?;
            let med = res.tracking.map(|q| q.median);
            println!("goals reached {}/{}  median tracking error {:?} m", res.goals_reached, res.runs.len(), med);
        }
        Cmd::Allan { input, rate, fit, out } => {
            let series = read_series_csv(&input)?;
            let curve = allan_deviation(&series, rate)?;
            write_allan_csv(&out, &curve)?;
            if fit {
                let p = fit_gm_params(&curve)?;
                println!("N = {:e}  B = {:e}  K = {:e}  T = {:e} s", p.n, p.b, p.k, p.corr_time);
            }
        }
        Cmd::Benchmark { seeds, budget, out } => {
            out_dir(&out)?;
            let s: Vec<u64> = (0..seeds).collect();
            let runs = run_synthetic_benchmark(&s, &OptBudget::with_max_evals(budget), exec)?;
            write_benchmark_csv(&out.join("benchmark.csv"), &runs)?;
            for r in &runs {
                println!("{} seed {}: gap {:?}", r.optimizer.name(), r.seed, r.gap());
            }
        }
    }
    Ok(())
}
