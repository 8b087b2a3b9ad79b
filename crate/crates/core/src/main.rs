//! `thermoform` — simulate, identify, validate, control and sweep from files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use thermoform::experiments::{
    collect_dataset, generate_prbs, robustness_sweep, run_closed_loop, SweepGrid, SweepRow, SIM_REFERENCES,
};
use thermoform::io::{self, PipelineConfig, RunManifest};
use thermoform::narx::{fit_narx, fit_table, load_model, save_model, whiteness, NarxModel, RegressorLayout};
use thermoform::Result;

/// Prediction horizons reported by `validate`.
const HORIZONS: [usize; 6] = [1, 10, 30, 50, 80, 100];
const WHITENESS_LAGS: usize = 25;

#[derive(Parser)]
#[command(name = "thermoform", version, about = "Wavelet-NARX identification and MPC for radiant sheet heating")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Sectioned key=value config ([plant], [mpc], [prbs], [fit], [sweep], [run]).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for this run's outputs [default: runs/<command>].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the staircase PRBS excitation.
    Excite {
        #[command(flatten)]
        common: Common,
        /// Truncate the excitation to this many seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run the plant open loop and record a dataset.
    Collect {
        #[command(flatten)]
        common: Common,
        /// Excitation CSV from `excite`; generated from the config if absent.
        #[arg(long)]
        excitation: Option<PathBuf>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Identify a NARX model from a dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// N-step fit table and residual whiteness on the held-out split.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Closed loop on the simulated plant.
    Control {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Zone references [°C]: 15 comma-separated values or a CSV file.
        #[arg(long = "ref")]
        reference: Option<String>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Closed loop over a grid of perturbed plants.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "ref")]
        reference: Option<String>,
        #[arg(long)]
        duration: Option<f64>,
        /// Flat key=value grid file (h, d, absorptivity, nominal, full).
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Recompute metrics from a stored trajectory.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Excite { .. } => "excite",
            Command::Collect { .. } => "collect",
            Command::Fit { .. } => "fit",
            Command::Validate { .. } => "validate",
            Command::Control { .. } => "control",
            Command::Sweep { .. } => "sweep",
            Command::Metrics { .. } => "metrics",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Excite { common, .. }
            | Command::Collect { common, .. }
            | Command::Fit { common, .. }
            | Command::Validate { common, .. }
            | Command::Control { common, .. }
            | Command::Sweep { common, .. }
            | Command::Metrics { common, .. } => common,
        }
    }
}

/// Shared state of one invocation: effective config, output directory and
/// the manifest being filled in.
struct Run {
    cfg: PipelineConfig,
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn start(command: &Command) -> Result<Self> {
        let common = command.common();
        let mut cfg = match &common.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = common.seed {
            cfg.prbs.seed = seed;
            cfg.run.seed = seed;
        }
        let out_dir = common.out_dir.clone().unwrap_or_else(|| Path::new("runs").join(command.name()));
        std::fs::create_dir_all(&out_dir)?;
        let mut manifest = RunManifest::new(command.name(), cfg.run.seed, &cfg.render(), common.config.as_deref());
        if let Some(p) = &common.config {
            manifest.input(p)?;
        }
        Ok(Self { cfg, out_dir, manifest })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn finish(mut self) -> Result<()> {
        let effective = self.path("config.effective");
        std::fs::write(&effective, self.cfg.render())?;
        self.manifest.output(&effective)?;
        let path = self.path("manifest.json");
        self.manifest.save(&path)?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn load_model(&mut self, path: &Path) -> Result<NarxModel> {
        self.manifest.input(path)?;
        load_model(path)
    }

    fn reference(&mut self, arg: &Option<String>) -> Result<Vec<f64>> {
        match arg {
            None => Ok(SIM_REFERENCES.to_vec()),
            Some(a) => {
                if Path::new(a).is_file() {
                    self.manifest.input(Path::new(a))?;
                }
                io::parse_reference(a, SIM_REFERENCES.len())
            }
        }
    }
}

fn excitation(run: &mut Run, duration: Option<f64>) -> Result<Vec<Vec<f64>>> {
    let heaters = run.cfg.plant.geometry.n_heaters();
    let prbs = run.cfg.prbs.clone();
    let mut u = run.manifest.time("excite", || generate_prbs(&prbs, heaters))?;
    if let Some(d) = duration {
        u.truncate((d / prbs.sample_time).round() as usize);
    }
    Ok(u)
}

fn print_row(label: &str, values: impl Iterator<Item = f64>) {
    let cells: Vec<String> = values.map(|v| format!("{v:8.2}")).collect();
    println!("{label:>6} {}", cells.join(" "));
}

fn execute(command: Command) -> Result<()> {
    let mut run = Run::start(&command)?;
    match &command {
        Command::Excite { duration, .. } => {
            let u = excitation(&mut run, *duration)?;
            let path = run.path("excitation.csv");
            io::save_excitation(&u, run.cfg.prbs.sample_time, &path)?;
            run.manifest.output(&path)?;
            println!("{} samples x {} heaters -> {}", u.len(), u.first().map_or(0, Vec::len), path.display());
        }
        Command::Collect {
            excitation: source,
            duration,
            ..
        } => {
            let (dt, mut u) = match source {
                Some(p) => {
                    run.manifest.input(p)?;
                    io::load_excitation(p)?
                }
                None => (run.cfg.prbs.sample_time, excitation(&mut run, None)?),
            };
            if let Some(d) = duration {
                u.truncate((d / dt).round() as usize);
            }
            let (plant, seed) = (run.cfg.plant.clone(), run.cfg.run.seed);
            let data = run.manifest.time("simulate", || collect_dataset(&plant, &u, dt, seed))?;
            let path = run.path("dataset.csv");
            io::save_dataset(&data, &path)?;
            run.manifest.output(&path)?;
            println!("{} samples ({} train / {} test) -> {}", data.len(), data.split_index(), data.test_range().len(), path.display());
        }
        Command::Fit { dataset, .. } => {
            run.manifest.input(dataset)?;
            let data = io::load_dataset(dataset)?;
            let layout = RegressorLayout {
                z: data.n_outputs(),
                h: data.n_inputs(),
                ..RegressorLayout::default()
            };
            let fit = run.cfg.fit.clone();
            let model = run.manifest.time("fit", || fit_narx(&data, &layout, &fit))?;
            let path = run.path("model.txt");
            save_model(&model, &path)?;
            run.manifest.output(&path)?;
            let units: Vec<usize> = model.channels.iter().map(|c| c.n_units()).collect();
            println!("fitted {} channels, units per channel {units:?} -> {}", units.len(), path.display());
        }
        Command::Validate { dataset, model, .. } => {
            run.manifest.input(dataset)?;
            let data = io::load_dataset(dataset)?;
            let model = run.load_model(model)?;
            let table = run.manifest.time("fit_table", || fit_table(&model, &data, &HORIZONS))?;
            let white = run.manifest.time("whiteness", || whiteness(&model, &data, WHITENESS_LAGS))?;

            println!("fit% on held-out data (N-step-ahead)");
            println!("{:>6} {}", "zone", HORIZONS.map(|n| format!("{:>8}", format!("N={n}"))).join(" "));
            for (z, row) in table.iter().enumerate() {
                print_row(&(z + 1).to_string(), row.iter().copied());
            }
            let col_min = |j: usize| table.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
            print_row("min", (0..HORIZONS.len()).map(col_min));
            println!("\nwhiteness: share of lags inside the 99% band");
            println!("{:>6} {:>8} {:>8}", "zone", "auto", "cross");
            for (z, w) in white.iter().enumerate() {
                println!("{:>6} {:>8.3} {:>8.3}", z + 1, w.auto_inside, w.cross_inside);
            }

            let fit_path = run.path("fit_table.csv");
            let mut text = format!("# fit% = 100*(1 - NRMSE) on the held-out split\nzone,{}\n", HORIZONS.map(|n| format!("N{n}")).join(","));
            for (z, row) in table.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(f64::to_string).collect();
                text.push_str(&format!("{},{}\n", z + 1, cells.join(",")));
            }
            std::fs::write(&fit_path, text)?;
            run.manifest.output(&fit_path)?;
            let white_path = run.path("whiteness.csv");
            let mut text = format!("# share of lags inside +/-2.576/sqrt(N); auto lags 1..{WHITENESS_LAGS}, cross lags -{WHITENESS_LAGS}..{WHITENESS_LAGS}\nzone,auto_inside,cross_inside\n");
            for (z, w) in white.iter().enumerate() {
                text.push_str(&format!("{},{},{}\n", z + 1, w.auto_inside, w.cross_inside));
            }
            std::fs::write(&white_path, text)?;
            run.manifest.output(&white_path)?;
        }
        Command::Control {
            model,
            reference,
            duration,
            ..
        } => {
            let model = run.load_model(model)?;
            let reference = run.reference(reference)?;
            if let Some(d) = duration {
                run.cfg.run.duration = *d;
            }
            let (plant, mpc, opts) = (run.cfg.plant.clone(), run.cfg.mpc.clone(), run.cfg.run.clone());
            let result = run.manifest.time("closed_loop", || run_closed_loop(&plant, &model, &mpc, &reference, &opts))?;
            let traj_path = run.path("trajectory.csv");
            io::save_trajectory(&result.trajectory, &traj_path)?;
            run.manifest.output(&traj_path)?;
            let point = (plant.material.h_top, plant.geometry.gap_d, plant.material.absorptivity);
            let metrics_path = run.path("metrics.csv");
            io::save_metrics(
                &[SweepRow {
                    point,
                    outcome: Ok(result.metrics.clone()),
                }],
                &metrics_path,
            )?;
            run.manifest.output(&metrics_path)?;
            let mean_ms = 1e3 * result.step_seconds.iter().sum::<f64>() / result.step_seconds.len().max(1) as f64;
            print_metrics(&result.metrics);
            println!("mean controller time per step: {mean_ms:.1} ms");
        }
        Command::Sweep {
            model,
            reference,
            duration,
            grid,
            ..
        } => {
            let model = run.load_model(model)?;
            let reference = run.reference(reference)?;
            if let Some(p) = grid {
                run.manifest.input(p)?;
                run.cfg.sweep = io::load_config::<SweepGrid>(p)?;
            }
            if let Some(d) = duration {
                run.cfg.run.duration = *d;
            }
            let cfg = run.cfg.clone();
            let rows = run
                .manifest
                .time("sweep", || robustness_sweep(&cfg.sweep, &cfg.plant, &model, &cfg.mpc, &reference, &cfg.run))?;
            let path = run.path("metrics.csv");
            io::save_metrics(&rows, &path)?;
            run.manifest.output(&path)?;
            for row in &rows {
                match &row.outcome {
                    Ok(m) => println!(
                        "h={:<5} d={:<5} alpha={:<4} avg {:6.2}  max {:6.2}  overshoot {:6.2}  settling {}",
                        row.point.0,
                        row.point.1,
                        row.point.2,
                        m.avg_final_error,
                        m.max_final_error,
                        m.max_overshoot,
                        m.settling_time.map_or("never".to_string(), |t| format!("{t} s"))
                    ),
                    Err(e) => println!("h={} d={} alpha={} failed: {e}", row.point.0, row.point.1, row.point.2),
                }
            }
        }
        Command::Metrics { trajectory, .. } => {
            run.manifest.input(trajectory)?;
            let traj = io::load_trajectory(trajectory)?;
            let metrics = io::trajectory_metrics(&traj)?;
            let plant = &run.cfg.plant;
            let point = (plant.material.h_top, plant.geometry.gap_d, plant.material.absorptivity);
            let path = run.path("metrics.csv");
            io::save_metrics(
                &[SweepRow {
                    point,
                    outcome: Ok(metrics.clone()),
                }],
                &path,
            )?;
            run.manifest.output(&path)?;
            print_metrics(&metrics);
        }
    }
    run.finish()
}

fn print_metrics(m: &thermoform::experiments::Metrics) {
    println!("avg_final_error = {:.3}", m.avg_final_error);
    println!("max_final_error = {:.3}", m.max_final_error);
    println!("max_overshoot = {:.3}", m.max_overshoot);
    match m.settling_time {
        Some(t) => println!("settling_time = {t}"),
        None => println!("settling_time = never"),
    }
    println!("terminal_pass = {}/{}", m.terminal_pass_count(), m.terminal_pass.len());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
