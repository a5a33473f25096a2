//! Command-line front end. [`run`] parses arguments, dispatches a
//! subcommand and maps the outcome to an exit code: 0 on success, 1 for
//! configuration errors, 2 for numerical or fit failures.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{
    default_bandwidth, default_segment_length, effective_temperature, envelope_squared, fit_gaussian,
    fit_exponential_decay, fit_lorentzian, normalized_energy_autocorrelation, peak_shape, psd_welch,
    radius_from_damping, radius_from_equipartition, DampingEstimate, DecayFitOptions, LorentzianFit, PeakShape,
    TemperatureEstimate, Window, MAX_LAG_FRACTION,
};
use crate::csl::reference::{curves_to_csv, reference_curves};
use crate::dynamics::io::{read_trajectory, sidecar_path, tool_tag, write_trajectory, TrajectoryMetadata};
use crate::dynamics::{simulate, SimulationConfig};
use crate::error::{Error, Result};
use crate::model::{Environment, MEAN_SPEED_MODEL};
use crate::pipeline::{
    replay_bound, reproduce_tables, run_virtual_experiment, BoundReport, Fidelity, ReplayInputs, Table,
};
use config::{digest, load_bound_input, load_replay_config, load_run_config, BoundInput, GridSection, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "levicsl", version, about = "Levitated-oscillator CSL test: simulate, analyse, bound")]
struct Cli {
    /// Print JSON on standard output instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a run configuration and write the trajectory CSV plus metadata.
    Simulate { config: PathBuf },
    /// Spectra, temperature, damping and radius of a trajectory.
    Analyze {
        trajectory: PathBuf,
        /// Run configuration supplying mass, modes and environment; defaults
        /// to the configuration embedded in the trajectory metadata.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Bound report from a run configuration with an [experiment] table or
    /// from replay inputs.
    Bound { input: PathBuf },
    /// Exclusion curve only, from replay inputs (published inputs by default).
    Exclude {
        input: Option<PathBuf>,
        /// Log-spaced r_C grid as MIN:MAX:POINTS, in metres.
        #[arg(long)]
        grid: String,
        /// Append the bundled reference curves.
        #[arg(long)]
        references: bool,
    },
    /// Recompute a published table and compare cell by cell.
    Reproduce {
        #[arg(long, value_enum)]
        table: TableArg,
        /// Published simulation parameters instead of the desk-scale preset.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    Projection,
}

impl From<TableArg> for Table {
    fn from(t: TableArg) -> Self {
        match t {
            TableArg::One => Table::One,
            TableArg::Two => Table::Two,
            TableArg::Three => Table::Three,
            TableArg::Projection => Table::Projection,
        }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { config } => cmd_simulate(cli, config),
        Command::Analyze { trajectory, config } => cmd_analyze(cli, trajectory, config.as_deref()),
        Command::Bound { input } => cmd_bound(cli, input),
        Command::Exclude {
            input,
            grid,
            references,
        } => cmd_exclude(cli, input.as_deref(), grid, *references),
        Command::Reproduce { table, full } => cmd_reproduce(cli, (*table).into(), *full),
    }
}

/// Output directory; every write goes to a plain file name inside it.
struct OutDir(PathBuf);

impl OutDir {
    fn new(cli: &Cli, configured: Option<&Path>) -> Result<Self> {
        let dir = cli
            .out_dir
            .clone()
            .or_else(|| configured.map(Path::to_path_buf))
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
        Ok(Self(dir))
    }

    fn path(&self, name: &str) -> PathBuf {
        debug_assert!(!name.contains(['/', '\\']) && name != "..");
        self.0.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents)?;
        Ok(p)
    }
}

/// File-name-safe version of a mode label.
fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "mode".into()
    } else {
        s
    }
}

fn to_json<S: Serialize>(value: &S) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn with_seed(mut cfg: RunConfig, cli: &Cli) -> RunConfig {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    tool: String,
    config_digest: String,
    simulation_digest: String,
    trajectory: String,
    samples: usize,
    sample_interval_s: f64,
    gamma_per_s: f64,
    temperature_k: f64,
    pressure_pa: f64,
    pressure_mbar: f64,
    mean_speed_model: &'static str,
    config: &'a RunConfig,
}

fn cmd_simulate(cli: &Cli, path: &Path) -> Result<()> {
    let cfg = with_seed(load_run_config(path)?, cli);
    let regime = cfg.regime()?;
    let out = OutDir::new(cli, Some(&cfg.output_dir))?;
    let traj = simulate(&regime.simulation)?;
    let csv = out.path("trajectory.csv");
    write_trajectory(&csv, &traj, Some(&regime.simulation))?;
    let summary = SimulateSummary {
        tool: tool_tag(),
        config_digest: digest(&cfg),
        simulation_digest: traj.config_digest.clone(),
        trajectory: csv.display().to_string(),
        samples: traj.len(),
        sample_interval_s: traj.dt,
        gamma_per_s: regime.simulation.gamma,
        temperature_k: regime.environment.temperature,
        pressure_pa: regime.environment.pressure,
        pressure_mbar: regime.environment.pressure_mbar(),
        mean_speed_model: MEAN_SPEED_MODEL,
        config: &cfg,
    };
    let json = to_json(&summary);
    out.write("simulate.json", &json)?;
    if cli.json {
        print!("{json}");
    } else {
        println!(
            "wrote {} ({} samples every {:.4e} s, gamma = {:.4e} 1/s, P = {:.3e} Pa = {:.3e} mbar)",
            summary.trajectory, summary.samples, summary.sample_interval_s, summary.gamma_per_s, summary.pressure_pa,
            summary.pressure_mbar
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ModeAnalysis {
    label: String,
    frequency_hz: f64,
    sigma_m: f64,
    temperature: TemperatureEstimate,
    damping: DampingEstimate,
    bandwidth_hz: f64,
    lorentzian: Option<LorentzianFit>,
    peak: Option<PeakShape>,
    radius_equipartition_m: Option<f64>,
    psd_csv: String,
    autocorrelation_csv: String,
}

#[derive(Serialize)]
struct AnalysisReport {
    tool: String,
    config_digest: String,
    trajectory: String,
    duration_s: f64,
    gamma_per_s: f64,
    pressure_pa: Option<f64>,
    pressure_mbar: Option<f64>,
    radius_damping_m: Option<f64>,
    mean_speed_model: &'static str,
    modes: Vec<ModeAnalysis>,
}

fn cmd_analyze(cli: &Cli, path: &Path, config: Option<&Path>) -> Result<()> {
    let traj = read_trajectory::<f64>(path)?;
    let (sim, env, configured): (SimulationConfig, Option<Environment>, Option<PathBuf>) = match config {
        Some(c) => {
            let cfg = with_seed(load_run_config(c)?, cli);
            let regime = cfg.regime()?;
            (regime.simulation, Some(regime.environment), Some(cfg.output_dir))
        }
        None => {
            let side = sidecar_path(path);
            let meta: TrajectoryMetadata = serde_json::from_str(
                &fs::read_to_string(&side).map_err(|e| Error::Config(format!("{}: {e}", side.display())))?,
            )
            .map_err(|e| Error::Parse(format!("{}: {e}", side.display())))?;
            let sim = meta.config.ok_or_else(|| {
                Error::Config("trajectory metadata has no embedded configuration; pass --config".into())
            })?;
            (sim, None, None)
        }
    };
    if sim.modes.len() != traj.samples.len() {
        return Err(Error::Config(format!(
            "configuration has {} modes, trajectory has {}",
            sim.modes.len(),
            traj.samples.len()
        )));
    }
    let out = OutDir::new(cli, configured.as_deref())?;
    let mass = sim.sphere.mass();
    let duration = traj.duration();
    let comments = vec![format!("tool={}", tool_tag()), format!("config_digest={}", traj.config_digest)];

    let mut dampings = Vec::new();
    let mut envelopes = Vec::new();
    for (i, mode) in sim.modes.iter().enumerate() {
        let b = default_bandwidth(mode.frequency);
        let env = envelope_squared(&traj, i, mode.frequency, b)?;
        let span = env.dt * env.values.len() as f64;
        let r = normalized_energy_autocorrelation(&env.values, env.dt, span * MAX_LAG_FRACTION)?;
        let d = fit_exponential_decay(
            &r,
            DecayFitOptions {
                bandwidth: Some(b),
                ..Default::default()
            },
        )?;
        dampings.push(d);
        envelopes.push((b, r));
    }
    let gamma = dampings.iter().map(|d| d.gamma).sum::<f64>() / dampings.len() as f64;

    let mut modes = Vec::new();
    for (i, (mode, (damping, (b, r)))) in sim.modes.iter().zip(dampings.into_iter().zip(envelopes)).enumerate() {
        let fit = fit_gaussian(traj.mode(i))?;
        let temperature = effective_temperature(fit.sigma, mode, mass)?.with_measurement(gamma, duration)?;
        let seg = default_segment_length(traj.len(), traj.dt, gamma);
        let psd = psd_welch(&traj, i, seg, 0.5, Window::Hann)?;
        let half = (10.0 * gamma / std::f64::consts::TAU).max(20.0 * psd.resolution()).min(0.5 * mode.frequency);
        let (lo, hi) = (mode.frequency - half, mode.frequency + half);
        let name = slug(&mode.label);
        let psd_csv = out.write(&format!("psd_{name}.csv"), &psd.to_csv(&comments))?;
        let ac_csv = out.write(&format!("autocorr_{name}.csv"), &r.to_csv(&comments))?;
        modes.push(ModeAnalysis {
            label: mode.label.clone(),
            frequency_hz: mode.frequency,
            sigma_m: fit.sigma,
            temperature,
            damping,
            bandwidth_hz: b,
            lorentzian: fit_lorentzian(&psd, lo, hi).ok(),
            peak: peak_shape(&psd, lo, hi).ok(),
            radius_equipartition_m: match &env {
                Some(e) => Some(radius_from_equipartition(fit.sigma, mode.frequency, sim.sphere.density(), e.temperature)?),
                None => None,
            },
            psd_csv: psd_csv.display().to_string(),
            autocorrelation_csv: ac_csv.display().to_string(),
        });
    }
    let pressure = env.map(|e| e.pressure).filter(|p| *p > 0.0);
    let radius_damping_m = match (&env, pressure) {
        (Some(e), Some(p)) => Some(radius_from_damping(gamma, p, e.mean_gas_speed()?, sim.sphere.density())?),
        _ => None,
    };
    let report = AnalysisReport {
        tool: tool_tag(),
        config_digest: traj.config_digest.clone(),
        trajectory: path.display().to_string(),
        duration_s: duration,
        gamma_per_s: gamma,
        pressure_pa: pressure,
        pressure_mbar: pressure.map(|p| p / 100.0),
        radius_damping_m,
        mean_speed_model: MEAN_SPEED_MODEL,
        modes,
    };
    let json = to_json(&report);
    out.write("analysis.json", &json)?;
    if cli.json {
        print!("{json}");
    } else {
        println!("gamma = {:.4e} 1/s (gamma/2pi = {:.4e} Hz) over {:.4e} s", gamma, gamma / std::f64::consts::TAU, duration);
        for m in &report.modes {
            println!(
                "{}: sigma = {:.4e} m, T_eff = {:.2} +- {:.2} K, tau = {:.4e} s",
                m.label,
                m.sigma_m,
                m.temperature.t_eff,
                m.temperature.sigma_1s.unwrap_or(f64::NAN),
                m.damping.tau
            );
        }
        if let Some(r) = report.radius_damping_m {
            println!("radius from damping = {r:.4e} m");
        }
    }
    Ok(())
}

fn write_bound(cli: &Cli, out: &OutDir, report: &BoundReport, references: bool) -> Result<()> {
    let json = report.to_json() + "\n";
    out.write("bound.json", &json)?;
    write_curve(out, report, references)?;
    if cli.json {
        print!("{json}");
    } else {
        println!("delta T = {:.3} K, bound = {:.3} K at {:.0}%", report.delta_t, report.sigma_delta_t, 100.0 * report.confidence);
        println!(
            "sqrt(dS) = {:.3e} N/sqrtHz, bound = {:.3e} N/sqrtHz",
            report.sqrt_excess_psd, report.sqrt_excess_psd_bound
        );
        if let Some(c) = &report.curve {
            for r_c in [1e-7, 1e-6] {
                if let Some(l) = c.lambda_at(r_c) {
                    println!("lambda(r_C = {r_c:e} m) < 10^{:.2} 1/s", l.log10());
                }
            }
        }
        if !report.flags.is_empty() {
            println!("flags: {:?}", report.flags);
        }
    }
    Ok(())
}

fn write_curve(out: &OutDir, report: &BoundReport, references: bool) -> Result<()> {
    let Some(curve) = &report.curve else {
        return Ok(());
    };
    let comments = vec![
        format!("tool={}", report.tool),
        format!("config_digest={}", report.inputs_digest),
        format!("confidence={}", report.confidence),
    ];
    let refs = if references { reference_curves() } else { Vec::new() };
    let mut curves = vec![curve];
    curves.extend(refs.iter());
    out.write("exclusion.csv", &curves_to_csv(&curves, &comments))?;
    Ok(())
}

fn cmd_bound(cli: &Cli, path: &Path) -> Result<()> {
    match load_bound_input(path)? {
        BoundInput::Run(cfg) => {
            let cfg = with_seed(*cfg, cli);
            let (mv, hv) = cfg.experiment()?;
            let out = OutDir::new(cli, Some(&cfg.output_dir))?;
            let report = run_virtual_experiment(&mv, &hv, &cfg.analysis.grid()?, cfg.analysis.confidence)?;
            write_bound(cli, &out, &report, false)
        }
        BoundInput::Replay(r) => {
            let out = OutDir::new(cli, Some(&r.output_dir))?;
            let report = replay_bound(&r.inputs()?)?;
            write_bound(cli, &out, &report, false)
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("--grid expects MIN:MAX:POINTS, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    GridSection {
        min_m: parts[0].trim().parse().map_err(|_| bad())?,
        max_m: parts[1].trim().parse().map_err(|_| bad())?,
        points: parts[2].trim().parse().map_err(|_| bad())?,
    }
    .values()
}

fn cmd_exclude(cli: &Cli, input: Option<&Path>, grid: &str, references: bool) -> Result<()> {
    let grid = parse_grid(grid)?;
    let (mut inputs, configured) = match input {
        Some(p) => {
            let r = load_replay_config(p)?;
            (r.inputs()?, Some(r.output_dir))
        }
        None => (ReplayInputs::published(), None),
    };
    inputs.r_c_grid_m = grid;
    let report = replay_bound(&inputs)?;
    if report.curve.is_none() {
        return Err(Error::Config("inputs give no positive excess budget, so there is no curve".into()));
    }
    let out = OutDir::new(cli, configured.as_deref())?;
    write_curve(&out, &report, references)?;
    let curve = report.curve.as_ref().expect("checked above");
    if cli.json {
        print!("{}", to_json(curve));
    } else {
        println!("r_c_m,lambda_upper_per_s");
        for p in &curve.points {
            println!("{:e},{:e}", p.r_c, p.lambda_upper);
        }
    }
    Ok(())
}

fn cmd_reproduce(cli: &Cli, table: Table, full: bool) -> Result<()> {
    let fidelity = if full { Fidelity::Full } else { Fidelity::Ci };
    let report = reproduce_tables(table, fidelity, cli.seed.unwrap_or(0))?;
    if let Some(dir) = &cli.out_dir {
        let out = OutDir::new(cli, Some(dir))?;
        let name = match table {
            Table::One => "table_1.json",
            Table::Two => "table_2.json",
            Table::Three => "table_3.json",
            Table::Projection => "table_projection.json",
        };
        out.write(name, &(report.to_json() + "\n"))?;
    }
    if cli.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parses() {
        let g = parse_grid("1e-8:1e-6:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] / 1e-7 - 1.0).abs() < 1e-12);
        assert!(parse_grid("1e-8:1e-6").is_err());
        assert!(parse_grid("a:b:c").is_err());
    }

    #[test]
    fn labels_become_safe_file_names() {
        assert_eq!(slug("../x 1"), "___x_1");
        assert_eq!(slug(""), "mode");
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["levicsl", "reproduce", "--table", "9"]), 1);
        assert_eq!(run(["levicsl", "--version"]), 0);
    }
}
