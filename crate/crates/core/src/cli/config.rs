//! TOML run configuration. Every physical quantity is SI with a
//! unit-suffixed key; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{InitialState, Scheme, SimulationConfig};
use crate::error::{Error, Result};
use crate::model::{Environment, NoiseConfig, OscillatorMode, SphereParams, AIR_MOLAR_MASS};
use crate::num::logspace;
use crate::pipeline::{default_r_c_grid, ExcessInput, Regime, ReplayInputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSection {
    pub radius_m: f64,
    pub density_kg_m3: f64,
    #[serde(default)]
    pub susceptibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub label: String,
    pub frequency_hz: f64,
    #[serde(default)]
    pub duffing_alpha_kg_m2_s2: f64,
    #[serde(default)]
    pub x0_m: f64,
    #[serde(default)]
    pub p0_kg_m_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub temperature_k: f64,
    #[serde(default)]
    pub pressure_pa: f64,
    #[serde(default = "air")]
    pub gas_molar_mass_kg_mol: f64,
}

fn air() -> f64 {
    AIR_MOLAR_MASS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub duration_s: f64,
    /// Angular damping rate. Derived from the gas pressure when absent.
    pub gamma_per_s: Option<f64>,
    pub dt_s: Option<f64>,
    pub sample_rate_hz: Option<f64>,
    pub burn_in_s: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub coupling_beta_kg_m2_s2: f64,
    /// Thermal bath at the environment temperature.
    #[serde(default = "yes")]
    pub thermal: bool,
    #[serde(default)]
    pub csl_psd_n2_per_hz: f64,
    #[serde(default)]
    pub extra_psd_n2_per_hz: f64,
    #[serde(default)]
    pub parametric_strength_sqrt_s: f64,
}

fn yes() -> bool {
    true
}

/// Log-spaced grid of correlation lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub min_m: f64,
    pub max_m: f64,
    pub points: usize,
}

impl GridSection {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.min_m > 0.0 && self.max_m > self.min_m && self.points >= 2) {
            return Err(Error::Config(format!(
                "r_c grid needs 0 < min_m < max_m and points >= 2, got {}..{} with {} points",
                self.min_m, self.max_m, self.points
            )));
        }
        Ok(logspace(self.min_m, self.max_m, self.points))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "confidence")]
    pub confidence: f64,
    pub r_c_grid: Option<GridSection>,
}

fn confidence() -> f64 {
    0.95
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            confidence: confidence(),
            r_c_grid: None,
        }
    }
}

impl AnalysisSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        match &self.r_c_grid {
            Some(g) => g.values(),
            None => Ok(default_r_c_grid()),
        }
    }
}

/// Pressures and durations of the two regimes of a virtual experiment. The
/// damping of each follows from its pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub medium_vacuum_pressure_pa: f64,
    pub medium_vacuum_duration_s: f64,
    pub high_vacuum_pressure_pa: f64,
    pub high_vacuum_duration_s: f64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Simulation and analysis settings for `simulate`, `analyze` and `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub sphere: SphereSection,
    pub modes: Vec<ModeSection>,
    pub environment: EnvironmentSection,
    pub simulation: SimulationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub experiment: Option<ExperimentSection>,
}

/// Analysis-only inputs for `bound` and `exclude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub mass_kg: f64,
    pub radius_m: f64,
    pub gamma_per_s: f64,
    pub excess: ExcessInput,
    #[serde(default = "confidence")]
    pub confidence: f64,
    pub r_c_grid: Option<GridSection>,
}

impl ReplayConfig {
    pub fn inputs(&self) -> Result<ReplayInputs> {
        Ok(ReplayInputs {
            mass_kg: self.mass_kg,
            radius_m: self.radius_m,
            gamma_per_s: self.gamma_per_s,
            excess: self.excess.clone(),
            confidence: self.confidence,
            r_c_grid_m: match &self.r_c_grid {
                Some(g) => g.values()?,
                None => default_r_c_grid(),
            },
        })
    }
}

/// Either kind of input file accepted by `bound`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundInput {
    Run(Box<RunConfig>),
    Replay(ReplayConfig),
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    parse(&read(path)?, path)
}

pub fn load_replay_config(path: &Path) -> Result<ReplayConfig> {
    parse(&read(path)?, path)
}

/// A file with a top-level `excess` table is replay input; anything else
/// must be a run configuration.
pub fn load_bound_input(path: &Path) -> Result<BoundInput> {
    let text = read(path)?;
    let table: toml::Table = parse(&text, path)?;
    if table.contains_key("excess") {
        Ok(BoundInput::Replay(parse(&text, path)?))
    } else {
        Ok(BoundInput::Run(Box::new(parse(&text, path)?)))
    }
}

/// SHA-256 of the canonical JSON encoding, hex encoded.
pub fn digest<S: Serialize>(value: &S) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

impl RunConfig {
    pub fn sphere(&self) -> Result<SphereParams> {
        SphereParams::new(self.sphere.radius_m, self.sphere.density_kg_m3, self.sphere.susceptibility)
    }

    pub fn environment(&self) -> Result<Environment> {
        let e = &self.environment;
        Environment::new(e.temperature_k, e.pressure_pa, e.gas_molar_mass_kg_mol)
    }

    pub fn modes(&self) -> Result<Vec<OscillatorMode>> {
        self.modes
            .iter()
            .enumerate()
            .map(|(i, m)| {
                OscillatorMode::new(m.label.clone(), m.frequency_hz, m.duffing_alpha_kg_m2_s2)
                    .map_err(|e| Error::Config(format!("modes[{i}]: {e}")))
            })
            .collect()
    }

    fn build(&self, environment: Environment, duration: f64, seed: u64) -> Result<Regime> {
        let sphere = self.sphere()?;
        let s = &self.simulation;
        let base = match s.gamma_per_s {
            Some(g) => {
                let cfg = SimulationConfig::new(sphere, self.modes()?, g, duration);
                Regime {
                    label: "run".into(),
                    simulation: cfg,
                    environment,
                }
            }
            None => {
                if !(environment.pressure > 0.0) {
                    return Err(Error::Config(
                        "simulation.gamma_per_s is absent and environment.pressure_pa is not positive".into(),
                    ));
                }
                Regime::gas_damped("run", sphere, self.modes()?, environment, duration)?
            }
        };
        let thermal = if s.thermal {
            crate::model::thermal_force_psd(base.simulation.gamma, sphere.mass(), environment.temperature)?
        } else {
            0.0
        };
        let noise = NoiseConfig {
            thermal_psd: thermal,
            csl_psd: s.csl_psd_n2_per_hz,
            extra_additive_psd: s.extra_psd_n2_per_hz,
            parametric_strength: s.parametric_strength_sqrt_s,
        };
        let mut cfg = base
            .simulation
            .with_noise(noise)
            .with_coupling(s.coupling_beta_kg_m2_s2)
            .with_scheme(s.scheme)
            .with_seed(seed)
            .with_initial_state(
                self.modes
                    .iter()
                    .map(|m| InitialState {
                        x0: m.x0_m,
                        p0: m.p0_kg_m_s,
                    })
                    .collect(),
            );
        if let Some(dt) = s.dt_s {
            cfg = cfg.with_dt(dt);
        }
        if let Some(rate) = s.sample_rate_hz {
            if !(rate > 0.0) {
                return Err(Error::Config(format!("simulation.sample_rate_hz must be positive, got {rate}")));
            }
            cfg = cfg.with_sample_rate(rate);
        }
        if let Some(b) = s.burn_in_s {
            cfg = cfg.with_burn_in(b);
        }
        cfg.validate()?;
        Ok(Regime {
            label: base.label,
            simulation: cfg,
            environment,
        })
    }

    /// The single run described by `[simulation]` and `[environment]`.
    pub fn regime(&self) -> Result<Regime> {
        self.build(self.environment()?, self.simulation.duration_s, self.seed)
    }

    /// Medium- and high-vacuum regimes of `[experiment]`.
    pub fn experiment(&self) -> Result<(Regime, Regime)> {
        let x = self
            .experiment
            .as_ref()
            .ok_or_else(|| Error::Config("bound needs an [experiment] table or replay inputs".into()))?;
        if self.simulation.gamma_per_s.is_some() {
            return Err(Error::Config(
                "simulation.gamma_per_s must be absent for an experiment; damping follows from the pressures".into(),
            ));
        }
        let env = self.environment()?;
        let at = |p: f64| Environment::new(env.temperature, p, env.gas_molar_mass);
        let mut mv = self.build(at(x.medium_vacuum_pressure_pa)?, x.medium_vacuum_duration_s, self.seed)?;
        let mut hv = self.build(
            at(x.high_vacuum_pressure_pa)?,
            x.high_vacuum_duration_s,
            crate::pipeline::presets::derive_seed(self.seed, 1),
        )?;
        mv.label = "medium vacuum".into();
        hv.label = "high vacuum".into();
        Ok((mv, hv))
    }
}
