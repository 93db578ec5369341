//! Scenario configuration: TOML sections, validation, and resolution into a
//! concrete [`SystemModel`] plus run controls.
//!
//! Frequencies are accepted in Hz with `*_hz` suffixes and converted to
//! angular units at this boundary; rates carry `*_per_s` suffixes and pass
//! through unchanged. Unknown keys are rejected.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::f64::consts::PI;

use sideband::model::{
    thermal_occupation, BathSpec, CouplingParams, DriveParams, Frame, ModeParams, SystemModel,
};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub target: ModeSection,
    pub aux: ModeSection,
    pub coupling: CouplingSection,
    #[serde(default)]
    pub drive: Option<DriveSection>,
    pub run: RunSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub frequency_hz: f64,
    pub q_factor: Option<f64>,
    pub damping_per_s: Option<f64>,
    pub n_occ: Option<f64>,
    pub temperature_k: Option<f64>,
    pub truncation: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub g_per_s: f64,
    /// interaction_rwa | interaction_full | lab_modulated
    pub frame: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub beta_re: Option<f64>,
    pub beta_im: Option<f64>,
    pub power_w: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// master_equation | trajectories | langevin
    pub engine: String,
    pub t_final_s: f64,
    pub dt_s: Option<f64>,
    pub samples: Option<usize>,
    pub trajectories: Option<usize>,
    pub seed: Option<u64>,
    /// Initial thermal occupations; default to the bath occupations.
    pub initial_n_occ_target: Option<f64>,
    pub initial_n_occ_aux: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub values: Vec<f64>,
    pub parameter2: Option<String>,
    pub values2: Option<Vec<f64>>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).context("parsing scenario config")?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    MasterEquation,
    Trajectories,
    Langevin,
}

impl Engine {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "master_equation" => Ok(Engine::MasterEquation),
            "trajectories" => Ok(Engine::Trajectories),
            "langevin" => Ok(Engine::Langevin),
            other => bail!(
                "unknown engine '{other}' (expected master_equation | trajectories | langevin)"
            ),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Engine::MasterEquation => "master_equation",
            Engine::Trajectories => "trajectories",
            Engine::Langevin => "langevin",
        }
    }
}

/// A fully resolved scenario: the model plus run controls and an echo of
/// every unit conversion performed.
pub struct ResolvedScenario {
    pub model: SystemModel,
    pub engine: Engine,
    pub t_final: f64,
    pub dt: Option<f64>,
    pub samples: usize,
    pub trajectories: usize,
    pub seed: u64,
    /// Initial thermal occupations (target, aux) — the bath occupations.
    pub initial_occ: (f64, f64),
    pub echo: Vec<(String, String)>,
    pub notes: Vec<String>,
}

fn resolve_mode(section: &ModeSection, name: &str, echo: &mut Vec<(String, String)>) -> Result<(ModeParams, f64)> {
    if section.truncation < 2 {
        bail!("[{name}] truncation must be at least 2");
    }
    if !(section.frequency_hz > 0.0) {
        bail!("[{name}] frequency_hz must be positive");
    }
    let omega = 2.0 * PI * section.frequency_hz;
    echo.push((
        format!("{name}.angular_frequency_rad_per_s"),
        format!("{omega:.12e} (= 2*pi * {:.12e} Hz)", section.frequency_hz),
    ));
    let damping = match (section.q_factor, section.damping_per_s) {
        (Some(q), None) => {
            if !(q > 0.0) {
                bail!("[{name}] q_factor must be positive");
            }
            let d = omega / q;
            echo.push((
                format!("{name}.damping_per_s"),
                format!("{d:.12e} (= omega / q_factor {q:.6e})"),
            ));
            d
        }
        (None, Some(d)) => {
            if d < 0.0 {
                bail!("[{name}] damping_per_s must be >= 0");
            }
            echo.push((format!("{name}.damping_per_s"), format!("{d:.12e}")));
            d
        }
        (Some(_), Some(_)) => bail!("[{name}] give q_factor or damping_per_s, not both"),
        (None, None) => bail!("[{name}] needs q_factor or damping_per_s"),
    };
    let (bath, n_occ) = match (section.n_occ, section.temperature_k) {
        (Some(n), None) => {
            if n < 0.0 {
                bail!("[{name}] n_occ must be >= 0");
            }
            echo.push((format!("{name}.n_occ"), format!("{n:.12e}")));
            (BathSpec::Occupation(n), n)
        }
        (None, Some(t)) => {
            let n = thermal_occupation(omega, t)
                .map_err(|e| anyhow::anyhow!("[{name}] {e}"))?;
            echo.push((
                format!("{name}.n_occ"),
                format!("{n:.12e} (Bose-Einstein at {t:.6e} K)"),
            ));
            (BathSpec::Temperature(t), n)
        }
        (Some(_), Some(_)) => bail!("[{name}] give n_occ or temperature_k, not both"),
        (None, None) => bail!("[{name}] needs n_occ or temperature_k"),
    };
    Ok((
        ModeParams {
            angular_frequency: omega,
            damping_rate: damping,
            bath,
            truncation: section.truncation,
        },
        n_occ,
    ))
}

pub fn resolve(config: &ScenarioConfig) -> Result<ResolvedScenario> {
    let mut echo = Vec::new();
    let mut notes = Vec::new();
    let (target, n_occ_target) = resolve_mode(&config.target, "target", &mut echo)?;
    let (aux, n_occ_aux) = resolve_mode(&config.aux, "aux", &mut echo)?;

    if target.low_quality() {
        notes.push(format!(
            "target quality factor {:.3} is below 10; the weak-damping master equation is unreliable here",
            target.quality_factor()
        ));
    }
    if aux.low_quality() {
        notes.push(format!(
            "aux quality factor {:.3} is below 10; the weak-damping master equation is unreliable here",
            aux.quality_factor()
        ));
    }

    let g = config.coupling.g_per_s;
    if g < 0.0 {
        bail!("[coupling] g_per_s must be >= 0");
    }
    let frame = match config.coupling.frame.as_str() {
        "interaction_rwa" => Frame::InteractionRwa,
        "interaction_full" => Frame::InteractionFull,
        "lab_modulated" => Frame::LabModulated,
        other => bail!(
            "unknown frame '{other}' (expected interaction_rwa | interaction_full | lab_modulated)"
        ),
    };
    let coupling = match frame {
        Frame::LabModulated => {
            let delta = aux.angular_frequency - target.angular_frequency;
            echo.push((
                "coupling.modulation_delta_rad_per_s".into(),
                format!("{delta:.12e} (= Omega - omega)"),
            ));
            echo.push((
                "coupling.lab_modulation_amplitude_per_s".into(),
                format!("{:.12e} (= 2 g; each sideband carries g)", 2.0 * g),
            ));
            CouplingParams::lab(g, delta)
        }
        Frame::InteractionFull => CouplingParams::full(g),
        Frame::InteractionRwa => CouplingParams::rwa(g),
    };
    echo.push(("coupling.g_per_s".into(), format!("{g:.12e}")));
    echo.push(("coupling.frame".into(), frame.label().into()));

    let drive = match &config.drive {
        None => DriveParams::off(),
        Some(d) if d.power_w.is_some() && (d.beta_re.is_some() || d.beta_im.is_some()) => {
            bail!("[drive] give beta components or power_w, not both")
        }
        Some(d) => match (d.beta_re, d.beta_im, d.power_w) {
            (None, None, Some(p)) => {
                let dp = DriveParams::from_power(p, aux.angular_frequency)
                    .map_err(|e| anyhow::anyhow!("[drive] {e}"))?;
                echo.push((
                    "drive.beta".into(),
                    format!(
                        "{:.12e} + {:.12e}i (|beta| = sqrt(P/(hbar*Omega)), P = {p:.6e} W)",
                        dp.beta.re, dp.beta.im
                    ),
                ));
                dp
            }
            (re, im, None) => {
                let beta = num_complex::Complex64::new(re.unwrap_or(0.0), im.unwrap_or(0.0));
                echo.push((
                    "drive.beta".into(),
                    format!("{:.12e} + {:.12e}i", beta.re, beta.im),
                ));
                DriveParams { beta }
            }
            _ => unreachable!("mixed beta/power rejected above"),
        },
    };

    let engine = Engine::parse(&config.run.engine)?;
    if !(config.run.t_final_s > 0.0) {
        bail!("[run] t_final_s must be positive");
    }
    let samples = config.run.samples.unwrap_or(201);
    if samples < 2 {
        bail!("[run] samples must be at least 2");
    }
    let trajectories = config.run.trajectories.unwrap_or(4096);
    if engine == Engine::Trajectories && trajectories < 1 {
        bail!("[run] trajectories must be at least 1");
    }
    let seed = config.run.seed.unwrap_or(1);
    let init_target = config.run.initial_n_occ_target.unwrap_or(n_occ_target);
    let init_aux = config.run.initial_n_occ_aux.unwrap_or(n_occ_aux);
    if init_target < 0.0 || init_aux < 0.0 {
        bail!("[run] initial occupations must be >= 0");
    }
    if config.run.initial_n_occ_target.is_some() || config.run.initial_n_occ_aux.is_some() {
        echo.push((
            "run.initial_n_occ".into(),
            format!("({init_target:.12e}, {init_aux:.12e})"),
        ));
    }

    let model = SystemModel::build(target, aux, coupling, drive)
        .map_err(|e| anyhow::anyhow!("building model: {e}"))?;

    // surface under-truncation on the initial thermal states
    for (name, n_occ, mode) in [
        ("target", init_target, sideband::fock::Mode::Target),
        ("aux", init_aux, sideband::fock::Mode::Aux),
    ] {
        let t = sideband::fock::thermal_state(&model.space, mode, n_occ)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        echo.push((
            format!("{name}.n_occ_truncated"),
            format!("{:.12e}", t.truncated_occupation),
        ));
        if t.under_truncated() {
            notes.push(format!(
                "{name} thermal state is under-truncated: nominal n_occ {:.4} realizes {:.4} at truncation {} ({:.1}% deviation)",
                t.nominal_occupation,
                t.truncated_occupation,
                model.space.dim(mode),
                100.0 * t.truncation_deviation()
            ));
        }
    }

    Ok(ResolvedScenario {
        model,
        engine,
        t_final: config.run.t_final_s,
        dt: config.run.dt_s,
        samples,
        trajectories,
        seed,
        initial_occ: (init_target, init_aux),
        echo,
        notes,
    })
}

/// Apply a sweep parameter path to a copy of the configuration.
pub fn patch(config: &ScenarioConfig, path: &str, value: f64) -> Result<ScenarioConfig> {
    let mut c = config.clone();
    match path {
        "target.q_factor" => {
            c.target.q_factor = Some(value);
            c.target.damping_per_s = None;
        }
        "target.damping_per_s" => {
            c.target.damping_per_s = Some(value);
            c.target.q_factor = None;
        }
        "target.n_occ" => {
            c.target.n_occ = Some(value);
            c.target.temperature_k = None;
        }
        "target.frequency_hz" => c.target.frequency_hz = value,
        "aux.damping_per_s" => {
            c.aux.damping_per_s = Some(value);
            c.aux.q_factor = None;
        }
        "aux.frequency_hz" => c.aux.frequency_hz = value,
        "coupling.g_per_s" => c.coupling.g_per_s = value,
        "drive.beta_re" => {
            let mut d = c.drive.clone().unwrap_or(DriveSection {
                beta_re: None,
                beta_im: None,
                power_w: None,
            });
            d.beta_re = Some(value);
            d.power_w = None;
            c.drive = Some(d);
        }
        "run.t_final_s" => c.run.t_final_s = value,
        other => bail!("unknown sweep parameter '{other}'"),
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[target]
frequency_hz = 20e6
q_factor = 1e5
n_occ = 3.68
truncation = 8

[aux]
frequency_hz = 5e9
damping_per_s = 1e6
temperature_k = 0.02
truncation = 4

[coupling]
g_per_s = 2e6
frame = "interaction_rwa"

[run]
engine = "master_equation"
t_final_s = 1e-6
"#;

    #[test]
    fn parses_and_resolves_base_config() {
        let cfg = ScenarioConfig::from_toml(BASE).unwrap();
        let r = resolve(&cfg).unwrap();
        assert_eq!(r.engine, Engine::MasterEquation);
        assert!((r.model.target.damping_rate - 2.0 * PI * 200.0).abs() < 1e-6);
        assert!((r.model.n_t_aux() - 6.155888e-6).abs() < 1e-9);
        assert_eq!(r.samples, 201);
        assert_eq!(r.seed, 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_toml(BASE).is_ok());
        let with_unknown_key = BASE.replace("q_factor = 1e5", "q_factor = 1e5\nwat = 2");
        assert!(ScenarioConfig::from_toml(&with_unknown_key).is_err());
        let with_unknown_run_key =
            BASE.replace("t_final_s = 1e-6", "t_final_s = 1e-6\nbogus_key = 3");
        assert!(ScenarioConfig::from_toml(&with_unknown_run_key).is_err());
        let with_unknown_section = format!("{BASE}\n[extra]\nx = 1\n");
        assert!(ScenarioConfig::from_toml(&with_unknown_section).is_err());
    }

    #[test]
    fn exclusive_fields_enforced() {
        let both = BASE.replace("q_factor = 1e5", "q_factor = 1e5\ndamping_per_s = 10.0");
        let cfg = ScenarioConfig::from_toml(&both).unwrap();
        assert!(resolve(&cfg).is_err());

        let both_bath = BASE.replace("n_occ = 3.68", "n_occ = 3.68\ntemperature_k = 0.02");
        let cfg = ScenarioConfig::from_toml(&both_bath).unwrap();
        assert!(resolve(&cfg).is_err());
    }

    #[test]
    fn bad_engine_and_frame_rejected() {
        let cfg =
            ScenarioConfig::from_toml(&BASE.replace("master_equation", "quantum_leap")).unwrap();
        assert!(resolve(&cfg).is_err());
        let cfg =
            ScenarioConfig::from_toml(&BASE.replace("interaction_rwa", "heisenberg")).unwrap();
        assert!(resolve(&cfg).is_err());
    }

    #[test]
    fn drive_power_converts_to_beta() {
        let with_drive = format!("{BASE}\n[drive]\npower_w = 1e-18\n");
        let cfg = ScenarioConfig::from_toml(&with_drive).unwrap();
        let r = resolve(&cfg).unwrap();
        let expected = (1e-18 / (sideband::model::HBAR * 2.0 * PI * 5e9)).sqrt();
        assert!((r.model.drive.beta.re - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn patch_paths_work_and_unknown_fails() {
        let cfg = ScenarioConfig::from_toml(BASE).unwrap();
        let p = patch(&cfg, "coupling.g_per_s", 5e5).unwrap();
        assert_eq!(p.coupling.g_per_s, 5e5);
        let p = patch(&cfg, "target.q_factor", 1e4).unwrap();
        assert_eq!(p.target.q_factor, Some(1e4));
        assert!(patch(&cfg, "target.telepathy", 1.0).is_err());
    }

    #[test]
    fn under_truncation_noted() {
        let hot = BASE
            .replace("n_occ = 3.68", "n_occ = 20.0")
            .replace("truncation = 8", "truncation = 32");
        let cfg = ScenarioConfig::from_toml(&hot).unwrap();
        let r = resolve(&cfg).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("under-truncated")));
    }
}
