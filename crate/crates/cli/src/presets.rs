//! Built-in parameter sets for the standard experiments: a 20 MHz target
//! (g = ω/(20π) = 2 s⁻¹·10⁶, κ = g/2) cooled through a 5 GHz aux at 20 mK,
//! quality factors 10⁴ / 10⁵ / 5·10⁵, initial occupations 3.68 and 20,
//! truncation 32, 4096 trajectories.

use crate::config::ScenarioConfig;

fn fig1a(q: &str, frame: &str, g: f64, kappa: f64) -> String {
    format!(
        r#"
[target]
frequency_hz = 20e6
q_factor = {q}
n_occ = 3.68
truncation = 32

[aux]
frequency_hz = 5e9
damping_per_s = {kappa}
temperature_k = 0.02
truncation = 32

[coupling]
g_per_s = {g}
frame = "{frame}"

[run]
engine = "master_equation"
t_final_s = 3.0e-5
samples = 601
seed = 1
{dt}"#,
        dt = if frame == "interaction_full" {
            "dt_s = 1.25e-9\n"
        } else {
            ""
        }
    )
}

fn swap(n_occ: f64) -> String {
    format!(
        r#"
[target]
frequency_hz = 20e6
q_factor = 1e5
n_occ = {n_occ}
truncation = 32

[aux]
frequency_hz = 5e9
damping_per_s = 1e6
temperature_k = 0.02
truncation = 32

[coupling]
g_per_s = 2e6
frame = "interaction_full"

[run]
engine = "master_equation"
t_final_s = 1.5707963267948966e-6
samples = 315
dt_s = 1.25e-9
seed = 1
"#
    )
}

const CONTROL: &str = r#"
[target]
frequency_hz = 20e6
q_factor = 1e5
n_occ = 3.68
truncation = 16

[aux]
frequency_hz = 5e9
damping_per_s = 1e6
temperature_k = 0.02
truncation = 8

[coupling]
g_per_s = 2e5
frame = "interaction_rwa"

[drive]
beta_re = 20.0

[run]
engine = "master_equation"
t_final_s = 4.0e-5
samples = 201
seed = 1
"#;

const FRAME_VALIDATION: &str = r#"
[target]
frequency_hz = 20e6
q_factor = 1e5
n_occ = 0.5
truncation = 6

[aux]
frequency_hz = 200e6
damping_per_s = 5e5
n_occ = 0.0
truncation = 6

[coupling]
g_per_s = 1e6
frame = "lab_modulated"

[run]
engine = "master_equation"
t_final_s = 3.141592653589793e-6
samples = 201
seed = 1
"#;

const MCWF_VALIDATION: &str = r#"
[target]
frequency_hz = 20e6
q_factor = 1e5
n_occ = 3.68
truncation = 16

[aux]
frequency_hz = 5e9
damping_per_s = 1e6
temperature_k = 0.02
truncation = 16

[coupling]
g_per_s = 2e6
frame = "interaction_rwa"

[run]
engine = "trajectories"
t_final_s = 1.6e-6
samples = 33
dt_s = 2.0e-8
trajectories = 4096
seed = 1
"#;

const SWEEP_Q: &str = r#"
[target]
frequency_hz = 20e6
q_factor = 1e5
n_occ = 3.68
truncation = 32

[aux]
frequency_hz = 5e9
damping_per_s = 1e6
temperature_k = 0.02
truncation = 32

[coupling]
g_per_s = 2e6
frame = "interaction_rwa"

[run]
engine = "master_equation"
t_final_s = 3.0e-5
samples = 601
seed = 1

[sweep]
parameter = "target.q_factor"
values = [1e4, 1e5, 5e5]
"#;

pub fn preset_names() -> &'static [&'static str] {
    &[
        "fig1a-q1e4",
        "fig1a-q1e4-rwa",
        "fig1a-q1e5",
        "fig1a-q1e5-rwa",
        "fig1a-q5e5",
        "fig1a-q5e5-rwa",
        "fig1a-q5e5-40pi",
        "fig1a-q5e5-40pi-rwa",
        "fig1b-swap",
        "fig1b-swap-hot",
        "control",
        "frame-validation",
        "mcwf-validation",
        "sweep-q",
    ]
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let text = match name {
        "fig1a-q1e4" => fig1a("1e4", "interaction_full", 2e6, 1e6),
        "fig1a-q1e4-rwa" => fig1a("1e4", "interaction_rwa", 2e6, 1e6),
        "fig1a-q1e5" => fig1a("1e5", "interaction_full", 2e6, 1e6),
        "fig1a-q1e5-rwa" => fig1a("1e5", "interaction_rwa", 2e6, 1e6),
        "fig1a-q5e5" => fig1a("5e5", "interaction_full", 2e6, 1e6),
        "fig1a-q5e5-rwa" => fig1a("5e5", "interaction_rwa", 2e6, 1e6),
        "fig1a-q5e5-40pi" => fig1a("5e5", "interaction_full", 1e6, 5e5),
        "fig1a-q5e5-40pi-rwa" => fig1a("5e5", "interaction_rwa", 1e6, 5e5),
        "fig1b-swap" => swap(3.68),
        "fig1b-swap-hot" => swap(20.0),
        "control" => CONTROL.to_string(),
        "frame-validation" => FRAME_VALIDATION.to_string(),
        "mcwf-validation" => MCWF_VALIDATION.to_string(),
        "sweep-q" => SWEEP_Q.to_string(),
        _ => return None,
    };
    Some(ScenarioConfig::from_toml(&text).expect("preset TOML must parse"))
}
