//! The experiment commands: cool, swap, control, validate-frames, sweep.

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use std::path::Path;

use sideband::fock::{annihilation, expectation, number, thermal_product, Mode};
use sideband::langevin::{
    coherent_amplitude, decay_constants, first_minimum, occupation_formula, propagate_moments,
    steady_covariance, LinearModel, MomentModel,
};
use sideband::lindblad::{propagate, steady_state, steady_state_seeded, PropagateOptions,
    SteadyStateMethod};
use sideband::mcwf::{run_ensemble, InitialCondition, TrajectoryConfig};
use sideband::model::{estimate_cooling, CouplingParams, DriveParams, Frame, SystemModel};

use crate::config::{patch, resolve, Engine, ResolvedScenario, ScenarioConfig};
use crate::output::{
    write_series_csv, write_summary, write_table_csv, RunReport, Series,
};

/// An engine run: the uniform observable series plus, for the
/// master-equation engine, the final density operator.
pub struct EngineRun {
    pub series: Series,
    pub final_state: Option<sideband::fock::DensityOperator>,
}

/// Run the configured engine and return the uniform observable series.
pub fn run_series(r: &ResolvedScenario) -> Result<EngineRun> {
    match r.engine {
        Engine::MasterEquation => {
            let (rho0, _, _) = thermal_product(&r.model.space, r.initial_occ.0, r.initial_occ.1)
                .map_err(|e| anyhow!("{e}"))?;
            let mut opts = PropagateOptions::new(r.t_final, r.samples);
            if let Some(dt) = r.dt {
                opts = opts.with_dt(dt);
            }
            let p = propagate(&r.model, &rho0, &opts).map_err(|e| anyhow!("{e}"))?;
            Ok(EngineRun {
                series: Series {
                    times: p.times,
                    n_target: p.n_target,
                    n_aux: p.n_aux,
                    mean_target: p.mean_target,
                    trace: p.trace,
                    sem_n_target: None,
                },
                final_state: Some(p.final_state),
            })
        }
        Engine::Trajectories => {
            let cfg = TrajectoryConfig {
                n_trajectories: r.trajectories,
                seed: r.seed,
                dt: r.dt,
                t_final: r.t_final,
                samples: r.samples,
            };
            let init = InitialCondition::Thermal {
                n_target: r.initial_occ.0,
                n_aux: r.initial_occ.1,
            };
            let e = run_ensemble(&r.model, &init, &cfg).map_err(|e| anyhow!("{e}"))?;
            let trace = vec![1.0; e.times.len()];
            Ok(EngineRun {
                series: Series {
                    times: e.times,
                    n_target: e.n_target,
                    n_aux: e.n_aux,
                    mean_target: e.mean_target,
                    trace,
                    sem_n_target: Some(e.n_target_sem),
                },
                final_state: None,
            })
        }
        Engine::Langevin => {
            let two_omega = match r.model.coupling.frame {
                Frame::InteractionRwa => None,
                Frame::InteractionFull => Some(2.0 * r.model.target.angular_frequency),
                Frame::LabModulated => bail!(
                    "the langevin engine works in the interaction frames; use master_equation for lab_modulated"
                ),
            };
            let m = MomentModel {
                gamma: r.model.target.damping_rate,
                kappa: r.model.aux.damping_rate,
                g: r.model.coupling.g,
                n_t_target: r.model.n_t_target(),
                n_t_aux: r.model.n_t_aux(),
                beta: r.model.drive.beta,
                two_omega,
                initial: r.initial_occ,
            };
            let s = propagate_moments(&m, r.t_final, r.samples).map_err(|e| anyhow!("{e}"))?;
            let trace = vec![1.0; s.times.len()];
            Ok(EngineRun {
                series: Series {
                    times: s.times,
                    n_target: s.n_target,
                    n_aux: s.n_aux,
                    mean_target: s.mean_target,
                    trace,
                    sem_n_target: None,
                },
                final_state: None,
            })
        }
    }
}

/// Mean of the final 5% of the series after a stationarity check; the check
/// compares against the preceding equal window and fails on drift.
pub fn plateau(series: &Series) -> Result<(f64, f64)> {
    let n = series.len();
    let w = (n / 20).max(2);
    if n < 2 * w {
        bail!("series too short for a plateau estimate");
    }
    let mean = |lo: usize, hi: usize| -> f64 {
        series.n_target[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
    };
    let m2 = mean(n - w, n);
    let m1 = mean(n - 2 * w, n - w);
    let drift = (m2 - m1).abs() / m2.abs().max(1e-30);
    // allow the statistical band when the series carries one
    let band = series
        .sem_n_target
        .as_ref()
        .map(|s| 4.0 * s[n - 1] / m2.abs().max(1e-30))
        .unwrap_or(0.0);
    if drift > 0.02 + band {
        bail!(
            "run has not reached a steady plateau: last-window drift {:.3e} (mean {:.6e})",
            drift,
            m2
        );
    }
    Ok((m2, drift))
}

fn truncated_initial(r: &ResolvedScenario) -> f64 {
    sideband::fock::thermal_state(&r.model.space, Mode::Target, r.initial_occ.0)
        .map(|t| t.truncated_occupation)
        .unwrap_or(r.initial_occ.0)
}

fn new_report(command: &str, r: &ResolvedScenario, out_dir: &Path) -> RunReport {
    RunReport {
        command: command.into(),
        engine: r.engine.label().into(),
        resolved: r.echo.clone(),
        metrics: Vec::new(),
        notes: r.notes.clone(),
        csv_paths: Vec::new(),
        summary_path: out_dir.join("summary.txt"),
    }
}

fn gamma_kappa_g(model: &SystemModel) -> (f64, f64, f64) {
    (
        model.target.damping_rate,
        model.aux.damping_rate,
        model.coupling.g,
    )
}

/// Cooling run: propagate to the steady regime, report the steady occupation
/// against the simple γ/(γ+κ) estimate.
pub fn cmd_cool(config: &ScenarioConfig, out_dir: &Path) -> Result<RunReport> {
    let r = resolve(config)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let mut report = new_report("cool", &r, out_dir);
    let run = run_series(&r)?;
    let series = run.series;

    let (plateau_n, drift) = plateau(&series)?;
    report.push("plateau_n_target", plateau_n, "n_target");
    report.push("plateau_drift_rel", drift, "n_target");

    // engine-specific steady refinement
    let steady_n = match r.engine {
        Engine::MasterEquation if !r.model.is_time_dependent() => {
            // the propagation already ended near stationarity; seed from it
            let ss = steady_state_seeded(&r.model, run.final_state.as_ref())
                .map_err(|e| anyhow!("{e}"))?;
            report.push("steady_residual", ss.residual, "n_target");
            if ss.method == SteadyStateMethod::DirectNullSpace {
                report
                    .notes
                    .push("steady state from the direct null-space solve".into());
            } else {
                report
                    .notes
                    .push("steady state from long-time integration".into());
            }
            let n_a = number(&r.model.space, Mode::Target);
            expectation(&ss.state, &n_a).map_err(|e| anyhow!("{e}"))?.re
        }
        Engine::Langevin if r.model.coupling.frame == Frame::InteractionRwa => {
            let (gamma, kappa, g) = gamma_kappa_g(&r.model);
            steady_covariance(&LinearModel {
                gamma,
                kappa,
                g,
                beta: r.model.drive.beta,
                n_t_target: r.model.n_t_target(),
            })
            .map_err(|e| anyhow!("{e}"))?
            .n_target
        }
        _ => plateau_n,
    };
    report.push("steady_n_target", steady_n, "n_target");

    let (gamma, kappa, g) = gamma_kappa_g(&r.model);
    let est = estimate_cooling(gamma, if g == 0.0 { 0.0 } else { kappa }, r.model.n_t_target());
    report.push("estimate_n_target", est, "n_target");
    if est > 0.0 {
        report.push("steady_over_estimate", steady_n / est, "n_target");
    }
    let n0 = truncated_initial(&r);
    report.push("initial_n_target_truncated", n0, "n_target");
    if steady_n > 0.0 {
        report.push("cooling_factor", n0 / steady_n, "n_target");
    }
    // closed-form occupation in terms of the decay constants, informational
    let of = occupation_formula(gamma, kappa, g, r.model.n_t_target());
    report.push("occupation_formula_n_target", of.value, "n_target");
    if of.complex_regime {
        report.notes.push(
            "decay constants are complex (g > kappa/4); occupation formula evaluated as the real part of the conjugate pair".into(),
        );
    }

    let csv = out_dir.join("series.csv");
    write_series_csv(&csv, &series)?;
    report.csv_paths.push(csv);
    write_summary(&report)?;
    Ok(report)
}

/// Swap run: propagate through the first minimum of the target occupation.
pub fn cmd_swap(config: &ScenarioConfig, out_dir: &Path) -> Result<RunReport> {
    let r = resolve(config)?;
    std::fs::create_dir_all(out_dir)?;
    let mut report = new_report("swap", &r, out_dir);
    let series = run_series(&r)?.series;

    let (t_min, n_min) = first_minimum(&series.times, &series.n_target)
        .ok_or_else(|| anyhow!("no minimum of n_target found within t_final; extend the run"))?;
    let g = r.model.coupling.g;
    report.push("swap_time_s", t_min, "t_s");
    if g > 0.0 {
        report.push(
            "swap_time_over_pi_2g",
            t_min / (std::f64::consts::PI / (2.0 * g)),
            "t_s",
        );
    }
    report.push("swap_min_n_target", n_min, "n_target");
    let n0 = truncated_initial(&r);
    report.push("initial_n_target_truncated", n0, "n_target");
    if n_min > 0.0 {
        report.push("cooling_factor_swap", n0 / n_min, "n_target");
    }

    let csv = out_dir.join("series.csv");
    write_series_csv(&csv, &series)?;
    report.csv_paths.push(csv);
    write_summary(&report)?;
    Ok(report)
}

/// Coherent-control run: steady displaced state under the drive.
pub fn cmd_control(config: &ScenarioConfig, out_dir: &Path) -> Result<RunReport> {
    let r = resolve(config)?;
    if config.drive.is_none() {
        bail!("control requires a [drive] section");
    }
    if r.engine == Engine::Trajectories {
        bail!("control works with the master_equation or langevin engines");
    }
    if r.model.coupling.frame != Frame::InteractionRwa {
        bail!("control assumes the time-independent (interaction_rwa) frame");
    }
    std::fs::create_dir_all(out_dir)?;
    let mut report = new_report("control", &r, out_dir);
    let series = run_series(&r)?.series;

    let (gamma, kappa, g) = gamma_kappa_g(&r.model);
    let beta = r.model.drive.beta;

    // steady displaced state and its thermal (undriven) baseline
    let (mean_a, n_driven, n_thermal) = match r.engine {
        Engine::MasterEquation => {
            let ss = steady_state(&r.model).map_err(|e| anyhow!("{e}"))?;
            let a_op = annihilation(&r.model.space, Mode::Target);
            let n_op = number(&r.model.space, Mode::Target);
            let mean_a = expectation(&ss.state, &a_op).map_err(|e| anyhow!("{e}"))?;
            let n_driven = expectation(&ss.state, &n_op).map_err(|e| anyhow!("{e}"))?.re;
            let undriven = SystemModel::build(
                r.model.target,
                r.model.aux,
                CouplingParams::rwa(g),
                DriveParams::off(),
            )
            .map_err(|e| anyhow!("{e}"))?;
            let ss0 = steady_state(&undriven).map_err(|e| anyhow!("{e}"))?;
            let n_thermal = expectation(&ss0.state, &n_op).map_err(|e| anyhow!("{e}"))?.re;
            (mean_a, n_driven, n_thermal)
        }
        _ => {
            let lm = LinearModel {
                gamma,
                kappa,
                g,
                beta,
                n_t_target: r.model.n_t_target(),
            };
            let s = steady_covariance(&lm).map_err(|e| anyhow!("{e}"))?;
            (s.mean_target, s.n_target, s.n_target_thermal)
        }
    };

    report.push("mean_a_re", mean_a.re, "re_a");
    report.push("mean_a_im", mean_a.im, "im_a");
    let amp = coherent_amplitude(beta, gamma, kappa, g);
    report.push("closed_form_re", amp.closed_form.re, "re_a");
    report.push("closed_form_im", amp.closed_form.im, "im_a");
    report.push("exact_solve_re", amp.exact.re, "re_a");
    report.push("exact_solve_im", amp.exact.im, "im_a");
    if amp.exact.norm() > 0.0 {
        report.push(
            "mean_a_vs_exact_rel_dev",
            (mean_a - amp.exact).norm() / amp.exact.norm(),
            "re_a",
        );
        report.push(
            "closed_form_vs_exact_rel_dev",
            (amp.closed_form - amp.exact).norm() / amp.exact.norm(),
            "re_a",
        );
    }
    if amp.near_singularity {
        report
            .notes
            .push("closed-form amplitude is near its kappa^2 = 9 g^2 pole; prefer the exact solve".into());
    }
    report.push("n_target_ss", n_driven, "n_target");
    report.push("n_target_thermal_ss", n_thermal, "n_target");
    report.push("displacement_sq", mean_a.norm_sqr(), "re_a");
    if n_driven > 0.0 {
        report.push(
            "decomposition_rel_residual",
            (n_driven - (mean_a.norm_sqr() + n_thermal)).abs() / n_driven,
            "n_target",
        );
    }
    let dc = decay_constants(gamma, kappa, g);
    report.push("lambda_plus_re", dc.lambda_plus.re, "t_s");
    report.push("lambda_minus_re", dc.lambda_minus.re, "t_s");

    let csv = out_dir.join("series.csv");
    write_series_csv(&csv, &series)?;
    report.csv_paths.push(csv);
    write_summary(&report)?;
    Ok(report)
}

/// Frame validation: lab-frame modulated coupling against the interaction
/// picture on the same grid; reports the worst-case occupation deviation.
pub fn cmd_validate_frames(config: &ScenarioConfig, out_dir: &Path) -> Result<RunReport> {
    let mut lab_cfg = config.clone();
    lab_cfg.coupling.frame = "lab_modulated".into();
    let mut int_cfg = config.clone();
    int_cfg.coupling.frame = "interaction_full".into();
    int_cfg.run.dt_s = None; // interaction step control from the 2ω phase

    let r_lab = resolve(&lab_cfg)?;
    if r_lab.engine != Engine::MasterEquation {
        bail!("validate-frames runs on the master_equation engine");
    }
    let ratio = r_lab.model.aux.angular_frequency / r_lab.model.target.angular_frequency;
    if ratio > 40.0 {
        bail!(
            "aux/target frequency ratio {ratio:.1} is too stiff for the lab-frame integrator; scale the model down (e.g. Omega = 10 omega)"
        );
    }
    let r_int = resolve(&int_cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let mut report = new_report("validate-frames", &r_lab, out_dir);

    let lab = run_series(&r_lab)?.series;
    let int = run_series(&r_int)?.series;
    let max_dev = lab
        .n_target
        .iter()
        .zip(&int.n_target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let n0 = truncated_initial(&r_lab).max(1e-30);
    report.push("max_abs_deviation_n_target", max_dev, "n_target");
    report.push("max_deviation_over_n0", max_dev / n0, "n_target");
    report.push("initial_n_target_truncated", n0, "n_target");

    let lab_csv = out_dir.join("series_lab.csv");
    write_series_csv(&lab_csv, &lab)?;
    let int_csv = out_dir.join("series_interaction.csv");
    write_series_csv(&int_csv, &int)?;
    report.csv_paths.push(lab_csv);
    report.csv_paths.push(int_csv);
    write_summary(&report)?;
    Ok(report)
}

const SWEEP_BUDGET: usize = 256;

/// Parameter sweep: one cooling run per grid point, deterministic row order.
pub fn cmd_sweep(config: &ScenarioConfig, out_dir: &Path) -> Result<RunReport> {
    let sweep = config
        .sweep
        .clone()
        .ok_or_else(|| anyhow!("sweep requires a [sweep] section"))?;
    let outer = sweep.values.clone();
    let inner = match (&sweep.parameter2, &sweep.values2) {
        (Some(_), Some(v)) => v.clone(),
        (None, None) => vec![f64::NAN], // sentinel: no second axis
        _ => bail!("sweep parameter2 and values2 must be given together"),
    };
    if outer.is_empty() || inner.is_empty() {
        bail!("sweep value lists must be non-empty");
    }
    let total = outer.len() * inner.len();
    if total > SWEEP_BUDGET {
        bail!("sweep grid of {total} points exceeds the budget of {SWEEP_BUDGET}");
    }

    let mut points = Vec::new();
    for &v1 in &outer {
        for &v2 in &inner {
            points.push((v1, v2));
        }
    }
    let has_second = sweep.parameter2.is_some();

    let rows: Result<Vec<Vec<f64>>> = points
        .par_iter()
        .map(|&(v1, v2)| -> Result<Vec<f64>> {
            let mut cfg = patch(config, &sweep.parameter, v1)?;
            if has_second {
                cfg = patch(&cfg, sweep.parameter2.as_ref().unwrap(), v2)?;
            }
            cfg.sweep = None;
            let r = resolve(&cfg)?;
            let series = run_series(&r)?.series;
            let (plat, _) = plateau(&series)?;
            let (gamma, kappa, g) = gamma_kappa_g(&r.model);
            let est =
                estimate_cooling(gamma, if g == 0.0 { 0.0 } else { kappa }, r.model.n_t_target());
            let ratio = if est > 0.0 { plat / est } else { 1.0 };
            let n0 = truncated_initial(&r);
            let factor = if plat > 0.0 { n0 / plat } else { f64::NAN };
            let mut row = vec![v1];
            if has_second {
                row.push(v2);
            }
            row.extend_from_slice(&[plat, est, ratio, factor]);
            Ok(row)
        })
        .collect();
    let rows = rows?;

    std::fs::create_dir_all(out_dir)?;
    let r0 = resolve(config)?;
    let mut report = new_report("sweep", &r0, out_dir);
    let mut header = vec![sweep.parameter.clone()];
    if let Some(p2) = &sweep.parameter2 {
        header.push(p2.clone());
    }
    header.extend(
        ["plateau_n_target", "estimate_n_target", "plateau_over_estimate", "cooling_factor"]
            .into_iter()
            .map(String::from),
    );
    let csv = out_dir.join("sweep.csv");
    write_table_csv(&csv, &header, &rows)?;
    report.push("grid_points", rows.len() as f64, "sweep.csv");
    report.csv_paths.push(csv);
    write_summary(&report)?;
    Ok(report)
}
