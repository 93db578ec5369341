use std::time::Instant;
use sideband::fock::thermal_product;
use sideband::lindblad::{propagate, PropagateOptions};
use sideband::model::{BathSpec, CouplingParams, DriveParams, ModeParams, SystemModel};
use std::f64::consts::PI;

fn main() {
    let omega = 2.0 * PI * 20e6;
    let target = ModeParams { angular_frequency: omega, damping_rate: omega / 5e5,
        bath: BathSpec::Occupation(3.68), truncation: 32 };
    let aux = ModeParams { angular_frequency: 2.0 * PI * 5e9, damping_rate: 1e6,
        bath: BathSpec::Occupation(0.0), truncation: 32 };
    let model = SystemModel::build(target, aux, CouplingParams::full(2e6), DriveParams::off()).unwrap();
    let (rho0, _, _) = thermal_product(&model.space, 3.68, 0.0).unwrap();
    println!("recommended dt = {:.3e}", model.recommended_dt());
    let n_steps = 200usize;
    let dt = 1.25e-9;
    let t0 = Instant::now();
    let r = propagate(&model, &rho0, &PropagateOptions::new(n_steps as f64 * dt, 3).with_dt(dt)).unwrap();
    let el = t0.elapsed().as_secs_f64();
    println!("{} steps (dt {:.2e}) in {:.2}s -> {:.1} ms/step; n_a(end) = {:.6}",
        n_steps, r.dt, el, el / n_steps as f64 * 1e3, r.n_target.last().unwrap());
}
