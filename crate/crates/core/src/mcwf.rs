//! Monte Carlo wave-function (quantum-jump) unraveling of the master
//! equation, with seeded, deterministic, embarrassingly parallel ensembles.
//!
//! Each trajectory propagates an unnormalized ket under the non-Hermitian
//! drift H_eff = H(t) − (i/2)ΣᵣL†L. A uniform threshold r is drawn per
//! deterministic segment; when the squared norm crosses r the jump time is
//! located by bisection, a channel k is selected by a single uniform draw
//! against the cumulative weights rate_k·‖L_k ψ‖² (ties resolved by channel
//! index), the state is replaced by L_k ψ / ‖L_k ψ‖, and a fresh threshold
//! is drawn. The jump channels are exactly the model's four thermal
//! dissipators.
//!
//! Determinism: trajectory i uses an independent ChaCha8 stream derived from
//! (seed, i), and the ensemble reduction accumulates in trajectory-index
//! order, so identical (seed, config, model) produce bit-identical results
//! regardless of the parallel schedule.
//!
//! Thermal initial conditions are unraveled as Fock-basis mixtures (the
//! thermal state is Fock-diagonal): each trajectory draws |n_a⟩|n_b⟩ from the
//! truncated geometric distribution of each mode.
//!
//! A diffusive (quantum-state-diffusion) integrator with a per-channel
//! Milstein correction is provided as a secondary cross-check engine; the
//! jump engine is the primary scheme.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, JointState};
use crate::model::SystemModel;
use crate::sparse::CsrMatrix;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Ensemble controls. Per-trajectory RNG streams are derived
/// deterministically from (seed, trajectory index).
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryConfig {
    pub n_trajectories: usize,
    pub seed: u64,
    /// Deterministic-segment step size; `None` derives one from the model.
    pub dt: Option<f64>,
    /// Observable sampling grid: `samples` uniform points on [0, t_final].
    pub t_final: f64,
    pub samples: usize,
}

/// Initial condition: a pure ket, or per-mode thermal occupations sampled
/// trajectory-by-trajectory as Fock mixtures.
#[derive(Debug, Clone)]
pub enum InitialCondition {
    Pure(JointState),
    Thermal { n_target: f64, n_aux: f64 },
}

/// Ensemble-averaged observables with their standard errors.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub n_target: Vec<f64>,
    pub n_target_sem: Vec<f64>,
    pub n_aux: Vec<f64>,
    pub n_aux_sem: Vec<f64>,
    pub mean_target: Vec<Complex64>,
    /// Quadrature SEM of Re⟨a⟩ and Im⟨a⟩.
    pub mean_target_sem: Vec<f64>,
    /// Per-trajectory jump counts, one entry per dissipator channel.
    pub jump_counts: Vec<[u32; 4]>,
    pub n_trajectories: usize,
}

impl EnsembleResult {
    pub fn total_jumps(&self) -> u64 {
        self.jump_counts
            .iter()
            .map(|t| t.iter().map(|&x| x as u64).sum::<u64>())
            .sum()
    }
}

/// Draw |n_target, n_aux⟩ from the truncated geometric distributions.
pub fn sample_initial(
    space: &FockSpace,
    n_occ_target: f64,
    n_occ_aux: f64,
    rng: &mut impl Rng,
) -> Result<JointState> {
    let na = sample_truncated_geometric(n_occ_target, space.dim_target(), rng)?;
    let nb = sample_truncated_geometric(n_occ_aux, space.dim_aux(), rng)?;
    Ok(JointState::fock(space, na, nb))
}

fn sample_truncated_geometric(n_occ: f64, dim: usize, rng: &mut impl Rng) -> Result<usize> {
    if !(n_occ >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "thermal occupation must be >= 0, got {n_occ}"
        )));
    }
    if n_occ == 0.0 {
        // still consume one draw so the stream layout is occupation-independent
        let _ = rng.gen::<f64>();
        return Ok(0);
    }
    let r = n_occ / (1.0 + n_occ);
    // renormalized CDF over the truncated basis
    let z = (1.0 - r.powi(dim as i32)) / (1.0 - r);
    let u = rng.gen::<f64>() * z;
    let mut acc = 0.0;
    let mut w = 1.0;
    for n in 0..dim {
        acc += w;
        if u < acc {
            return Ok(n);
        }
        w *= r;
    }
    Ok(dim - 1)
}

struct TrajectoryRecord {
    n_target: Vec<f64>,
    n_aux: Vec<f64>,
    mean_target: Vec<Complex64>,
    jumps: [u32; 4],
}

struct Engine<'m> {
    model: &'m SystemModel,
    loss: &'m [f64],
    a_csr: CsrMatrix,
    n_a_diag: Vec<f64>,
    n_b_diag: Vec<f64>,
    dim: usize,
}

impl<'m> Engine<'m> {
    fn new(model: &'m SystemModel) -> Self {
        let space = &model.space;
        let a = crate::fock::annihilation(space, crate::fock::Mode::Target);
        let n_a = crate::fock::number(space, crate::fock::Mode::Target);
        let n_b = crate::fock::number(space, crate::fock::Mode::Aux);
        Self {
            model,
            loss: model.loss_diag(),
            a_csr: CsrMatrix::from_dense(&a.matrix),
            n_a_diag: n_a.matrix.diagonal().iter().map(|x| x.re).collect(),
            n_b_diag: n_b.matrix.diagonal().iter().map(|x| x.re).collect(),
            dim: space.joint_dim(),
        }
    }

    /// y = −i H(t) x − ½ (Σ r L†L) x
    fn drift(&self, t: f64, x: &[Complex64], y: &mut [Complex64], h_buf: &mut [Complex64]) {
        for v in h_buf.iter_mut() {
            *v = c(0.0);
        }
        self.model.acc_h_vec(t, x, h_buf);
        let minus_i = Complex64::new(0.0, -1.0);
        for i in 0..self.dim {
            y[i] = minus_i * h_buf[i] - c(0.5 * self.loss[i]) * x[i];
        }
    }

    /// Single RK4 step of size tau from `x` at time `t` into `out`.
    fn rk4(&self, t: f64, tau: f64, x: &[Complex64], out: &mut [Complex64], w: &mut VecWork) {
        self.drift(t, x, &mut w.k1, &mut w.h);
        for i in 0..self.dim {
            w.stage[i] = x[i] + c(tau / 2.0) * w.k1[i];
        }
        let (stage, k2, h) = (&w.stage, &mut w.k2, &mut w.h);
        self.drift(t + tau / 2.0, stage, k2, h);
        for i in 0..self.dim {
            w.stage[i] = x[i] + c(tau / 2.0) * w.k2[i];
        }
        let (stage, k3, h) = (&w.stage, &mut w.k3, &mut w.h);
        self.drift(t + tau / 2.0, stage, k3, h);
        for i in 0..self.dim {
            w.stage[i] = x[i] + c(tau) * w.k3[i];
        }
        let (stage, k4, h) = (&w.stage, &mut w.k4, &mut w.h);
        self.drift(t + tau, stage, k4, h);
        for i in 0..self.dim {
            out[i] = x[i]
                + c(tau / 6.0) * (w.k1[i] + c(2.0) * w.k2[i] + c(2.0) * w.k3[i] + w.k4[i]);
        }
    }

    fn record(&self, psi: &[Complex64], rec: &mut TrajectoryRecord) {
        let n2: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        let inv = 1.0 / n2;
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..self.dim {
            let p = psi[i].norm_sqr();
            na += self.n_a_diag[i] * p;
            nb += self.n_b_diag[i] * p;
        }
        let mut a_psi = vec![c(0.0); self.dim];
        self.a_csr.acc_vec(c(1.0), psi, &mut a_psi);
        let mut mean_a = c(0.0);
        for i in 0..self.dim {
            mean_a += psi[i].conj() * a_psi[i];
        }
        rec.n_target.push(na * inv);
        rec.n_aux.push(nb * inv);
        rec.mean_target.push(mean_a * inv);
    }
}

struct VecWork {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    stage: Vec<Complex64>,
    h: Vec<Complex64>,
}

impl VecWork {
    fn new(dim: usize) -> Self {
        let z = vec![c(0.0); dim];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            stage: z.clone(),
            h: z,
        }
    }
}

fn norm2(psi: &[Complex64]) -> f64 {
    psi.iter().map(|x| x.norm_sqr()).sum()
}

fn normalize(psi: &mut [Complex64]) {
    let n = norm2(psi).sqrt();
    if n > 0.0 {
        let inv = c(1.0 / n);
        for x in psi.iter_mut() {
            *x *= inv;
        }
    }
}

fn initial_ket(
    model: &SystemModel,
    init: &InitialCondition,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    let dim = model.space.joint_dim();
    match init {
        InitialCondition::Pure(state) => {
            if state.dim() != dim {
                return Err(Error::Dimension {
                    context: "mcwf initial state",
                    expected: dim,
                    got: state.dim(),
                });
            }
            let mut v: Vec<Complex64> = state.amplitudes.iter().copied().collect();
            normalize(&mut v);
            Ok(v)
        }
        InitialCondition::Thermal { n_target, n_aux } => {
            let s = sample_initial(&model.space, *n_target, *n_aux, rng)?;
            Ok(s.amplitudes.iter().copied().collect())
        }
    }
}

fn jump_trajectory(
    engine: &Engine,
    init: &InitialCondition,
    cfg: &TrajectoryConfig,
    index: usize,
    grid: f64,
    substeps: usize,
    dt: f64,
) -> Result<TrajectoryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let dim = engine.dim;
    let mut psi = initial_ket(engine.model, init, &mut rng)?;
    let mut w = VecWork::new(dim);
    let mut next = vec![c(0.0); dim];
    let mut rec = TrajectoryRecord {
        n_target: Vec::with_capacity(cfg.samples),
        n_aux: Vec::with_capacity(cfg.samples),
        mean_target: Vec::with_capacity(cfg.samples),
        jumps: [0; 4],
    };
    engine.record(&psi, &mut rec);

    let mut threshold: f64 = rng.gen();
    let mut l_psi = vec![c(0.0); dim];

    for s in 1..cfg.samples {
        let t0 = (s - 1) as f64 * grid;
        let mut done = 0.0_f64;
        let mut k = 0usize;
        while k < substeps {
            let t = t0 + done;
            let step = dt - (done - k as f64 * dt); // remaining part of substep k
            engine.rk4(t, step, &psi, &mut next, &mut w);
            let n2 = norm2(&next);
            if n2 >= threshold {
                psi.copy_from_slice(&next);
                done = (k + 1) as f64 * dt;
                k += 1;
                continue;
            }
            if n2 < 1e-12 {
                return Err(Error::NormUnderflow { t, norm2: n2 });
            }
            // bisect the jump time within (0, step]
            let mut lo = 0.0_f64;
            let mut hi = step;
            for _ in 0..60 {
                if hi - lo <= 1e-9 * step {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                engine.rk4(t, mid, &psi, &mut next, &mut w);
                if norm2(&next) >= threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            engine.rk4(t, hi, &psi, &mut next, &mut w);
            psi.copy_from_slice(&next);

            // channel selection by cumulative weights rate_k ||L_k psi||^2
            let mut weights = [0.0_f64; 4];
            for (ch, d) in engine.model.dissipators().iter().enumerate() {
                if d.rate == 0.0 {
                    continue;
                }
                for v in l_psi.iter_mut() {
                    *v = c(0.0);
                }
                d.op.acc_vec(c(1.0), &psi, &mut l_psi);
                weights[ch] = d.rate * norm2(&l_psi);
            }
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(Error::Convergence(
                    "norm crossed the jump threshold but all channel weights vanish".into(),
                ));
            }
            let u: f64 = rng.gen::<f64>() * total;
            let mut chosen = 0usize;
            let mut acc = 0.0;
            for (ch, wgt) in weights.iter().enumerate() {
                acc += wgt;
                if u < acc {
                    chosen = ch;
                    break;
                }
                chosen = ch; // falls through to the last nonzero channel
            }
            let d = &engine.model.dissipators()[chosen];
            for v in l_psi.iter_mut() {
                *v = c(0.0);
            }
            d.op.acc_vec(c(1.0), &psi, &mut l_psi);
            psi.copy_from_slice(&l_psi);
            normalize(&mut psi);
            rec.jumps[chosen] += 1;
            threshold = rng.gen();
            done += hi;
            // k unchanged: finish the remainder of this substep
        }
        engine.record(&psi, &mut rec);
    }
    Ok(rec)
}

fn diffusive_trajectory(
    engine: &Engine,
    init: &InitialCondition,
    cfg: &TrajectoryConfig,
    index: usize,
    grid: f64,
    substeps: usize,
    dt: f64,
) -> Result<TrajectoryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let dim = engine.dim;
    let mut psi = initial_ket(engine.model, init, &mut rng)?;
    let mut rec = TrajectoryRecord {
        n_target: Vec::with_capacity(cfg.samples),
        n_aux: Vec::with_capacity(cfg.samples),
        mean_target: Vec::with_capacity(cfg.samples),
        jumps: [0; 4],
    };
    engine.record(&psi, &mut rec);

    let mut h_psi = vec![c(0.0); dim];
    let mut l_psi = vec![c(0.0); dim];
    let mut l2_psi = vec![c(0.0); dim];
    let mut incr = vec![c(0.0); dim];
    let sqrt_half_dt = (dt / 2.0).sqrt();

    for s in 1..cfg.samples {
        let t0 = (s - 1) as f64 * grid;
        for k in 0..substeps {
            let t = t0 + k as f64 * dt;
            // deterministic part: −iHψ dt − ½Σ r(L†L − 2⟨L†⟩L + |⟨L⟩|²)ψ dt
            for v in h_psi.iter_mut() {
                *v = c(0.0);
            }
            engine.model.acc_h_vec(t, &psi, &mut h_psi);
            for i in 0..dim {
                incr[i] = Complex64::new(0.0, -1.0) * h_psi[i]
                    - c(0.5 * engine.loss[i]) * psi[i];
            }
            for d in engine.model.dissipators() {
                if d.rate == 0.0 {
                    continue;
                }
                for v in l_psi.iter_mut() {
                    *v = c(0.0);
                }
                d.op.acc_vec(c(1.0), &psi, &mut l_psi);
                let mut mean_l = c(0.0);
                for i in 0..dim {
                    mean_l += psi[i].conj() * l_psi[i];
                }
                // noise dW and Milstein term ½ r (L−⟨L⟩)² ψ dW²
                let xi: f64 = rng.sample(StandardNormal);
                let eta: f64 = rng.sample(StandardNormal);
                let dw = Complex64::new(xi, eta) * sqrt_half_dt;
                let sr = c(d.rate.sqrt());
                // (L − ⟨L⟩)ψ
                for i in 0..dim {
                    l2_psi[i] = l_psi[i] - mean_l * psi[i];
                }
                for i in 0..dim {
                    incr[i] += c(d.rate) * (mean_l.conj() * l_psi[i]
                        - c(0.5) * mean_l.norm_sqr() * psi[i]);
                    incr[i] += sr * l2_psi[i] * dw / c(dt);
                }
                // Milstein: ½ r (L − ⟨L⟩)[(L − ⟨L⟩)ψ] dW²
                for v in l_psi.iter_mut() {
                    *v = c(0.0);
                }
                d.op.acc_vec(c(1.0), &l2_psi, &mut l_psi);
                let dw2 = dw * dw;
                for i in 0..dim {
                    incr[i] += c(0.5 * d.rate) * (l_psi[i] - mean_l * l2_psi[i]) * dw2 / c(dt);
                }
            }
            for i in 0..dim {
                psi[i] += incr[i] * c(dt);
            }
            normalize(&mut psi);
        }
        engine.record(&psi, &mut rec);
    }
    Ok(rec)
}

fn reduce(records: Vec<TrajectoryRecord>, times: Vec<f64>) -> EnsembleResult {
    let n = records.len();
    let samples = times.len();
    let mut sum_na = vec![0.0_f64; samples];
    let mut sq_na = vec![0.0_f64; samples];
    let mut sum_nb = vec![0.0_f64; samples];
    let mut sq_nb = vec![0.0_f64; samples];
    let mut sum_a = vec![c(0.0); samples];
    let mut sq_a_re = vec![0.0_f64; samples];
    let mut sq_a_im = vec![0.0_f64; samples];
    let mut jump_counts = Vec::with_capacity(n);
    // fixed trajectory-index order keeps the reduction bit-reproducible
    for rec in records.into_iter() {
        for k in 0..samples {
            sum_na[k] += rec.n_target[k];
            sq_na[k] += rec.n_target[k] * rec.n_target[k];
            sum_nb[k] += rec.n_aux[k];
            sq_nb[k] += rec.n_aux[k] * rec.n_aux[k];
            sum_a[k] += rec.mean_target[k];
            sq_a_re[k] += rec.mean_target[k].re * rec.mean_target[k].re;
            sq_a_im[k] += rec.mean_target[k].im * rec.mean_target[k].im;
        }
        jump_counts.push(rec.jumps);
    }
    let nf = n as f64;
    let sem = |sum: f64, sq: f64| -> f64 {
        if n < 2 {
            return 0.0;
        }
        let mean = sum / nf;
        let var = (sq / nf - mean * mean).max(0.0);
        (var / (nf - 1.0)).sqrt()
    };
    let mut result = EnsembleResult {
        times,
        n_target: Vec::with_capacity(samples),
        n_target_sem: Vec::with_capacity(samples),
        n_aux: Vec::with_capacity(samples),
        n_aux_sem: Vec::with_capacity(samples),
        mean_target: Vec::with_capacity(samples),
        mean_target_sem: Vec::with_capacity(samples),
        jump_counts,
        n_trajectories: n,
    };
    for k in 0..samples {
        result.n_target.push(sum_na[k] / nf);
        result.n_target_sem.push(sem(sum_na[k], sq_na[k]));
        result.n_aux.push(sum_nb[k] / nf);
        result.n_aux_sem.push(sem(sum_nb[k], sq_nb[k]));
        result.mean_target.push(sum_a[k] / c(nf));
        let s_re = sem(sum_a[k].re, sq_a_re[k]);
        let s_im = sem(sum_a[k].im, sq_a_im[k]);
        result.mean_target_sem.push((s_re * s_re + s_im * s_im).sqrt());
    }
    result
}

fn run_with<F>(model: &SystemModel, cfg: &TrajectoryConfig, trajectory: F) -> Result<EnsembleResult>
where
    F: Fn(&Engine, usize, f64, usize, f64) -> Result<TrajectoryRecord> + Sync,
{
    if cfg.n_trajectories < 1 {
        return Err(Error::InvalidParameter(
            "need at least one trajectory".into(),
        ));
    }
    if !(cfg.t_final > 0.0) || cfg.samples < 2 {
        return Err(Error::InvalidParameter(
            "trajectory runs need t_final > 0 and at least 2 samples".into(),
        ));
    }
    let grid = cfg.t_final / (cfg.samples - 1) as f64;
    let dt_req = cfg.dt.unwrap_or_else(|| model.recommended_dt());
    if !(dt_req > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {dt_req}"
        )));
    }
    let substeps = (grid / dt_req).ceil().max(1.0) as usize;
    let dt = grid / substeps as f64;
    let engine = Engine::new(model);

    let records: Result<Vec<TrajectoryRecord>> = (0..cfg.n_trajectories)
        .into_par_iter()
        .map(|i| trajectory(&engine, i, grid, substeps, dt))
        .collect();
    let times = (0..cfg.samples).map(|k| k as f64 * grid).collect();
    Ok(reduce(records?, times))
}

/// Run a jump-unraveling ensemble. Ensemble averages converge to the master
/// equation as the trajectory count grows.
pub fn run_ensemble(
    model: &SystemModel,
    init: &InitialCondition,
    cfg: &TrajectoryConfig,
) -> Result<EnsembleResult> {
    run_with(model, cfg, |engine, i, grid, substeps, dt| {
        jump_trajectory(engine, init, cfg, i, grid, substeps, dt)
    })
}

/// Run the diffusive (quantum-state-diffusion, Milstein-corrected)
/// cross-check engine on the same model and grid.
pub fn run_ensemble_diffusive(
    model: &SystemModel,
    init: &InitialCondition,
    cfg: &TrajectoryConfig,
) -> Result<EnsembleResult> {
    run_with(model, cfg, |engine, i, grid, substeps, dt| {
        diffusive_trajectory(engine, init, cfg, i, grid, substeps, dt)
    })
}

/// Convenience: convert a ket into the pure initial condition.
pub fn pure(state: JointState) -> InitialCondition {
    InitialCondition::Pure(state)
}

impl From<DVector<Complex64>> for JointState {
    fn from(v: DVector<Complex64>) -> Self {
        JointState::new(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockSpace, Mode};
    use crate::model::{BathSpec, CouplingParams, DriveParams, ModeParams, SystemModel};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn mode(freq: f64, damping: f64, n_occ: f64, truncation: usize) -> ModeParams {
        ModeParams {
            angular_frequency: freq,
            damping_rate: damping,
            bath: BathSpec::Occupation(n_occ),
            truncation,
        }
    }

    #[test]
    fn no_dynamics_means_constant_trajectories_with_zero_sem() {
        let target = mode(2.0 * PI * 20e6, 0.0, 0.0, 4);
        let aux = mode(2.0 * PI * 5e9, 0.0, 0.0, 3);
        let model =
            SystemModel::build(target, aux, CouplingParams::rwa(0.0), DriveParams::off()).unwrap();
        let init = pure(JointState::fock(&model.space, 2, 1));
        let cfg = TrajectoryConfig {
            n_trajectories: 16,
            seed: 5,
            dt: Some(1e-8),
            t_final: 1e-6,
            samples: 6,
        };
        let out = run_ensemble(&model, &init, &cfg).unwrap();
        for (n, sem) in out.n_target.iter().zip(&out.n_target_sem) {
            assert_relative_eq!(*n, 2.0, max_relative = 1e-12);
            assert_eq!(*sem, 0.0);
        }
        assert_eq!(out.total_jumps(), 0);
    }

    #[test]
    fn single_mode_decay_within_three_sem() {
        // zero-temperature decay from |1>: p1(t) = e^{−γt}
        let gamma = 1e5;
        let target = mode(2.0 * PI * 20e6, gamma, 0.0, 3);
        let aux = mode(2.0 * PI * 5e9, 0.0, 0.0, 2);
        let model =
            SystemModel::build(target, aux, CouplingParams::rwa(0.0), DriveParams::off()).unwrap();
        let init = pure(JointState::fock(&model.space, 1, 0));
        let cfg = TrajectoryConfig {
            n_trajectories: 4096,
            seed: 11,
            dt: Some(2e-7),
            t_final: 2.0 / gamma,
            samples: 9,
        };
        let out = run_ensemble(&model, &init, &cfg).unwrap();
        for k in 1..out.times.len() {
            let expected = (-gamma * out.times[k]).exp();
            let dev = (out.n_target[k] - expected).abs();
            assert!(
                dev <= 3.0 * out.n_target_sem[k],
                "t={}: mean {} vs {} (sem {})",
                out.times[k],
                out.n_target[k],
                expected,
                out.n_target_sem[k]
            );
            assert!(out.n_target_sem[k] > 0.0);
        }
    }

    #[test]
    fn sampling_matches_truncated_thermal_statistics() {
        let space = FockSpace::new(32, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n_draws = 100_000;
        let mut sum = 0.0;
        for _ in 0..n_draws {
            let s = sample_initial(&space, 3.68, 0.0, &mut rng).unwrap();
            // recover n_target from the basis index
            let idx = s
                .amplitudes
                .iter()
                .position(|x| x.norm_sqr() > 0.5)
                .unwrap();
            sum += space.occupations(idx).0 as f64;
        }
        let mean = sum / n_draws as f64;
        let expected = crate::fock::thermal_state(&space, Mode::Target, 3.68)
            .unwrap()
            .truncated_occupation;
        // 3 sigma of the sample mean, std ≈ sqrt(n(n+1))
        let sigma = (3.68_f64 * 4.68).sqrt() / (n_draws as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * sigma,
            "sample mean {mean} vs {expected} (3σ = {})",
            3.0 * sigma
        );
    }

    #[test]
    fn zero_occupation_always_ground_state() {
        let space = FockSpace::new(8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let s = sample_initial(&space, 0.0, 0.0, &mut rng).unwrap();
            assert_eq!(s.amplitudes[0], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn negligible_aux_occupation_rarely_excited() {
        // n_occ(5 GHz, 20 mK) = 6.16e-6: P(n_b > 0) < 1e-4
        let space = FockSpace::new(4, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n_draws = 100_000;
        let mut excited = 0usize;
        for _ in 0..n_draws {
            let s = sample_initial(&space, 0.0, 6.155888e-6, &mut rng).unwrap();
            let idx = s
                .amplitudes
                .iter()
                .position(|x| x.norm_sqr() > 0.5)
                .unwrap();
            if space.occupations(idx).1 > 0 {
                excited += 1;
            }
        }
        assert!(excited <= 3, "{excited} excited draws out of {n_draws}");
    }

    #[test]
    fn identical_seed_is_bit_identical_across_thread_counts() {
        let gamma = 1e5;
        let target = mode(2.0 * PI * 20e6, gamma, 0.6, 6);
        let aux = mode(2.0 * PI * 5e9, 5e5, 0.0, 4);
        let model =
            SystemModel::build(target, aux, CouplingParams::rwa(3e5), DriveParams::off()).unwrap();
        let init = InitialCondition::Thermal {
            n_target: 0.6,
            n_aux: 0.0,
        };
        let cfg = TrajectoryConfig {
            n_trajectories: 64,
            seed: 42,
            dt: Some(5e-8),
            t_final: 4e-6,
            samples: 9,
        };
        let run_in_pool = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_ensemble(&model, &init, &cfg).unwrap())
        };
        let r1 = run_in_pool(1);
        let r4 = run_in_pool(4);
        assert_eq!(r1.n_target, r4.n_target);
        assert_eq!(r1.n_target_sem, r4.n_target_sem);
        assert_eq!(r1.mean_target, r4.mean_target);
        assert_eq!(r1.jump_counts, r4.jump_counts);
    }

    #[test]
    fn equilibrium_jump_rate_matches_channel_rates() {
        // single thermal mode at equilibrium: total jump rate per trajectory
        // = γ(n_T+1)⟨a†a⟩ + γ n_T ⟨aa†⟩ with ⟨a†a⟩ = n_T (truncated)
        let gamma = 1e5;
        let n_t = 0.8;
        let target = mode(2.0 * PI * 20e6, gamma, n_t, 16);
        let aux = mode(2.0 * PI * 5e9, 0.0, 0.0, 2);
        let model =
            SystemModel::build(target, aux, CouplingParams::rwa(0.0), DriveParams::off()).unwrap();
        let init = InitialCondition::Thermal {
            n_target: n_t,
            n_aux: 0.0,
        };
        let t_final = 20.0 / gamma;
        let cfg = TrajectoryConfig {
            n_trajectories: 2048,
            seed: 3,
            dt: Some(2e-7),
            t_final,
            samples: 11,
        };
        let out = run_ensemble(&model, &init, &cfg).unwrap();
        let n_trunc = crate::fock::thermal_state(&model.space, Mode::Target, n_t)
            .unwrap()
            .truncated_occupation;
        let expected_rate = gamma * (n_t + 1.0) * n_trunc + gamma * n_t * (n_trunc + 1.0);
        let measured_rate =
            out.total_jumps() as f64 / (cfg.n_trajectories as f64 * t_final);
        let rel = (measured_rate - expected_rate).abs() / expected_rate;
        assert!(
            rel < 0.05,
            "jump rate {measured_rate} vs {expected_rate} (rel {rel})"
        );
    }

    #[test]
    fn norm_underflow_is_reported_for_absurd_steps() {
        let gamma = 1e9; // extreme rate with a huge step
        let target = mode(2.0 * PI * 20e6, gamma, 0.0, 8);
        let aux = mode(2.0 * PI * 5e9, 0.0, 0.0, 2);
        let model =
            SystemModel::build(target, aux, CouplingParams::rwa(0.0), DriveParams::off()).unwrap();
        let init = pure(JointState::fock(&model.space, 7, 0));
        let cfg = TrajectoryConfig {
            n_trajectories: 1,
            seed: 1,
            dt: Some(5e-8),
            t_final: 1e-5,
            samples: 3,
        };
        // either an underflow error or (rarely) a successful cascade of
        // jumps; the run must never report a non-finite observable
        match run_ensemble(&model, &init, &cfg) {
            Err(Error::NormUnderflow { .. }) => {}
            Ok(out) => assert!(out.n_target.iter().all(|x| x.is_finite())),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn diffusive_engine_agrees_with_analytic_decay() {
        let gamma = 1e5;
        let target = mode(2.0 * PI * 20e6, gamma, 0.0, 3);
        let aux = mode(2.0 * PI * 5e9, 0.0, 0.0, 2);
        let model =
            SystemModel::build(target, aux, CouplingParams::rwa(0.0), DriveParams::off()).unwrap();
        let init = pure(JointState::fock(&model.space, 1, 0));
        let cfg = TrajectoryConfig {
            n_trajectories: 1024,
            seed: 21,
            dt: Some(2e-8),
            t_final: 1.0 / gamma,
            samples: 5,
        };
        let out = run_ensemble_diffusive(&model, &init, &cfg).unwrap();
        for k in 1..out.times.len() {
            let expected = (-gamma * out.times[k]).exp();
            let dev = (out.n_target[k] - expected).abs();
            let tol = 3.0 * out.n_target_sem[k] + 0.01 * expected;
            assert!(
                dev <= tol,
                "t={}: {} vs {} (sem {})",
                out.times[k],
                out.n_target[k],
                expected,
                out.n_target_sem[k]
            );
        }
    }
}
