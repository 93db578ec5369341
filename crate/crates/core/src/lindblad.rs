//! Deterministic propagation of the density operator and steady states.
//!
//! The equation of motion is the quantum-optical master equation with the
//! coherent term added,
//!
//! ```text
//!   dρ/dt = −i[H(t), ρ] + Σ_k r_k (L_k ρ L_k† − ½{L_k†L_k, ρ}),
//! ```
//!
//! integrated with fixed-step classic RK4. Every stage of RK4 applies the
//! generator itself, whose output is exactly traceless, so the trace is
//! preserved to round-off; a drift beyond 1e-6 aborts with a diagnostic
//! since it can only come from an unstable step size.
//!
//! Steady states are found by a direct null-space solve of the vectorized
//! Liouvillian when the joint dimension is at most [`DIRECT_SOLVE_MAX_DIM`],
//! and by long-time integration with a stationarity criterion otherwise.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{number, DensityOperator, Mode, ModeOperator};
use crate::model::SystemModel;

/// Largest joint dimension for which the dense vectorized Liouvillian
/// (dim² × dim²) is solved directly.
pub const DIRECT_SOLVE_MAX_DIM: usize = 40;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Observable time series produced by [`propagate`].
#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub times: Vec<f64>,
    pub n_target: Vec<f64>,
    pub n_aux: Vec<f64>,
    pub mean_target: Vec<Complex64>,
    pub mean_aux: Vec<Complex64>,
    pub trace: Vec<f64>,
    pub final_state: DensityOperator,
    /// Step size actually used.
    pub dt: f64,
}

/// Step-size and sampling controls for [`propagate`].
#[derive(Debug, Clone, Copy)]
pub struct PropagateOptions {
    pub t_final: f64,
    /// Number of grid points (including t = 0) at which observables are
    /// recorded; the step size is an exact divisor of the grid spacing.
    pub samples: usize,
    /// Explicit step size; `None` derives one from the model's fastest
    /// scale (stability bound + ≥20 samples per rotating-phase period).
    pub dt: Option<f64>,
}

impl PropagateOptions {
    pub fn new(t_final: f64, samples: usize) -> Self {
        Self {
            t_final,
            samples,
            dt: None,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }
}

struct Workspace {
    k1: DMatrix<Complex64>,
    k2: DMatrix<Complex64>,
    k3: DMatrix<Complex64>,
    k4: DMatrix<Complex64>,
    stage: DMatrix<Complex64>,
    tmp: DMatrix<Complex64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        let z = DMatrix::zeros(dim, dim);
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            stage: z.clone(),
            tmp: z,
        }
    }
}

/// out = L(ρ) at time t, computed in one fused column-parallel pass.
///
/// For output column j the generator needs ρ[:, j], the handful of columns
/// selected by row j of each Hamiltonian term (for the ρH side), and one
/// column per jump channel (their ladder operators have at most one entry
/// per row), so the whole state is streamed once per stage.
fn apply_liouvillian(
    model: &SystemModel,
    t: f64,
    rho: &DMatrix<Complex64>,
    out: &mut DMatrix<Complex64>,
    _tmp: &mut DMatrix<Complex64>,
) {
    use crate::model::HamiltonianTerm;
    let dim = rho.nrows();
    // (left operator, right-side rows via its dagger, coefficient)
    let mut ops: Vec<(&crate::sparse::CsrMatrix, &crate::sparse::CsrMatrix, Complex64)> =
        Vec::new();
    for term in model.terms() {
        match term {
            HamiltonianTerm::Static(m) => ops.push((m, m, c(1.0))),
            HamiltonianTerm::Rotating {
                op,
                op_dag,
                coeff,
                freq,
            } => {
                let ph = coeff * Complex64::from_polar(1.0, -freq * t);
                ops.push((op, op_dag, ph));
                ops.push((op_dag, op, ph.conj()));
            }
        }
    }
    let loss = model.loss_diag();
    let rho_s = rho.as_slice();
    let minus_i = Complex64::new(0.0, -1.0);
    let plus_i = Complex64::new(0.0, 1.0);

    out.as_mut_slice()
        .par_chunks_mut(dim)
        .with_min_len(8)
        .enumerate()
        .for_each(|(j, out_col)| {
            let rho_j = &rho_s[j * dim..(j + 1) * dim];
            // −½{Σ r L†L, ρ} (diagonal) seeds the column
            let lj = loss[j];
            for i in 0..dim {
                out_col[i] = -c(0.5 * (loss[i] + lj)) * rho_j[i];
            }
            for (op, op_dag, coeff) in &ops {
                // −i (c·T ρ)[:, j]
                let w = minus_i * coeff;
                for i in 0..dim {
                    let (cols, vals) = op.row(i);
                    let mut acc = c(0.0);
                    for (k, v) in cols.iter().zip(vals) {
                        acc += v * rho_j[*k];
                    }
                    out_col[i] += w * acc;
                }
                // +i (ρ · c·T)[:, j] = +i·c Σ_k conj(T†[j,k]) ρ[:, k]
                let (cols, vals) = op_dag.row(j);
                for (k, v) in cols.iter().zip(vals) {
                    let w = plus_i * coeff * v.conj();
                    let rho_k = &rho_s[k * dim..(k + 1) * dim];
                    for i in 0..dim {
                        out_col[i] += w * rho_k[i];
                    }
                }
            }
            // jump sandwiches: (r L ρ L†)[:, j] = r Σ_k conj(L[j,k]) L·ρ[:, k]
            for d in model.dissipators() {
                if d.rate == 0.0 {
                    continue;
                }
                let (cols, vals) = d.op.row(j);
                for (k, v) in cols.iter().zip(vals) {
                    let w = c(d.rate) * v.conj();
                    let rho_k = &rho_s[k * dim..(k + 1) * dim];
                    for i in 0..dim {
                        let (ci, vi) = d.op.row(i);
                        let mut acc = c(0.0);
                        for (m, vm) in ci.iter().zip(vi) {
                            acc += vm * rho_k[*m];
                        }
                        out_col[i] += w * acc;
                    }
                }
            }
        });
}

fn rk4_step(
    model: &SystemModel,
    t: f64,
    dt: f64,
    rho: &mut DMatrix<Complex64>,
    w: &mut Workspace,
) {
    apply_liouvillian(model, t, rho, &mut w.k1, &mut w.tmp);
    w.stage.copy_from(rho);
    w.stage.zip_apply(&w.k1, |s, k| *s += c(dt / 2.0) * k);
    apply_liouvillian(model, t + dt / 2.0, &w.stage, &mut w.k2, &mut w.tmp);
    w.stage.copy_from(rho);
    w.stage.zip_apply(&w.k2, |s, k| *s += c(dt / 2.0) * k);
    apply_liouvillian(model, t + dt / 2.0, &w.stage, &mut w.k3, &mut w.tmp);
    w.stage.copy_from(rho);
    w.stage.zip_apply(&w.k3, |s, k| *s += c(dt) * k);
    apply_liouvillian(model, t + dt, &w.stage, &mut w.k4, &mut w.tmp);
    for i in 0..rho.len() {
        rho[i] += c(dt / 6.0)
            * (w.k1[i] + c(2.0) * w.k2[i] + c(2.0) * w.k3[i] + w.k4[i]);
    }
}

fn trace_of(rho: &DMatrix<Complex64>) -> Complex64 {
    rho.diagonal().iter().sum()
}

fn diag_expectation(rho: &DMatrix<Complex64>, diag: &ModeOperator) -> f64 {
    let n = rho.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        acc += (rho[(i, i)] * diag.matrix[(i, i)]).re;
    }
    acc
}

fn op_expectation(rho: &DMatrix<Complex64>, op: &crate::sparse::CsrMatrix) -> Complex64 {
    // tr(op · rho) via one sparse pass per column
    let dim = rho.nrows();
    let mut y = vec![c(0.0); dim];
    let mut acc = c(0.0);
    for j in 0..dim {
        for v in y.iter_mut() {
            *v = c(0.0);
        }
        op.acc_vec(c(1.0), &rho.as_slice()[j * dim..(j + 1) * dim], &mut y);
        acc += y[j];
    }
    acc
}

/// Propagate `rho0` under the model and record observables on a uniform grid.
pub fn propagate(
    model: &SystemModel,
    rho0: &DensityOperator,
    options: &PropagateOptions,
) -> Result<PropagationResult> {
    let dim = model.space.joint_dim();
    if rho0.dim() != dim {
        return Err(Error::Dimension {
            context: "propagate",
            expected: dim,
            got: rho0.dim(),
        });
    }
    if !(options.t_final > 0.0) || options.samples < 2 {
        return Err(Error::InvalidParameter(
            "propagate needs t_final > 0 and at least 2 samples".into(),
        ));
    }
    let grid = options.t_final / (options.samples - 1) as f64;
    let dt_req = options.dt.unwrap_or_else(|| model.recommended_dt());
    if !(dt_req > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {dt_req}"
        )));
    }
    let substeps = (grid / dt_req).ceil().max(1.0);
    if !substeps.is_finite() || substeps > 5e8 {
        return Err(Error::InvalidParameter(format!(
            "step-size underflow: {substeps} substeps per sample interval"
        )));
    }
    let substeps = substeps as usize;
    let dt = grid / substeps as f64;

    let n_a = number(&model.space, Mode::Target);
    let n_b = number(&model.space, Mode::Aux);
    let a_csr = crate::sparse::CsrMatrix::from_dense(
        &crate::fock::annihilation(&model.space, Mode::Target).matrix,
    );
    let b_csr = crate::sparse::CsrMatrix::from_dense(
        &crate::fock::annihilation(&model.space, Mode::Aux).matrix,
    );

    let mut rho = rho0.matrix.clone();
    let mut w = Workspace::new(dim);
    let mut result = PropagationResult {
        times: Vec::with_capacity(options.samples),
        n_target: Vec::with_capacity(options.samples),
        n_aux: Vec::with_capacity(options.samples),
        mean_target: Vec::with_capacity(options.samples),
        mean_aux: Vec::with_capacity(options.samples),
        trace: Vec::with_capacity(options.samples),
        final_state: rho0.clone(),
        dt,
    };

    let record = |t: f64, rho: &DMatrix<Complex64>, r: &mut PropagationResult| -> Result<()> {
        let tr = trace_of(rho);
        if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
            return Err(Error::TraceDrift { t, trace: tr.re });
        }
        let na = diag_expectation(rho, &n_a);
        let nb = diag_expectation(rho, &n_b);
        if na < -1e-8 || nb < -1e-8 {
            return Err(Error::Convergence(format!(
                "occupation went negative ({na}, {nb}) at t = {t}; reduce the step size"
            )));
        }
        r.times.push(t);
        r.n_target.push(na);
        r.n_aux.push(nb);
        r.mean_target.push(op_expectation(rho, &a_csr));
        r.mean_aux.push(op_expectation(rho, &b_csr));
        r.trace.push(tr.re);
        Ok(())
    };

    record(0.0, &rho, &mut result)?;
    for s in 1..options.samples {
        let t0 = (s - 1) as f64 * grid;
        for k in 0..substeps {
            rk4_step(model, t0 + k as f64 * dt, dt, &mut rho, &mut w);
        }
        record(s as f64 * grid, &rho, &mut result)?;
    }
    result.final_state = DensityOperator::new(rho);
    Ok(result)
}

/// A steady state with its dimensionless residual
/// ‖L(ρ)‖_F / max-rate (rates make the Liouvillian dimensionful, so the raw
/// Frobenius norm is scaled by the largest damping or coupling rate).
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub state: DensityOperator,
    pub residual: f64,
    pub method: SteadyStateMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyStateMethod {
    DirectNullSpace,
    LongTimeIntegration,
}

fn rate_scale(model: &SystemModel) -> f64 {
    let mut s = model.coupling.g.abs();
    for d in model.dissipators() {
        s = s.max(d.rate);
    }
    s.max(model.drive.beta.norm() * model.aux.damping_rate.sqrt())
        .max(f64::MIN_POSITIVE)
}

fn scaled_residual(model: &SystemModel, rho: &DMatrix<Complex64>) -> f64 {
    let dim = rho.nrows();
    let mut out = DMatrix::zeros(dim, dim);
    let mut tmp = DMatrix::zeros(dim, dim);
    apply_liouvillian(model, 0.0, rho, &mut out, &mut tmp);
    out.norm() / rate_scale(model)
}

/// Solve for the stationary state of a time-independent model.
///
/// Rejects time-dependent models (use [`propagate`] and read the late-time
/// behavior instead). Requires at least one nonzero damping rate.
pub fn steady_state(model: &SystemModel) -> Result<SteadyState> {
    steady_state_seeded(model, None)
}

/// Like [`steady_state`], but the long-time fallback relaxes from the given
/// state instead of the thermal product; useful when a propagation already
/// ended near stationarity.
pub fn steady_state_seeded(
    model: &SystemModel,
    initial: Option<&DensityOperator>,
) -> Result<SteadyState> {
    if model.is_time_dependent() {
        return Err(Error::TimeDependent(
            "steady_state requires a time-independent model; propagate instead",
        ));
    }
    if model.dissipators().iter().all(|d| d.rate == 0.0) {
        return Err(Error::InvalidParameter(
            "steady state needs at least one nonzero damping rate".into(),
        ));
    }
    let dim = model.space.joint_dim();
    if dim <= DIRECT_SOLVE_MAX_DIM {
        steady_state_direct(model)
    } else {
        steady_state_iterative(model, initial)
    }
}

fn steady_state_direct(model: &SystemModel) -> Result<SteadyState> {
    let dim = model.space.joint_dim();
    let n2 = dim * dim;
    let scale = rate_scale(model);
    let h = model.hamiltonian(0.0).matrix;

    // column-major vectorization: vec(AXB) = (Bᵀ ⊗ A) vec(X)
    let id = DMatrix::<Complex64>::identity(dim, dim);
    let mut m = id.kronecker(&h) * Complex64::new(0.0, -1.0);
    m += h.transpose().kronecker(&id) * Complex64::new(0.0, 1.0);
    for d in model.dissipators() {
        if d.rate == 0.0 {
            continue;
        }
        let l = d.op.to_dense();
        let ldl = l.adjoint() * &l;
        m += l.conjugate().kronecker(&l) * c(d.rate);
        m += id.kronecker(&ldl) * c(-0.5 * d.rate);
        m += ldl.transpose().kronecker(&id) * c(-0.5 * d.rate);
    }
    m /= c(scale);

    // Trace preservation makes the rows of M dependent; replace the first
    // row with the trace constraint and solve M x = e_0.
    let mut m_solve = m.clone();
    for j in 0..n2 {
        m_solve[(0, j)] = c(0.0);
    }
    for k in 0..dim {
        m_solve[(0, k * dim + k)] = c(1.0);
    }
    let mut rhs = DVector::zeros(n2);
    rhs[0] = c(1.0);
    let x = m_solve
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Liouvillian null space is degenerate".into()))?;

    let residual = (&m * &x).norm();
    let mut rho = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            rho[(i, j)] = x[j * dim + i];
        }
    }
    // enforce exact Hermiticity of the numerical solution
    let rho = (rho.clone() + rho.adjoint()).scale(0.5);
    let tr = trace_of(&rho);
    let rho = rho / tr;
    if residual > 1e-10 {
        return Err(Error::Convergence(format!(
            "direct steady-state residual {residual} above 1e-10"
        )));
    }
    Ok(SteadyState {
        state: DensityOperator::new(rho),
        residual,
        method: SteadyStateMethod::DirectNullSpace,
    })
}

fn steady_state_iterative(
    model: &SystemModel,
    initial: Option<&DensityOperator>,
) -> Result<SteadyState> {
    // Relax until staged observables stop moving.
    let dim = model.space.joint_dim();
    let mut rho = match initial {
        Some(r) => {
            if r.dim() != dim {
                return Err(Error::Dimension {
                    context: "steady_state seed",
                    expected: dim,
                    got: r.dim(),
                });
            }
            r.matrix.clone()
        }
        None => {
            crate::fock::thermal_product(&model.space, model.n_t_target(), model.n_t_aux())?
                .0
                .matrix
        }
    };
    let mut w = Workspace::new(dim);
    let dt = model.recommended_dt();
    let n_a = number(&model.space, Mode::Target);
    let n_b = number(&model.space, Mode::Aux);

    // slowest relaxation rate: twice the smallest real part of the 2x2
    // drift eigenvalues (the number moments contract at pairwise sums of
    // amplitude rates), with the bare dampings as the uncoupled fallback
    let gamma = model.target.damping_rate;
    let kappa = model.aux.damping_rate;
    let g = model.coupling.g;
    let slow = if g > 0.0 {
        let dc = crate::langevin::decay_constants(gamma, kappa, g);
        2.0 * dc
            .drift_eigenvalues
            .iter()
            .map(|e| e.re)
            .fold(f64::INFINITY, f64::min)
    } else {
        [gamma, kappa]
            .into_iter()
            .filter(|r| *r > 0.0)
            .fold(f64::INFINITY, f64::min)
    };
    let window = if slow.is_finite() && slow > 0.0 {
        1.0 / slow
    } else {
        1.0 / rate_scale(model)
    };
    let steps_per_window = ((window / dt).ceil() as usize).max(1);

    let mut prev = (f64::INFINITY, f64::INFINITY);
    let mut t = 0.0;
    const MAX_WINDOWS: usize = 400;
    for _ in 0..MAX_WINDOWS {
        for _ in 0..steps_per_window {
            rk4_step(model, t, dt, &mut rho, &mut w);
            t += dt;
        }
        let tr = trace_of(&rho);
        if (tr.re - 1.0).abs() > 1e-6 {
            return Err(Error::TraceDrift { t, trace: tr.re });
        }
        let na = diag_expectation(&rho, &n_a);
        let nb = diag_expectation(&rho, &n_b);
        let scale = na.abs().max(nb.abs()).max(1e-30);
        let delta = ((na - prev.0).abs().max((nb - prev.1).abs())) / scale;
        prev = (na, nb);
        if delta < 1e-10 {
            let residual = scaled_residual(model, &rho);
            let rho = (rho.clone() + rho.adjoint()).scale(0.5);
            let tr = trace_of(&rho);
            return Ok(SteadyState {
                state: DensityOperator::new(rho / tr),
                residual,
                method: SteadyStateMethod::LongTimeIntegration,
            });
        }
    }
    Err(Error::Convergence(format!(
        "steady state not stationary after {MAX_WINDOWS} relaxation windows (last drift {:.3e})",
        {
            let na = diag_expectation(&rho, &n_a);
            (na - prev.0).abs()
        }
    )))
}
