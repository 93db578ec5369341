//! Linear Heisenberg–Langevin analysis of the coupled pair in the rotating
//! frame, plus an exact Gaussian moment-propagation engine.
//!
//! In the RWA the amplitudes obey
//!
//! ```text
//!   d/dt (a, b)ᵀ = −A (a, b)ᵀ + (√γ a_in, √κ [b_in + β])ᵀ,
//!   A = [[γ/2, ig], [ig, κ/2]],
//! ```
//!
//! with white-noise inputs ⟨a_in(t) a_in†(t′)⟩ = (1 + n_T)δ(t−t′),
//! ⟨a_in†(t) a_in(t′)⟩ = n_T δ(t−t′) and a vacuum aux input. Everything here
//! uses normally ordered moments, so ⟨n⟩ = ⟨a†a⟩ directly and the vacuum
//! input contributes no diffusion.
//!
//! Because the Hamiltonian is quadratic even with the counter-rotating pair
//! term, the first moments and the normally ordered second moments close on
//! themselves; [`propagate_moments`] integrates them exactly (up to ODE
//! tolerance), which makes it both a fast simulation engine and an
//! independent oracle for the density-matrix solvers at any occupation,
//! free of Fock truncation.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// First-moment drift matrix A = [[γ/2, ig], [ig, κ/2]] (the equations of
/// motion are d x/dt = −A x + forcing).
pub fn drift_matrix(gamma: f64, kappa: f64, g: f64) -> Matrix2<Complex64> {
    Matrix2::new(c(gamma / 2.0), I * g, I * g, c(kappa / 2.0))
}

/// Decay constants of the coupled pair.
///
/// `lambda_plus/minus` are the energy-domain rates κ/2 ± √(κ²/4 − 4g²); they
/// equal twice the exact amplitude-decay eigenvalues of the drift matrix at
/// γ = 0, which are exposed alongside as `drift_eigenvalues` (computed at the
/// given γ). Real iff g ≤ κ/4; otherwise `complex_regime` is set and the
/// constants carry an imaginary (oscillatory) part.
#[derive(Debug, Clone, Copy)]
pub struct DecayConstants {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    /// N± = (λ±² + g²)^(1/2)
    pub n_plus: Complex64,
    pub n_minus: Complex64,
    pub complex_regime: bool,
    /// Eigenvalues of A = [[γ/2, ig],[ig, κ/2]] (amplitude-decay rates).
    pub drift_eigenvalues: [Complex64; 2],
    /// Set when γ is not ≪ κ (γ > κ/10), outside the stated regime.
    pub gamma_regime_warning: bool,
}

pub fn decay_constants(gamma: f64, kappa: f64, g: f64) -> DecayConstants {
    let disc = c(kappa * kappa / 4.0 - 4.0 * g * g);
    let root = disc.sqrt();
    let lambda_plus = c(kappa / 2.0) + root;
    let lambda_minus = c(kappa / 2.0) - root;
    let n_plus = (lambda_plus * lambda_plus + c(g * g)).sqrt();
    let n_minus = (lambda_minus * lambda_minus + c(g * g)).sqrt();

    // eigenvalues of the 2x2 drift: tr/2 ± sqrt((tr/2)² − det)
    let tr_half = c((gamma + kappa) / 4.0);
    let det = c(gamma * kappa / 4.0 + g * g);
    let d = (tr_half * tr_half - det).sqrt();
    DecayConstants {
        lambda_plus,
        lambda_minus,
        n_plus,
        n_minus,
        complex_regime: disc.re < 0.0,
        drift_eigenvalues: [tr_half - d, tr_half + d],
        gamma_regime_warning: kappa > 0.0 && gamma > kappa / 10.0,
    }
}

/// Steady-state coherent amplitude of the target under a drive β.
///
/// `closed_form` is the estimate −iβ(√κ/g)(κ² − 6g²)/(κ² − 9g²), valid for
/// γ ≪ κ and g < κ/4 and singular at κ = 3g; `exact` solves the 2×2 drift
/// system A x = (0, √κ β)ᵀ directly, which is regular there. The two differ
/// by their rational prefactors; both scale as β√κ/g when g ≪ κ and
/// γκ ≪ g². The master equation arbitrates between them.
#[derive(Debug, Clone, Copy)]
pub struct CoherentAmplitude {
    pub closed_form: Complex64,
    pub exact: Complex64,
    /// `closed_form` is within 5% of its κ² = 9g² pole.
    pub near_singularity: bool,
}

pub fn coherent_amplitude(beta: Complex64, gamma: f64, kappa: f64, g: f64) -> CoherentAmplitude {
    let k2 = kappa * kappa;
    let g2 = g * g;
    let denom = k2 - 9.0 * g2;
    let closed_form = if g == 0.0 {
        c(0.0)
    } else {
        -I * beta * c(kappa.sqrt() / g) * c((k2 - 6.0 * g2) / denom)
    };
    let exact = first_moment_steady(beta, gamma, kappa, g).map(|x| x[0]).unwrap_or(c(0.0));
    CoherentAmplitude {
        closed_form,
        exact,
        near_singularity: denom.abs() < 0.05 * k2.max(9.0 * g2),
    }
}

/// Exact steady first moments (⟨a⟩, ⟨b⟩): solves A x = (0, √κ β)ᵀ.
pub fn first_moment_steady(
    beta: Complex64,
    gamma: f64,
    kappa: f64,
    g: f64,
) -> Result<Vector2<Complex64>> {
    let a = drift_matrix(gamma, kappa, g);
    let f = Vector2::new(c(0.0), c(kappa.sqrt()) * beta);
    a.lu()
        .solve(&f)
        .ok_or_else(|| Error::Singular("drift matrix is singular (no damping at all?)".into()))
}

/// The linear RWA model: drift parameters, drive, and the target bath
/// occupation (the aux input is vacuum).
#[derive(Debug, Clone, Copy)]
pub struct LinearModel {
    pub gamma: f64,
    pub kappa: f64,
    pub g: f64,
    pub beta: Complex64,
    pub n_t_target: f64,
}

/// Steady normally ordered moments of the linear model.
#[derive(Debug, Clone, Copy)]
pub struct SteadyMoments {
    pub mean_target: Complex64,
    pub mean_aux: Complex64,
    /// Total occupations ⟨a†a⟩, ⟨b†b⟩ including the coherent part.
    pub n_target: f64,
    pub n_aux: f64,
    /// Thermal (drive-independent) parts of the occupations.
    pub n_target_thermal: f64,
    pub n_aux_thermal: f64,
    /// ⟨a†b⟩ (thermal part).
    pub cross: Complex64,
}

/// Solve the continuous Lyapunov equation A* N + N Aᵀ = D for the normally
/// ordered covariance N_ij = ⟨v_i† v_j⟩, with diffusion D = diag(γ n_T, 0)
/// from the input correlations, and combine with the exact first moments.
pub fn steady_covariance(model: &LinearModel) -> Result<SteadyMoments> {
    let a = drift_matrix(model.gamma, model.kappa, model.g);
    // stability: both drift eigenvalues must have positive real part
    let dc = decay_constants(model.gamma, model.kappa, model.g);
    if dc.drift_eigenvalues.iter().any(|e| e.re <= 0.0) {
        return Err(Error::InvalidParameter(
            "drift is not strictly stable; steady covariance undefined".into(),
        ));
    }
    let d = Matrix2::new(c(model.gamma * model.n_t_target), c(0.0), c(0.0), c(0.0));
    let n = solve_lyapunov_2x2(&a, &d)?;
    let means = first_moment_steady(model.beta, model.gamma, model.kappa, model.g)?;
    let n_a_th = n[(0, 0)].re;
    let n_b_th = n[(1, 1)].re;
    Ok(SteadyMoments {
        mean_target: means[0],
        mean_aux: means[1],
        n_target: n_a_th + means[0].norm_sqr(),
        n_aux: n_b_th + means[1].norm_sqr(),
        n_target_thermal: n_a_th,
        n_aux_thermal: n_b_th,
        cross: n[(0, 1)],
    })
}

/// A* N + N Aᵀ = D via the Kronecker-vectorized 4×4 linear system.
fn solve_lyapunov_2x2(
    a: &Matrix2<Complex64>,
    d: &Matrix2<Complex64>,
) -> Result<Matrix2<Complex64>> {
    let mut m = DMatrix::<Complex64>::zeros(4, 4);
    let _i2 = Matrix2::<Complex64>::identity();
    // vec is column-major: vec(A* N) = (I ⊗ A*) vec(N), vec(N Aᵀ) = (A ⊗ I) vec(N)
    for r in 0..2 {
        for s in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    // block (s, q) of I ⊗ A* is δ_sq A*; of A ⊗ I is A[s,q] I
                    let val = if s == q { a[(r, p)].conj() } else { c(0.0) }
                        + if r == p { a[(s, q)] } else { c(0.0) };
                    m[(s * 2 + r, q * 2 + p)] = val;
                }
            }
        }
    }
    let rhs = DVector::from_vec(vec![d[(0, 0)], d[(1, 0)], d[(0, 1)], d[(1, 1)]]);
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov system is singular".into()))?;
    Ok(Matrix2::new(sol[0], sol[2], sol[1], sol[3]))
}

/// Closed-form steady-state occupation in terms of the decay constants,
/// (γ n_T/2)(λ₋³/N₋⁴ + 4λ₋²λ₊²/(κN₋²N₊²) + λ₊³/N₊⁴).
///
/// Reported for comparison against [`steady_covariance`], which is the
/// ground truth; in the oscillatory regime (g > κ/4) the constants are
/// complex and the value is the real part of the conjugate-symmetric sum.
#[derive(Debug, Clone, Copy)]
pub struct OccupationFormula {
    pub value: f64,
    pub complex_regime: bool,
}

pub fn occupation_formula(gamma: f64, kappa: f64, g: f64, n_t: f64) -> OccupationFormula {
    let dc = decay_constants(gamma, kappa, g);
    let (lp, lm) = (dc.lambda_plus, dc.lambda_minus);
    let (np2, nm2) = (lp * lp + c(g * g), lm * lm + c(g * g));
    let sum = lm.powu(3) / (nm2 * nm2)
        + c(4.0) * lm * lm * lp * lp / (c(kappa) * nm2 * np2)
        + lp.powu(3) / (np2 * np2);
    OccupationFormula {
        value: (c(gamma * n_t / 2.0) * sum).re,
        complex_regime: dc.complex_regime,
    }
}

/// Parameters for exact Gaussian moment propagation.
///
/// `two_omega = Some(2ω)` adds the counter-rotating pair term
/// g(ab e^{−i2ωt} + a†b† e^{+i2ωt}) to the exchange coupling.
#[derive(Debug, Clone, Copy)]
pub struct MomentModel {
    pub gamma: f64,
    pub kappa: f64,
    pub g: f64,
    pub n_t_target: f64,
    pub n_t_aux: f64,
    pub beta: Complex64,
    pub two_omega: Option<f64>,
    /// Initial thermal occupations (n_target, n_aux); initial cross moments
    /// and means are zero.
    pub initial: (f64, f64),
}

/// Time series of the propagated moments.
#[derive(Debug, Clone)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    /// Total ⟨a†a⟩ including the coherent part.
    pub n_target: Vec<f64>,
    pub n_aux: Vec<f64>,
    pub mean_target: Vec<Complex64>,
    pub mean_aux: Vec<Complex64>,
}

// state layout: [na, nb, m=<a†b>, p=<ab>, sa=<aa>, sb=<bb>, <a>, <b>]
type MomentState = [Complex64; 8];

fn moment_rhs(model: &MomentModel, t: f64, y: &MomentState, out: &mut MomentState) {
    let (gamma, kappa, g) = (model.gamma, model.kappa, model.g);
    let (na, nb, m, p, sa, sb, ma, mb) = (y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]);
    let ig = I * g;
    let (e, ec) = match model.two_omega {
        Some(w2) => {
            let ph = Complex64::from_polar(1.0, -w2 * t);
            (ph, ph.conj())
        }
        None => (c(0.0), c(0.0)),
    };
    out[0] = -gamma * na + ig * (m.conj() - m) + ig * (e * p - ec * p.conj())
        + c(gamma * model.n_t_target);
    out[1] = -kappa * nb + ig * (m - m.conj()) + ig * (e * p - ec * p.conj())
        + c(kappa * model.n_t_aux);
    out[2] = -c((gamma + kappa) / 2.0) * m + ig * (nb - na) + ig * (e * sb - ec * sa.conj());
    out[3] = -c((gamma + kappa) / 2.0) * p - ig * (sa + sb) - ig * ec * (na + nb + c(1.0));
    out[4] = -gamma * sa - c(2.0) * ig * p - c(2.0) * ig * ec * m.conj();
    out[5] = -kappa * sb - c(2.0) * ig * p - c(2.0) * ig * ec * m;
    // first moments; the pair term couples means to conjugate means
    out[6] = -c(gamma / 2.0) * ma - ig * mb - ig * ec * mb.conj();
    out[7] = -c(kappa / 2.0) * mb - ig * ma - ig * ec * ma.conj() + c(kappa.sqrt()) * model.beta;
}

/// Integrate the closed moment system with classic RK4 and sample the
/// occupations on a uniform grid.
///
/// The second moments here are central (noise) moments; the reported
/// occupations add |⟨a⟩|², |⟨b⟩|² so driven runs report totals.
pub fn propagate_moments(model: &MomentModel, t_final: f64, samples: usize) -> Result<MomentSeries> {
    if !(t_final > 0.0) || samples < 2 {
        return Err(Error::InvalidParameter(
            "moment propagation needs t_final > 0 and at least 2 samples".into(),
        ));
    }
    let grid = t_final / (samples - 1) as f64;
    // resolve the fastest of: coupling, damping, modulation phase
    let mut scale = model.g.abs().max(model.gamma * (model.n_t_target + 1.0));
    scale = scale.max(model.kappa * (model.n_t_aux + 1.0));
    if let Some(w2) = model.two_omega {
        scale = scale.max(w2.abs());
    }
    let dt_target = 0.05 / scale.max(f64::MIN_POSITIVE);
    let substeps = (grid / dt_target).ceil().max(1.0) as usize;
    let dt = grid / substeps as f64;

    let mut y: MomentState = [c(0.0); 8];
    y[0] = c(model.initial.0);
    y[1] = c(model.initial.1);

    let mut out = MomentSeries {
        times: Vec::with_capacity(samples),
        n_target: Vec::with_capacity(samples),
        n_aux: Vec::with_capacity(samples),
        mean_target: Vec::with_capacity(samples),
        mean_aux: Vec::with_capacity(samples),
    };
    let record = |t: f64, y: &MomentState, s: &mut MomentSeries| {
        s.times.push(t);
        s.n_target.push(y[0].re + y[6].norm_sqr());
        s.n_aux.push(y[1].re + y[7].norm_sqr());
        s.mean_target.push(y[6]);
        s.mean_aux.push(y[7]);
    };
    record(0.0, &y, &mut out);

    let mut k1: MomentState = [c(0.0); 8];
    let mut k2: MomentState = [c(0.0); 8];
    let mut k3: MomentState = [c(0.0); 8];
    let mut k4: MomentState = [c(0.0); 8];
    let mut tmp: MomentState = [c(0.0); 8];
    for s in 1..samples {
        let t0 = (s - 1) as f64 * grid;
        for k in 0..substeps {
            let t = t0 + k as f64 * dt;
            moment_rhs(model, t, &y, &mut k1);
            for i in 0..8 {
                tmp[i] = y[i] + c(dt / 2.0) * k1[i];
            }
            moment_rhs(model, t + dt / 2.0, &tmp, &mut k2);
            for i in 0..8 {
                tmp[i] = y[i] + c(dt / 2.0) * k2[i];
            }
            moment_rhs(model, t + dt / 2.0, &tmp, &mut k3);
            for i in 0..8 {
                tmp[i] = y[i] + c(dt) * k3[i];
            }
            moment_rhs(model, t + dt, &tmp, &mut k4);
            for i in 0..8 {
                y[i] += c(dt / 6.0) * (k1[i] + c(2.0) * k2[i] + c(2.0) * k3[i] + k4[i]);
            }
        }
        record(s as f64 * grid, &y, &mut out);
    }
    Ok(out)
}

/// First local minimum of a sampled series, refined by quadratic
/// interpolation through the three bracketing samples. Returns (t_min, y_min).
pub fn first_minimum(times: &[f64], values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    for i in 1..n - 1 {
        if values[i] <= values[i - 1] && values[i] < values[i + 1] {
            let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
            let curv = y0 - 2.0 * y1 + y2;
            if curv <= 0.0 {
                return Some((times[i], y1));
            }
            let dt = times[i] - times[i - 1];
            let t_min = times[i] + 0.5 * dt * (y0 - y2) / curv;
            let y_min = y1 - (y0 - y2) * (y0 - y2) / (8.0 * curv);
            return Some((t_min, y_min));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn decay_constants_uncoupled_limit() {
        let d = decay_constants(0.0, 1e6, 0.0);
        assert_relative_eq!(d.lambda_plus.re, 1e6, max_relative = 1e-14);
        assert_relative_eq!(d.lambda_minus.re, 0.0);
        assert!(!d.complex_regime);
    }

    #[test]
    fn decay_constants_critical_point() {
        let kappa = 8e5;
        let d = decay_constants(0.0, kappa, kappa / 4.0);
        assert_relative_eq!(d.lambda_plus.re, kappa / 2.0, max_relative = 1e-12);
        assert_relative_eq!(d.lambda_minus.re, kappa / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn decay_constants_frozen_example() {
        let d = decay_constants(0.0, 4e6, 5e5);
        assert_relative_eq!(d.lambda_plus.re, 3.732050807569e6, max_relative = 1e-11);
        assert_relative_eq!(d.lambda_minus.re, 2.679491924311e5, max_relative = 1e-11);
        // lambda± are twice the gamma=0 drift eigenvalues
        assert_relative_eq!(
            2.0 * d.drift_eigenvalues[1].re,
            d.lambda_plus.re,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            2.0 * d.drift_eigenvalues[0].re,
            d.lambda_minus.re,
            max_relative = 1e-12
        );
        // N± real and positive here
        assert!(d.n_plus.re > 0.0 && d.n_minus.re > 0.0);
    }

    #[test]
    fn decay_constants_complex_regime_flagged() {
        let d = decay_constants(0.0, 1e6, 2e6);
        assert!(d.complex_regime);
        assert!(d.lambda_plus.im.abs() > 0.0);
        assert_relative_eq!(
            d.lambda_plus.re + d.lambda_minus.re,
            1e6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn coherent_amplitude_frozen_examples() {
        let z = coherent_amplitude(c(0.0), 100.0, 1e6, 2e5);
        assert_eq!(z.closed_form, c(0.0));
        assert_eq!(z.exact, c(0.0));

        let gamma = 2.0 * PI * 200.0;
        let z = coherent_amplitude(c(1.0), gamma, 1e6, 2e5);
        assert_relative_eq!(z.closed_form.im, -5.9375e-3, max_relative = 1e-12);
        assert!(z.closed_form.re.abs() < 1e-15);
        assert_relative_eq!(z.exact.im, -4.961036113479e-3, max_relative = 1e-10);
        assert!(z.exact.re.abs() < 1e-12);
        assert!(!z.near_singularity);

        let z = coherent_amplitude(c(1.0), 0.0, 3.01e5, 1e5);
        assert!(z.near_singularity);
    }

    #[test]
    fn first_moment_steady_satisfies_drift_equation() {
        let (gamma, kappa, g) = (321.0, 1e6, 2e5);
        let beta = Complex64::new(0.7, -1.3);
        let x = first_moment_steady(beta, gamma, kappa, g).unwrap();
        let a = drift_matrix(gamma, kappa, g);
        let f = Vector2::new(c(0.0), c(kappa.sqrt()) * beta);
        let residual = (a * x - f).norm();
        assert!(residual < 1e-9 * f.norm(), "residual {residual}");
    }

    #[test]
    fn steady_covariance_decoupled_thermal() {
        let m = LinearModel {
            gamma: 1e3,
            kappa: 1e6,
            g: 0.0,
            beta: c(0.0),
            n_t_target: 3.68,
            };
        let s = steady_covariance(&m).unwrap();
        assert_relative_eq!(s.n_target, 3.68, max_relative = 1e-12);
        assert_relative_eq!(s.n_aux, 0.0);
        assert_eq!(s.cross, c(0.0));
    }

    #[test]
    fn steady_covariance_vacuum_fixed_point() {
        let m = LinearModel {
            gamma: 1e3,
            kappa: 1e6,
            g: 5e5,
            beta: c(0.0),
            n_t_target: 0.0,
        };
        let s = steady_covariance(&m).unwrap();
        assert!(s.n_target.abs() < 1e-14);
        assert!(s.n_aux.abs() < 1e-14);
        assert!(s.cross.norm() < 1e-14);
    }

    #[test]
    fn steady_covariance_matches_frozen_preset_values() {
        // Q presets: omega/2pi = 20 MHz, g = 2e6, kappa = 1e6, n_T = 3.68
        let omega = 2.0 * PI * 20e6;
        for (q, expected) in [(1e4, 4.852249e-2), (1e5, 4.907262e-3), (5e5, 9.824424e-4)] {
            let m = LinearModel {
                gamma: omega / q,
                kappa: 1e6,
                g: 2e6,
                beta: c(0.0),
                n_t_target: 3.68,
            };
            let s = steady_covariance(&m).unwrap();
            assert_relative_eq!(s.n_target, expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn steady_covariance_rejects_undamped() {
        let m = LinearModel {
            gamma: 0.0,
            kappa: 0.0,
            g: 1e5,
            beta: c(0.0),
            n_t_target: 1.0,
        };
        assert!(steady_covariance(&m).is_err());
    }

    #[test]
    fn occupation_formula_limits() {
        assert_eq!(occupation_formula(1e3, 1e6, 1e5, 0.0).value, 0.0);
        assert_eq!(occupation_formula(0.0, 1e6, 1e5, 3.68).value, 0.0);
        let f = occupation_formula(100.0, 1e6, 1e5, 1.0);
        assert!(!f.complex_regime);
        // frozen arithmetic evaluation; disagrees with the Lyapunov value by
        // design (see module docs) and is reported informationally
        assert_relative_eq!(f.value, 1.0679235754566e-4, max_relative = 1e-9);
        let f = occupation_formula(100.0, 1e6, 2e6, 1.0);
        assert!(f.complex_regime);
        assert!(f.value.is_finite());
    }

    #[test]
    fn moments_rwa_swap_frozen_minimum() {
        // kappa = g/2 swap: first minimum of <n_a> at 1.08820 pi/(2g) with
        // n_min = gamma n_T * 0.82052/g (independent quadrature oracle).
        let omega = 2.0 * PI * 20e6;
        let (g, kappa, gamma) = (2e6, 1e6, omega / 1e5);
        let model = MomentModel {
            gamma,
            kappa,
            g,
            n_t_target: 3.68,
            n_t_aux: 0.0,
            beta: c(0.0),
            two_omega: None,
            initial: (3.68, 0.0),
        };
        let series = propagate_moments(&model, PI / g, 4001).unwrap();
        let (tmin, nmin) = first_minimum(&series.times, &series.n_target).unwrap();
        assert_relative_eq!(tmin / (PI / (2.0 * g)), 1.08820, max_relative = 2e-4);
        assert_relative_eq!(nmin, 1.896642e-3, max_relative = 1e-3);
    }

    #[test]
    fn moments_counter_rotating_swap_frozen_minimum() {
        let omega = 2.0 * PI * 20e6;
        let (g, kappa, gamma) = (2e6, 1e6, omega / 1e5);
        let model = MomentModel {
            gamma,
            kappa,
            g,
            n_t_target: 3.68,
            n_t_aux: 0.0,
            beta: c(0.0),
            two_omega: Some(2.0 * omega),
            initial: (3.68, 0.0),
        };
        let series = propagate_moments(&model, PI / g, 8001).unwrap();
        let (tmin, nmin) = first_minimum(&series.times, &series.n_target).unwrap();
        assert_relative_eq!(tmin / (PI / (2.0 * g)), 1.09338, max_relative = 5e-4);
        assert_relative_eq!(nmin, 2.282749e-3, max_relative = 2e-3);
    }

    #[test]
    fn moments_driven_means_settle_to_exact_solve() {
        let (gamma, kappa, g) = (100.0, 1e6, 1e5);
        let beta = Complex64::new(1.0, 0.0);
        let model = MomentModel {
            gamma,
            kappa,
            g,
            n_t_target: 0.0,
            n_t_aux: 0.0,
            beta,
            two_omega: None,
            initial: (0.0, 0.0),
        };
        let dc = decay_constants(gamma, kappa, g);
        let t_final = 40.0 / dc.lambda_minus.re;
        let series = propagate_moments(&model, t_final, 201).unwrap();
        let exact = first_moment_steady(beta, gamma, kappa, g).unwrap();
        let last = *series.mean_target.last().unwrap();
        assert!((last - exact[0]).norm() < 1e-6 * exact[0].norm());
    }

    #[test]
    fn first_minimum_interpolates_parabola_exactly() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| (t - 2.03) * (t - 2.03) + 0.5).collect();
        let (t, v) = first_minimum(&times, &values).unwrap();
        assert_relative_eq!(t, 2.03, max_relative = 1e-12);
        assert_relative_eq!(v, 0.5, max_relative = 1e-12);
    }
}
