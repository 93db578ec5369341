//! Truncated Fock-space linear algebra for a two-mode Hilbert space.
//!
//! The joint space is the tensor product of two truncated oscillator spaces,
//! `target` (dimension `dim_target`) and `aux` (dimension `dim_aux`). The
//! basis ordering is fixed and row-major over (n_target, n_aux):
//!
//! ```text
//!     index(n_target, n_aux) = n_target * dim_aux + n_aux
//! ```
//!
//! so a target operator A embeds as A ⊗ I and an aux operator B as I ⊗ B,
//! with the standard Kronecker product in that order.
//!
//! Ladder operators use the usual matrix elements ⟨n−1|c|n⟩ = √n. All
//! construction is deterministic; operators built from the same inputs are
//! bit-for-bit identical across runs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used by Hermiticity checks.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Truncation of the joint two-mode Fock space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    dim_target: usize,
    dim_aux: usize,
}

impl FockSpace {
    /// Both truncations must be at least 2.
    pub fn new(dim_target: usize, dim_aux: usize) -> Result<Self> {
        if dim_target < 2 || dim_aux < 2 {
            return Err(Error::InvalidParameter(format!(
                "Fock truncations must be >= 2, got ({dim_target}, {dim_aux})"
            )));
        }
        Ok(Self {
            dim_target,
            dim_aux,
        })
    }

    pub fn dim_target(&self) -> usize {
        self.dim_target
    }

    pub fn dim_aux(&self) -> usize {
        self.dim_aux
    }

    pub fn dim(&self, mode: Mode) -> usize {
        match mode {
            Mode::Target => self.dim_target,
            Mode::Aux => self.dim_aux,
        }
    }

    pub fn joint_dim(&self) -> usize {
        self.dim_target * self.dim_aux
    }

    /// Joint-basis index of |n_target, n_aux⟩.
    pub fn index(&self, n_target: usize, n_aux: usize) -> usize {
        debug_assert!(n_target < self.dim_target && n_aux < self.dim_aux);
        n_target * self.dim_aux + n_aux
    }

    /// Inverse of [`FockSpace::index`].
    pub fn occupations(&self, index: usize) -> (usize, usize) {
        (index / self.dim_aux, index % self.dim_aux)
    }
}

/// Which factor of the joint space an operator or state refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Target,
    Aux,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Target => "target",
            Mode::Aux => "aux",
        }
    }
}

/// A dense operator on the joint space, tagged with a descriptive label.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    pub matrix: DMatrix<Complex64>,
    pub label: String,
}

impl ModeOperator {
    pub fn new(matrix: DMatrix<Complex64>, label: impl Into<String>) -> Self {
        Self {
            matrix,
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Zero operator on the joint space.
    pub fn zero(space: &FockSpace) -> Self {
        Self::new(
            DMatrix::zeros(space.joint_dim(), space.joint_dim()),
            "0",
        )
    }

    /// Identity on the joint space.
    pub fn identity(space: &FockSpace) -> Self {
        Self::new(
            DMatrix::identity(space.joint_dim(), space.joint_dim()),
            "I",
        )
    }

    pub fn dagger(&self) -> Self {
        Self::new(self.matrix.adjoint(), format!("{}^dag", self.label))
    }

    /// ‖M − M†‖ / max(‖M‖, 1) in the Frobenius norm.
    pub fn hermiticity_error(&self) -> f64 {
        let diff = (&self.matrix - self.matrix.adjoint()).norm();
        diff / self.matrix.norm().max(1.0)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() <= HERMITICITY_TOL
    }
}

/// Single-mode annihilation matrix: ⟨n−1|c|n⟩ = √n.
fn ladder(dim: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    m
}

/// Embed a single-mode matrix into the joint space per the fixed ordering.
pub fn embed(space: &FockSpace, mode: Mode, single: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (da, db) = (space.dim_target(), space.dim_aux());
    match mode {
        Mode::Target => {
            debug_assert_eq!(single.nrows(), da);
            single.kronecker(&DMatrix::identity(db, db))
        }
        Mode::Aux => {
            debug_assert_eq!(single.nrows(), db);
            DMatrix::identity(da, da).kronecker(single)
        }
    }
}

/// Annihilation operator of one mode, embedded in the joint space
/// (a ⊗ I for the target, I ⊗ b for the aux).
pub fn annihilation(space: &FockSpace, mode: Mode) -> ModeOperator {
    let label = match mode {
        Mode::Target => "a",
        Mode::Aux => "b",
    };
    ModeOperator::new(embed(space, mode, &ladder(space.dim(mode))), label)
}

/// Creation operator of one mode in the joint space.
pub fn creation(space: &FockSpace, mode: Mode) -> ModeOperator {
    let a = annihilation(space, mode);
    ModeOperator::new(
        a.matrix.adjoint(),
        match mode {
            Mode::Target => "a^dag",
            Mode::Aux => "b^dag",
        },
    )
}

/// Number operator c†c of one mode in the joint space.
pub fn number(space: &FockSpace, mode: Mode) -> ModeOperator {
    let dim = space.dim(mode);
    let mut n = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        n[(k, k)] = Complex64::new(k as f64, 0.0);
    }
    ModeOperator::new(
        embed(space, mode, &n),
        match mode {
            Mode::Target => "n_a",
            Mode::Aux => "n_b",
        },
    )
}

/// Pure-state ket on the joint space.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub amplitudes: DVector<Complex64>,
}

impl JointState {
    pub fn new(amplitudes: DVector<Complex64>) -> Self {
        Self { amplitudes }
    }

    /// Product Fock state |n_target, n_aux⟩.
    pub fn fock(space: &FockSpace, n_target: usize, n_aux: usize) -> Self {
        let mut v = DVector::zeros(space.joint_dim());
        v[space.index(n_target, n_aux)] = Complex64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_squared().sqrt();
        if n > 0.0 {
            self.amplitudes /= Complex64::new(n, 0.0);
        }
    }

    /// ⟨ψ|M|ψ⟩ for a normalized state.
    pub fn expectation(&self, op: &ModeOperator) -> Result<Complex64> {
        if op.dim() != self.dim() {
            return Err(Error::Dimension {
                context: "JointState::expectation",
                expected: self.dim(),
                got: op.dim(),
            });
        }
        let mv = &op.matrix * &self.amplitudes;
        Ok(self.amplitudes.dotc(&mv))
    }

    pub fn to_density(&self) -> DensityOperator {
        let v = &self.amplitudes;
        DensityOperator {
            matrix: v * v.adjoint(),
        }
    }
}

/// Mixed-state operator on the joint space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    pub matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diagonal().iter().sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let diff = (&self.matrix - self.matrix.adjoint()).norm();
        diff / self.matrix.norm().max(1.0)
    }

    /// Smallest eigenvalue of the Hermitian part; numerical positivity check.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        let eig = herm.symmetric_eigenvalues();
        eig.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    /// Checks trace = 1 within 1e-9, Hermiticity within 1e-10, and
    /// eigenvalues ≥ −1e-9.
    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "density operator trace {tr} deviates from 1"
            )));
        }
        if self.hermiticity_error() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "density operator Hermiticity error {}",
                self.hermiticity_error()
            )));
        }
        let min = self.min_eigenvalue();
        if min < -1e-9 {
            return Err(Error::InvalidParameter(format!(
                "density operator has eigenvalue {min}"
            )));
        }
        Ok(())
    }
}

/// Truncated thermal state of a single mode, with its truncation report.
///
/// The Boltzmann weights p(n) ∝ (n_occ/(1+n_occ))^n are renormalized over the
/// truncated basis, so the realized mean occupation is below the nominal one;
/// both are reported so under-truncation is diagnosable.
#[derive(Debug, Clone)]
pub struct ThermalState {
    /// Diagonal single-mode density matrix (dimension of that mode).
    pub rho: DMatrix<Complex64>,
    pub nominal_occupation: f64,
    pub truncated_occupation: f64,
}

impl ThermalState {
    /// Relative deviation of the truncated mean from the nominal occupation.
    pub fn truncation_deviation(&self) -> f64 {
        if self.nominal_occupation == 0.0 {
            0.0
        } else {
            (self.nominal_occupation - self.truncated_occupation).abs() / self.nominal_occupation
        }
    }

    /// True when the truncated mean deviates from nominal by more than 1%,
    /// signalling under-truncation. Callers should surface this to the user.
    pub fn under_truncated(&self) -> bool {
        self.truncation_deviation() > 0.01
    }
}

/// Thermal state of one mode at mean occupation `n_occ`, truncated and
/// renormalized. Off-diagonal entries are exactly zero.
pub fn thermal_state(space: &FockSpace, mode: Mode, n_occ: f64) -> Result<ThermalState> {
    if !(n_occ >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "thermal occupation must be >= 0, got {n_occ}"
        )));
    }
    let dim = space.dim(mode);
    let mut p = vec![0.0_f64; dim];
    if n_occ == 0.0 {
        p[0] = 1.0;
    } else {
        let r = n_occ / (1.0 + n_occ);
        let mut w = 1.0;
        let mut z = 0.0;
        for pk in p.iter_mut() {
            *pk = w;
            z += w;
            w *= r;
        }
        for pk in p.iter_mut() {
            *pk /= z;
        }
    }
    let mean = p
        .iter()
        .enumerate()
        .map(|(n, pk)| n as f64 * pk)
        .sum::<f64>();
    let mut rho = DMatrix::zeros(dim, dim);
    for (n, pk) in p.iter().enumerate() {
        rho[(n, n)] = Complex64::new(*pk, 0.0);
    }
    Ok(ThermalState {
        rho,
        nominal_occupation: n_occ,
        truncated_occupation: mean,
    })
}

/// Joint product state ρ_target ⊗ ρ_aux from two per-mode occupations.
pub fn thermal_product(
    space: &FockSpace,
    n_occ_target: f64,
    n_occ_aux: f64,
) -> Result<(DensityOperator, ThermalState, ThermalState)> {
    let ta = thermal_state(space, Mode::Target, n_occ_target)?;
    let tb = thermal_state(space, Mode::Aux, n_occ_aux)?;
    let rho = ta.rho.kronecker(&tb.rho);
    Ok((DensityOperator::new(rho), ta, tb))
}

/// Tr(ρ M). The imaginary part stays below 1e-9 for Hermitian M on a
/// physical state.
pub fn expectation(rho: &DensityOperator, op: &ModeOperator) -> Result<Complex64> {
    if rho.dim() != op.dim() {
        return Err(Error::Dimension {
            context: "expectation",
            expected: rho.dim(),
            got: op.dim(),
        });
    }
    // tr(rho * M) without forming the product.
    let n = rho.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += rho.matrix[(i, k)] * op.matrix[(k, i)];
        }
    }
    Ok(acc)
}
