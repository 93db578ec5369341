//! Minimal CSR operators for the propagation hot loops.
//!
//! Two kernels cover everything the Liouvillian and the trajectory drift
//! need, both parallelized over columns of the dense (column-major) factor:
//!
//! - `acc_left`:  OUT += coeff · A · X
//! - `acc_right_dagger`: OUT += coeff · X · A†
//!
//! Right-multiplication by A† only needs the rows of A ((X A†)[:, j] =
//! Σ_k conj(A[j, k]) X[:, k]), so a single CSR layout serves both sides.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let dim = m.nrows();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for j in 0..dim {
                let v = m[(i, j)];
                if v != Complex64::new(0.0, 0.0) {
                    col_idx.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn dagger(&self) -> Self {
        let mut dense = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                dense[(self.col_idx[k], i)] = self.vals[k].conj();
            }
        }
        Self::from_dense(&dense)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut dense = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                dense[(i, self.col_idx[k])] = self.vals[k];
            }
        }
        dense
    }

    /// Max absolute row sum; cheap bound on the spectral radius.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                self.vals[self.row_ptr[i]..self.row_ptr[i + 1]]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[Complex64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    /// y += coeff · A · x for a single vector.
    pub fn acc_vec(&self, coeff: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] += coeff * acc;
        }
    }

    /// OUT += coeff · A · X, column-parallel.
    pub fn acc_left(&self, coeff: Complex64, x: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let dim = self.dim;
        debug_assert_eq!(x.nrows(), dim);
        debug_assert_eq!(out.nrows(), dim);
        let xs = x.as_slice();
        out.as_mut_slice()
            .par_chunks_mut(dim)
            .with_min_len(16)
            .enumerate()
            .for_each(|(j, out_col)| {
                let x_col = &xs[j * dim..(j + 1) * dim];
                for i in 0..dim {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                        acc += self.vals[k] * x_col[self.col_idx[k]];
                    }
                    out_col[i] += coeff * acc;
                }
            });
    }

    /// OUT += coeff · X · A†, column-parallel.
    pub fn acc_right_dagger(
        &self,
        coeff: Complex64,
        x: &DMatrix<Complex64>,
        out: &mut DMatrix<Complex64>,
    ) {
        let dim = self.dim;
        debug_assert_eq!(x.nrows(), dim);
        debug_assert_eq!(out.nrows(), dim);
        let xs = x.as_slice();
        out.as_mut_slice()
            .par_chunks_mut(dim)
            .with_min_len(16)
            .enumerate()
            .for_each(|(j, out_col)| {
                // (X A†)[:, j] = sum_k conj(A[j, k]) X[:, k]
                for k in self.row_ptr[j]..self.row_ptr[j + 1] {
                    let w = coeff * self.vals[k].conj();
                    let x_col = &xs[self.col_idx[k] * dim..(self.col_idx[k] + 1) * dim];
                    for i in 0..dim {
                        out_col[i] += w * x_col[i];
                    }
                }
            });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn random_like(dim: usize, seed: u64) -> DMatrix<Complex64> {
        // deterministic pseudo-random fill, no RNG dependency needed here
        let mut s = seed;
        DMatrix::from_fn(dim, dim, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let re = ((s >> 33) as f64) / (1u64 << 31) as f64 - 1.0;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let im = ((s >> 33) as f64) / (1u64 << 31) as f64 - 1.0;
            Complex64::new(re, im)
        })
    }

    #[test]
    fn kernels_match_dense_products() {
        let dim = 17;
        let mut a = random_like(dim, 3);
        // sparsify
        for i in 0..dim {
            for j in 0..dim {
                if (i * 31 + j * 7) % 5 != 0 {
                    a[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        let x = random_like(dim, 11);
        let sp = CsrMatrix::from_dense(&a);
        let coeff = Complex64::new(0.3, -0.7);

        let mut out = random_like(dim, 19);
        let expected = &out + (&a * &x).scale(1.0) * coeff;
        sp.acc_left(coeff, &x, &mut out);
        assert!((out - expected).norm() < 1e-12);

        let mut out = random_like(dim, 23);
        let expected = &out + (&x * a.adjoint()) * coeff;
        sp.acc_right_dagger(coeff, &x, &mut out);
        assert!((out - expected).norm() < 1e-12);
    }

    #[test]
    fn vector_kernel_and_dagger_roundtrip() {
        let dim = 9;
        let mut a = random_like(dim, 5);
        for i in 0..dim {
            for j in 0..dim {
                if (i + 2 * j) % 3 != 0 {
                    a[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        let sp = CsrMatrix::from_dense(&a);
        assert!((sp.dagger().to_dense() - a.adjoint()).norm() < 1e-15);

        let x: Vec<Complex64> = (0..dim).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let mut y = vec![Complex64::new(0.0, 0.0); dim];
        sp.acc_vec(Complex64::new(1.0, 0.0), &x, &mut y);
        let xd = nalgebra::DVector::from_vec(x.clone());
        let expected = &a * xd;
        for i in 0..dim {
            assert!((y[i] - expected[i]).norm() < 1e-13);
        }
    }
}
