//! Dense helpers for operators on tensor products. Subsystem 0 is the
//! leftmost (most significant) factor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

fn compose(digits: &[usize], dims: &[usize], which: &[usize]) -> usize {
    which.iter().fold(0, |acc, &k| acc * dims[k] + digits[k])
}

/// Traces out every subsystem not listed in `keep`; the result is ordered
/// as `keep`.
pub fn partial_trace(rho: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let total: usize = dims.iter().product();
    assert_eq!(rho.nrows(), total, "operator does not match the subsystem dimensions");
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let out_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let mut out = CMatrix::zeros(out_dim, out_dim);
    let (mut di, mut dj) = (vec![0; dims.len()], vec![0; dims.len()]);
    for i in 0..total {
        digits(i, dims, &mut di);
        for j in 0..total {
            digits(j, dims, &mut dj);
            if traced.iter().all(|&k| di[k] == dj[k]) {
                out[(compose(&di, dims, keep), compose(&dj, dims, keep))] += rho[(i, j)];
            }
        }
    }
    out
}

/// Lifts `op`, acting on the subsystems `targets` (in that order), to the
/// full space with the identity elsewhere.
pub fn embed(op: &CMatrix, dims: &[usize], targets: &[usize]) -> CMatrix {
    let total: usize = dims.iter().product();
    let op_dim: usize = targets.iter().map(|&k| dims[k]).product();
    assert_eq!(op.nrows(), op_dim, "operator does not match the target dimensions");
    let rest: Vec<usize> = (0..dims.len()).filter(|k| !targets.contains(k)).collect();
    let mut out = CMatrix::zeros(total, total);
    let (mut di, mut dj) = (vec![0; dims.len()], vec![0; dims.len()]);
    for i in 0..total {
        digits(i, dims, &mut di);
        for j in 0..total {
            digits(j, dims, &mut dj);
            if rest.iter().all(|&k| di[k] == dj[k]) {
                out[(i, j)] = op[(compose(&di, dims, targets), compose(&dj, dims, targets))];
            }
        }
    }
    out
}

/// `(⟨bra| ⊗ 1) U (|ket⟩ ⊗ 1)` for `U` on probe ⊗ system.
pub fn probe_block(u: &CMatrix, bra: &CVector, ket: &CVector, ds: usize) -> CMatrix {
    let dp = bra.len();
    CMatrix::from_fn(ds, ds, |s, t| {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..dp {
            for i in 0..dp {
                acc += bra[j].conj() * ket[i] * u[(j * ds + s, i * ds + t)];
            }
        }
        acc
    })
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_error(u: &CMatrix) -> f64 {
    max_abs(&(u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols())))
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

/// `Σ|λ|` of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.iter().map(|l| l.abs()).sum()
}

/// Positive square root of a positive semidefinite matrix; negative
/// round-off eigenvalues are clipped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, v) = hermitian_eigen(m);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
    ));
    &v * d * v.adjoint()
}
