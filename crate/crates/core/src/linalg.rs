//! Complex matrix aliases and the few helpers the precoding code needs.

use nalgebra::{DMatrix, DVector};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
/// Complex matrix, e.g. the M x K channel `H` or precoder `V`.
pub type CMatrix = DMatrix<C64>;
/// Complex column vector.
pub type CVector = DVector<C64>;

/// `trace(V V^H)`, i.e. the squared Frobenius norm.
pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Kronecker product of two column vectors, first factor outer.
pub fn kron(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Hermitian inner product `a^H b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn euclidean_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
