//! Per-user SINR and sum achievable rate, plus the LMMSE lower-bound
//! quantities used to cross-check the closed-form rate.
//!
//! Rates are in bit/s/Hz (base-2 logarithm).

use crate::linalg::{frobenius_sq, CMatrix, CVector, C64};
use crate::{Error, Result};

/// Transmit precoder `V` (M x K) with its power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub v: CMatrix,
    pub power_budget: f64,
}

impl Precoder {
    /// Tolerance on `trace(V V^H) <= P`.
    pub const POWER_TOLERANCE: f64 = 1e-9;

    pub fn new(v: CMatrix, power_budget: f64) -> Result<Self> {
        let power = frobenius_sq(&v);
        if power > power_budget + Self::POWER_TOLERANCE {
            return Err(Error::PowerExceeded { power, budget: power_budget });
        }
        Ok(Self { v, power_budget })
    }

    pub fn power(&self) -> f64 {
        frobenius_sq(&self.v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub sinr: Vec<f64>,
}

fn check_pair(h: &CMatrix, v: &CMatrix) -> Result<()> {
    if h.shape() != v.shape() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {:?} but precoder is {:?}",
            h.shape(),
            v.shape()
        )));
    }
    Ok(())
}

/// `|h_k^H v_i|^2` for every (k, i).
fn gain_matrix(h: &CMatrix, v: &CMatrix) -> nalgebra::DMatrix<f64> {
    (h.adjoint() * v).map(|z| z.norm_sqr())
}

pub fn sum_rate(h: &CMatrix, v: &CMatrix, sigma2: f64) -> Result<RateReport> {
    check_pair(h, v)?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("noise power {sigma2} must be positive")));
    }
    let g = gain_matrix(h, v);
    let k_users = h.ncols();
    let sinr: Vec<f64> = (0..k_users)
        .map(|k| {
            let interference: f64 = (0..k_users).filter(|&i| i != k).map(|i| g[(k, i)]).sum();
            g[(k, k)] / (interference + sigma2)
        })
        .collect();
    let per_user_rate: Vec<f64> = sinr.iter().map(|s| s.ln_1p() / std::f64::consts::LN_2).collect();
    let sum_rate = per_user_rate.iter().sum();
    Ok(RateReport { per_user_rate, sum_rate, sinr })
}

fn check_square(f: &CMatrix, m: usize) -> Result<()> {
    if f.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!("expected {m}x{m} covariance, got {:?}", f.shape())));
    }
    Ok(())
}

fn quad(h: &CVector, f: &CMatrix) -> f64 {
    h.dotc(&(f * h)).re
}

/// Interference-plus-noise `sum_{i != k} h^H F_i h + sigma^2`.
pub fn interference_plus_noise(h: &CVector, f_all: &[CMatrix], k: usize, sigma2: f64) -> Result<f64> {
    if k >= f_all.len() {
        return Err(Error::DimensionMismatch(format!("user {k} out of {}", f_all.len())));
    }
    let mut gamma = sigma2;
    for (i, f) in f_all.iter().enumerate() {
        check_square(f, h.len())?;
        if i != k {
            gamma += quad(h, f);
        }
    }
    Ok(gamma)
}

/// LMMSE row `h^H F_k / (h^H F_k h + Gamma_k)`, returned entry by entry. The
/// estimate of `t_k` from `y_k` is the conjugate transpose of this row
/// times `y_k`.
pub fn lmmse_gain(h: &CVector, f_all: &[CMatrix], k: usize, sigma2: f64) -> Result<CVector> {
    let gamma = interference_plus_noise(h, f_all, k, sigma2)?;
    let fk = &f_all[k];
    let denom = quad(h, fk) + gamma;
    Ok((h.adjoint() * fk).transpose() / C64::new(denom, 0.0))
}

/// `E ||t_k - g y_k||^2` for an arbitrary estimator column `g`, evaluated
/// from second moments: `E t t^H = F_k`, `E t y* = F_k h`,
/// `E |y|^2 = sum_i h^H F_i h + sigma^2`.
pub fn lmmse_error(h: &CVector, f_all: &[CMatrix], k: usize, sigma2: f64, g: &CVector) -> Result<f64> {
    let gamma = interference_plus_noise(h, f_all, k, sigma2)?;
    let fk = &f_all[k];
    if g.len() != h.len() {
        return Err(Error::DimensionMismatch(format!("estimator length {} vs {}", g.len(), h.len())));
    }
    let power_y = quad(h, fk) + gamma;
    let cross = g.dotc(&(fk * h)).re;
    Ok(fk.trace().re - 2.0 * cross + g.norm_squared() * power_y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
}

/// Both sides of `log2 det(I + h h^H F / gamma) = log2(1 + h^H F h / gamma)`.
pub fn lower_bound_identity_check(h: &CVector, f: &CMatrix, gamma: f64) -> Result<IdentityCheck> {
    check_square(f, h.len())?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} must be positive")));
    }
    let m = h.len();
    let a = CMatrix::identity(m, m) + (h * h.adjoint() * f) / C64::new(gamma, 0.0);
    let det = a.determinant();
    if !(det.re.is_finite() && det.im.is_finite()) || det.re <= 0.0 {
        return Err(Error::NumericalFailure(format!("det(I + h h^H F / gamma) = {det}")));
    }
    Ok(IdentityCheck { lhs: det.re.log2(), rhs: (quad(h, f) / gamma).ln_1p() / std::f64::consts::LN_2 })
}

/// Determinant form of the per-user achievable-rate bound,
/// `log2 det(I + h h^H F_k / Gamma_k)`.
pub fn lower_bound_rate(h: &CVector, f_all: &[CMatrix], k: usize, sigma2: f64) -> Result<f64> {
    let gamma = interference_plus_noise(h, f_all, k, sigma2)?;
    Ok(lower_bound_identity_check(h, &f_all[k], gamma)?.lhs)
}

/// Rank-one covariances `v_i v_i^H` for each precoder column.
pub fn rank_one_covariances(v: &CMatrix) -> Vec<CMatrix> {
    v.column_iter().map(|c| c * c.adjoint()).collect()
}
