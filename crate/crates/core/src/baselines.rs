//! Reference precoders: zero-forcing, maximum-ratio transmission and a
//! random full-power floor, each driven by perfect or delayed CSI.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::ChannelTrace;
use crate::linalg::{CMatrix, C64};
use crate::rate::{sum_rate, RateReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecoderKind {
    Zf,
    Mrt,
    Random,
}

/// Which channel the precoder is designed on; scoring always uses `H(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsiView {
    Perfect,
    Delayed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BaselineKind {
    pub precoder: PrecoderKind,
    pub csi: CsiView,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.precoder {
            PrecoderKind::Zf => "zf",
            PrecoderKind::Mrt => "mrt",
            PrecoderKind::Random => "random",
        };
        let c = match self.csi {
            CsiView::Perfect => "perfect",
            CsiView::Delayed => "delayed",
        };
        write!(f, "{p}-{c}")
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    /// Accepts `zf-perfect`, `mrt-delayed`, `random`, ... (`random` alone
    /// means `random-perfect`; the CSI view does not affect it).
    fn from_str(s: &str) -> Result<Self> {
        let (p, c) = s.split_once('-').unwrap_or((s, "perfect"));
        let precoder = match p {
            "zf" => PrecoderKind::Zf,
            "mrt" => PrecoderKind::Mrt,
            "random" => PrecoderKind::Random,
            _ => return Err(Error::InvalidParameter(format!("unknown precoder '{p}'"))),
        };
        let csi = match c {
            "perfect" => CsiView::Perfect,
            "delayed" => CsiView::Delayed,
            _ => return Err(Error::InvalidParameter(format!("unknown CSI view '{c}'"))),
        };
        Ok(Self { precoder, csi })
    }
}

fn scale_columns(v: &mut CMatrix, power: f64) -> Result<()> {
    let per_user = (power / v.ncols() as f64).sqrt();
    for (k, mut col) in v.column_iter_mut().enumerate() {
        let n = col.norm();
        if n == 0.0 {
            return Err(Error::ZeroColumn(k));
        }
        col *= C64::new(per_user / n, 0.0);
    }
    Ok(())
}

/// `H (H^H H)^{-1}` with every column rescaled to power `P / K`.
pub fn zf_precoder(h: &CMatrix, power: f64) -> Result<CMatrix> {
    let (m, k) = h.shape();
    if k > m {
        return Err(Error::DimensionMismatch(format!("zero-forcing needs K <= M, got K={k} M={m}")));
    }
    let sv = h.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min < 1e-12 * max {
        return Err(Error::RankDeficient { ratio: if max > 0.0 { min / max } else { 0.0 } });
    }
    let gram = h.adjoint() * h;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("channel Gram matrix is singular".into()))?;
    let mut v = h * inv;
    scale_columns(&mut v, power)?;
    Ok(v)
}

/// `v_k = sqrt(P / K) h_k / |h_k|`.
pub fn mrt_precoder(h: &CMatrix, power: f64) -> Result<CMatrix> {
    let mut v = h.clone();
    scale_columns(&mut v, power)?;
    Ok(v)
}

/// Isotropic random direction at full power, `trace(V V^H) = P`.
pub fn random_precoder<R: Rng + ?Sized>(rng: &mut R, m: usize, k: usize, power: f64) -> CMatrix {
    let v = CMatrix::from_fn(m, k, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let n = v.norm();
    v * C64::new(power.sqrt() / n, 0.0)
}

pub fn design<R: Rng + ?Sized>(kind: PrecoderKind, h: &CMatrix, power: f64, rng: &mut R) -> Result<CMatrix> {
    match kind {
        PrecoderKind::Zf => zf_precoder(h, power),
        PrecoderKind::Mrt => mrt_precoder(h, power),
        PrecoderKind::Random => Ok(random_precoder(rng, h.nrows(), h.ncols(), power)),
    }
}

/// Designs a precoder on the chosen CSI view at each step and scores it on
/// the true channel `H(n)`.
pub fn evaluate_baseline<R: Rng + ?Sized>(
    kind: BaselineKind,
    trace: &ChannelTrace,
    power: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<RateReport>> {
    (0..trace.len())
        .map(|n| {
            let csi = match kind.csi {
                CsiView::Perfect => trace.current(n),
                CsiView::Delayed => trace.delayed(n),
            };
            let v = design(kind.precoder, &csi.h, power, rng)?;
            sum_rate(&trace.current(n).h, &v, sigma2)
        })
        .collect()
}

pub fn mean_sum_rate(reports: &[RateReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().map(|r| r.sum_rate).sum::<f64>() / reports.len() as f64
}
