//! Time-varying Rician channels between a UPA-equipped satellite and
//! single-antenna ground users.
//!
//! Each user's channel vector is
//!
//! ```text
//! h_k(t) = g_ant * (h_los(t) + h_nlos(t)) / FSPL_k(t)
//! ```
//!
//! where both components share the array response `u(theta, psi)` and differ
//! only in their scalar phase/gain terms. Random parameters (path count,
//! Rician factor, angles, delays, NLOS gains and user Dopplers) are frozen for
//! one refresh epoch; inside an epoch only the Doppler phases evolve with `t`.
//! `g_ant` is an optional lumped antenna gain (0 dB by default).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::constants::{BOLTZMANN, EARTH_MU, EARTH_RADIUS_M, SPEED_OF_LIGHT};
use crate::linalg::{kron, CMatrix, CVector, C64};
use crate::orbits::{dot, norm, slant_geometry, sub, GroundUser, SatelliteId, SatelliteState};
use crate::rng::{splitmix64, SimRng};
use crate::{Error, Result};

/// `m_x * m_y` planar array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaGeometry {
    pub m_x: usize,
    pub m_y: usize,
    pub spacing_over_wavelength: f64,
}

impl UpaGeometry {
    pub fn new(m_x: usize, m_y: usize) -> Result<Self> {
        if m_x == 0 || m_y == 0 {
            return Err(Error::InvalidParameter(format!("UPA {m_x}x{m_y} has no elements")));
        }
        Ok(Self { m_x, m_y, spacing_over_wavelength: 0.5 })
    }

    pub fn elements(&self) -> usize {
        self.m_x * self.m_y
    }
}

/// ULA steering vector: entry `n` is `exp(-j 2 pi (d/lambda) n phi) / sqrt(N)`.
pub fn steering_vector(phi: f64, n: usize, spacing_over_wavelength: f64) -> CVector {
    let scale = 1.0 / (n as f64).sqrt();
    CVector::from_iterator(
        n,
        (0..n).map(|i| C64::from_polar(scale, -2.0 * PI * spacing_over_wavelength * i as f64 * phi)),
    )
}

/// UPA response `a(cos(theta) sin(psi), M_x) (x) a(cos(psi), M_y)`; the
/// `M_x` factor is the outer (slow) index.
pub fn upa_response(theta: f64, psi: f64, geom: &UpaGeometry) -> CVector {
    let ax = steering_vector(theta.cos() * psi.sin(), geom.m_x, geom.spacing_over_wavelength);
    let ay = steering_vector(psi.cos(), geom.m_y, geom.spacing_over_wavelength);
    kron(&ax, &ay)
}

/// Free-space path loss as an amplitude divisor, `4 pi d f / c`.
pub fn fspl(distance: f64, f: f64) -> f64 {
    4.0 * PI * distance * f / SPEED_OF_LIGHT
}

/// Satellite-motion Doppler shift (Hz), `(q / c) f cos(omega)`.
pub fn sat_doppler(q: f64, f: f64, omega: f64) -> f64 {
    q / SPEED_OF_LIGHT * f * omega.cos()
}

/// Shortest channel coherence interval, `c sqrt(R_E + h) / (f sqrt(G M_E) cos(elev))`.
pub fn coherence_time(f: f64, altitude: f64, elevation: f64) -> Result<f64> {
    let cos_el = elevation.cos();
    if cos_el <= 1e-12 {
        return Err(Error::DegenerateGeometry(format!(
            "coherence time undefined at elevation {elevation} rad"
        )));
    }
    if !(f > 0.0) {
        return Err(Error::InvalidParameter(format!("carrier frequency {f} must be positive")));
    }
    Ok(SPEED_OF_LIGHT * (EARTH_RADIUS_M + altitude).sqrt() / (f * EARTH_MU.sqrt() * cos_el))
}

/// Thermal noise power `k_B T B` (W).
pub fn noise_power(temperature: f64, bandwidth: f64) -> f64 {
    BOLTZMANN * temperature * bandwidth
}

/// Per-user draw that, together with `t`, fully determines the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannelParams {
    pub path_count: usize,
    pub rician_kappa: f64,
    pub theta: f64,
    pub psi: f64,
    /// One unit-variance complex gain per NLOS path.
    pub nlos_gains: Vec<C64>,
    pub los_delay: f64,
    pub nlos_delays: Vec<f64>,
    /// Satellite Doppler, shared by the LOS and every NLOS path (Hz).
    pub sat_doppler: f64,
    pub los_user_doppler: f64,
    pub nlos_user_dopplers: Vec<f64>,
    /// Angle between the satellite velocity and its LOS path to the user.
    pub sat_trajectory_angle: f64,
}

impl UserChannelParams {
    fn los_coefficient(&self, t: f64, f: f64) -> C64 {
        let k = self.rician_kappa;
        let doppler = 2.0 * PI * t * (self.sat_doppler + self.los_user_doppler);
        let delay = -2.0 * PI * f * self.los_delay;
        C64::from_polar((k / (1.0 + k)).sqrt(), doppler + delay)
    }

    fn nlos_coefficient(&self, t: f64, f: f64) -> C64 {
        let scale = 1.0 / (self.path_count as f64 * (1.0 + self.rician_kappa)).sqrt();
        let sum: C64 = (0..self.path_count)
            .map(|p| {
                let doppler = 2.0 * PI * t * (self.sat_doppler + self.nlos_user_dopplers[p]);
                let delay = -2.0 * PI * f * self.nlos_delays[p];
                self.nlos_gains[p] * C64::from_polar(1.0, doppler + delay)
            })
            .sum();
        sum * scale
    }
}

pub fn los_component(params: &UserChannelParams, t: f64, f: f64, geom: &UpaGeometry) -> CVector {
    upa_response(params.theta, params.psi, geom) * params.los_coefficient(t, f)
}

/// All NLOS paths share the LOS angles, so this is the LOS array response
/// times a scalar sum over paths.
pub fn nlos_component(params: &UserChannelParams, t: f64, f: f64, geom: &UpaGeometry) -> CVector {
    upa_response(params.theta, params.psi, geom) * params.nlos_coefficient(t, f)
}

/// Geometry of one satellite-user link at a given instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance: f64,
    pub elevation: f64,
    /// Satellite speed (m/s).
    pub sat_speed: f64,
    /// Angle between satellite velocity and the satellite-to-user direction.
    pub trajectory_angle: f64,
    pub user_speed: f64,
}

pub fn link_geometry(sat: &SatelliteState, user: &GroundUser) -> LinkGeometry {
    let slant = slant_geometry(sat, user);
    let los = sub(&user.position, &sat.position);
    let speed = sat.speed();
    let cos_w = if speed > 0.0 && slant.distance > 0.0 {
        (dot(&sat.velocity, &los) / (speed * norm(&los))).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    LinkGeometry {
        distance: slant.distance,
        elevation: slant.elevation,
        sat_speed: speed,
        trajectory_angle: cos_w.acos(),
        user_speed: user.speed,
    }
}

/// Static channel-model settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub frequency: f64,
    pub geometry: UpaGeometry,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub paths_min: usize,
    pub paths_max: usize,
    /// Upper bound of the uniform NLOS excess delay (s).
    pub max_excess_delay: f64,
    /// Random parameters are redrawn every `refresh_period` seconds.
    pub refresh_period: f64,
    pub antenna_gain_db: f64,
}

impl ChannelConfig {
    /// Ranges and carrier of the reference scenario; the refresh period is
    /// the 540 km / 80 deg coherence interval.
    pub fn reference(geometry: UpaGeometry) -> Self {
        let frequency = 2e9;
        Self {
            frequency,
            geometry,
            kappa_min: 81.0,
            kappa_max: 90.0,
            paths_min: 2,
            paths_max: 7,
            max_excess_delay: 1e-6,
            refresh_period: coherence_time(frequency, 540e3, 80f64.to_radians())
                .expect("80 deg is not degenerate"),
            antenna_gain_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.frequency > 0.0
            && self.kappa_min >= 0.0
            && self.kappa_min <= self.kappa_max
            && self.paths_min >= 1
            && self.paths_min <= self.paths_max
            && self.max_excess_delay >= 0.0
            && self.refresh_period > 0.0
            && self.antenna_gain_db.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid channel config {self:?}")))
        }
    }

    pub fn antenna_gain_amplitude(&self) -> f64 {
        10f64.powf(self.antenna_gain_db / 20.0)
    }

    pub fn epoch(&self, t: f64) -> u64 {
        (t / self.refresh_period).floor().max(0.0) as u64
    }
}

/// Draw one user's parameters for the given link geometry.
pub fn draw_user_params<R: Rng + ?Sized>(
    rng: &mut R,
    link: &LinkGeometry,
    cfg: &ChannelConfig,
) -> UserChannelParams {
    let f = cfg.frequency;
    let path_count = rng.random_range(cfg.paths_min..=cfg.paths_max);
    let rician_kappa = cfg.kappa_min + (cfg.kappa_max - cfg.kappa_min) * rng.random::<f64>();
    let lo = link.elevation.clamp(0.0, PI / 2.0);
    let hi = PI - lo;
    let theta = lo + (hi - lo) * rng.random::<f64>();
    let psi = lo + (hi - lo) * rng.random::<f64>();
    let nlos_gains = (0..path_count)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();
    let los_delay = link.distance / SPEED_OF_LIGHT;
    let nlos_delays = (0..path_count).map(|_| los_delay + cfg.max_excess_delay * rng.random::<f64>()).collect();
    let user_max = link.user_speed / SPEED_OF_LIGHT * f;
    let mut user_doppler = || user_max * (2.0 * PI * rng.random::<f64>()).cos();
    let los_user_doppler = user_doppler();
    let nlos_user_dopplers = (0..path_count).map(|_| user_doppler()).collect();
    UserChannelParams {
        path_count,
        rician_kappa,
        theta,
        psi,
        nlos_gains,
        los_delay,
        nlos_delays,
        sat_doppler: sat_doppler(link.sat_speed, f, link.trajectory_angle),
        los_user_doppler,
        nlos_user_dopplers,
        sat_trajectory_angle: link.trajectory_angle,
    }
}

/// The `M x K` channel at one instant plus what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMatrix,
    pub t: f64,
    pub f: f64,
    pub params: Vec<UserChannelParams>,
    pub fspl: Vec<f64>,
}

/// Assemble `H(t)` from frozen parameters and per-user FSPL.
pub fn assemble(
    params: &[UserChannelParams],
    fspl: &[f64],
    t: f64,
    cfg: &ChannelConfig,
) -> CMatrix {
    let m = cfg.geometry.elements();
    let gain = cfg.antenna_gain_amplitude();
    let mut h = CMatrix::zeros(m, params.len());
    for (k, p) in params.iter().enumerate() {
        let coeff = (p.los_coefficient(t, cfg.frequency) + p.nlos_coefficient(t, cfg.frequency)) * (gain / fspl[k]);
        let u = upa_response(p.theta, p.psi, &cfg.geometry);
        h.set_column(k, &(u * coeff));
    }
    h
}

fn epoch_rng(seed: u64, epoch: u64) -> SimRng {
    SimRng::seed_from_u64(splitmix64(seed ^ splitmix64(epoch)))
}

fn links(users: &[GroundUser], sat: &SatelliteState) -> Result<Vec<LinkGeometry>> {
    let links: Vec<_> = users.iter().map(|u| link_geometry(sat, u)).collect();
    if links.iter().any(|l| l.elevation <= 0.0) {
        return Err(Error::NoVisibleSatellite { min_elevation_deg: 0.0 });
    }
    Ok(links)
}

/// Fresh draw at `t`: parameters come from the epoch containing `t`, seeded
/// by `seed`, with ranges taken from the geometry at `t`.
pub fn sample_channel(
    users: &[GroundUser],
    sat: &SatelliteState,
    t: f64,
    cfg: &ChannelConfig,
    seed: u64,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    let links = links(users, sat)?;
    let mut rng = epoch_rng(seed, cfg.epoch(t));
    let params: Vec<_> = links.iter().map(|l| draw_user_params(&mut rng, l, cfg)).collect();
    let fspl: Vec<_> = links.iter().map(|l| fspl(l.distance, cfg.frequency)).collect();
    let h = assemble(&params, &fspl, t, cfg);
    Ok(ChannelRealization { h, t, f: cfg.frequency, params, fspl })
}

/// Stateful channel generator for a simulation run: parameters are drawn at
/// the first instant of each refresh epoch (or after a handover) and held
/// until the next one.
#[derive(Debug, Clone)]
pub struct ChannelProcess {
    cfg: ChannelConfig,
    seed: u64,
    frozen: Option<(u64, SatelliteId, Vec<UserChannelParams>)>,
}

impl ChannelProcess {
    pub fn new(cfg: ChannelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, seed, frozen: None })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn realize(&mut self, users: &[GroundUser], sat: &SatelliteState, t: f64) -> Result<ChannelRealization> {
        let links = links(users, sat)?;
        let epoch = self.cfg.epoch(t);
        let stale = match &self.frozen {
            Some((e, id, p)) => *e != epoch || *id != sat.id || p.len() != users.len(),
            None => true,
        };
        if stale {
            let mut rng = epoch_rng(self.seed, epoch);
            let params = links.iter().map(|l| draw_user_params(&mut rng, l, &self.cfg)).collect();
            self.frozen = Some((epoch, sat.id, params));
        }
        let params = &self.frozen.as_ref().expect("set above").2;
        let fspl: Vec<_> = links.iter().map(|l| fspl(l.distance, self.cfg.frequency)).collect();
        let h = assemble(params, &fspl, t, &self.cfg);
        Ok(ChannelRealization { h, t, f: self.cfg.frequency, params: params.clone(), fspl })
    }
}
