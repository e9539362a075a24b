//! Constellation geometry and serving-satellite selection.
//!
//! Satellites fly circular Keplerian orbits arranged as Walker-delta shells:
//! each layer has `plane_count` planes with uniformly spaced ascending nodes
//! and `sats_per_plane` satellites uniformly phased within each plane.
//! Positions are expressed in an Earth-fixed frame whose x axis points at the
//! prime meridian; the frame rotates at the sidereal rate unless rotation is
//! switched off.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{EARTH_MU, EARTH_RADIUS_M, EARTH_ROTATION_RATE};
use crate::{Error, Result};

/// One Walker shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub plane_count: u32,
    pub sats_per_plane: u32,
    /// Altitude above the spherical Earth (m).
    pub altitude: f64,
    /// Inclination (rad).
    pub inclination: f64,
    /// RAAN of plane 0 (rad).
    #[serde(default)]
    pub raan_offset: f64,
    /// Argument of latitude of slot 0 in plane 0 at t = 0 (rad).
    #[serde(default)]
    pub phase_offset: f64,
    /// Walker phasing factor F: plane p is advanced by `2 pi F p / T`.
    #[serde(default)]
    pub phasing: u32,
}

impl LayerSpec {
    pub fn radius(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude
    }

    /// Mean motion (rad/s).
    pub fn mean_motion(&self) -> f64 {
        (EARTH_MU / self.radius().powi(3)).sqrt()
    }

    /// Orbital period (s).
    pub fn period(&self) -> f64 {
        2.0 * PI / self.mean_motion()
    }

    /// Circular orbital speed (m/s).
    pub fn orbital_speed(&self) -> f64 {
        (EARTH_MU / self.radius()).sqrt()
    }

    pub fn satellite_count(&self) -> usize {
        self.plane_count as usize * self.sats_per_plane as usize
    }

    fn validate(&self, index: usize) -> Result<()> {
        let ok = self.plane_count >= 1
            && self.sats_per_plane >= 1
            && self.altitude > 0.0
            && (0.0..=PI).contains(&self.inclination);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("constellation layer {index} is invalid: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationSpec {
    pub layers: Vec<LayerSpec>,
    /// Rotate the Earth-fixed frame at the sidereal rate.
    #[serde(default = "default_true")]
    pub earth_rotation: bool,
}

fn default_true() -> bool {
    true
}

/// Default inter-plane phasing factor for every shell.
pub const DEFAULT_PHASING: u32 = 5;

impl Default for ConstellationSpec {
    /// The four-layer Starlink-like constellation.
    fn default() -> Self {
        let layer = |planes, sats, alt_km: f64, inc_deg: f64| LayerSpec {
            plane_count: planes,
            sats_per_plane: sats,
            altitude: alt_km * 1e3,
            inclination: inc_deg.to_radians(),
            raan_offset: 0.0,
            phase_offset: 0.0,
            phasing: DEFAULT_PHASING,
        };
        Self {
            layers: vec![
                layer(72, 22, 550.0, 53.0),
                layer(36, 20, 570.0, 70.0),
                layer(6, 58, 560.0, 97.6),
                layer(72, 22, 540.0, 53.2),
            ],
            earth_rotation: true,
        }
    }
}

impl ConstellationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidParameter("constellation has no layers".into()));
        }
        self.layers.iter().enumerate().try_for_each(|(i, l)| l.validate(i))
    }

    pub fn satellite_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::satellite_count).sum()
    }
}

/// `(layer, plane, slot)`; ordering is lexicographic and breaks distance ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SatelliteId {
    pub layer: u16,
    pub plane: u16,
    pub slot: u16,
}

impl fmt::Display for SatelliteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}-P{}-S{}", self.layer, self.plane, self.slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub id: SatelliteId,
    /// Earth-fixed position (m).
    pub position: [f64; 3],
    /// Inertial orbital velocity resolved along the Earth-fixed axes (m/s).
    pub velocity: [f64; 3],
}

impl SatelliteState {
    pub fn speed(&self) -> f64 {
        norm(&self.velocity)
    }
}

/// Precomputed per-satellite orbit constants; `propagate` only needs two
/// trig evaluations per satellite.
#[derive(Debug, Clone)]
pub struct Constellation {
    spec: ConstellationSpec,
    sats: Vec<OrbitSlot>,
}

#[derive(Debug, Clone)]
struct OrbitSlot {
    id: SatelliteId,
    radius: f64,
    mean_motion: f64,
    arg_lat0: f64,
    cos_raan: f64,
    sin_raan: f64,
    cos_inc: f64,
    sin_inc: f64,
}

impl Constellation {
    pub fn new(spec: ConstellationSpec) -> Result<Self> {
        spec.validate()?;
        let mut sats = Vec::with_capacity(spec.satellite_count());
        for (li, layer) in spec.layers.iter().enumerate() {
            let planes = layer.plane_count as f64;
            let per_plane = layer.sats_per_plane as f64;
            let total = planes * per_plane;
            let (sin_inc, cos_inc) = layer.inclination.sin_cos();
            for p in 0..layer.plane_count {
                let raan = layer.raan_offset + 2.0 * PI * p as f64 / planes;
                let (sin_raan, cos_raan) = raan.sin_cos();
                for s in 0..layer.sats_per_plane {
                    let arg_lat0 = layer.phase_offset
                        + 2.0 * PI * s as f64 / per_plane
                        + 2.0 * PI * layer.phasing as f64 * p as f64 / total;
                    sats.push(OrbitSlot {
                        id: SatelliteId { layer: li as u16, plane: p as u16, slot: s as u16 },
                        radius: layer.radius(),
                        mean_motion: layer.mean_motion(),
                        arg_lat0,
                        cos_raan,
                        sin_raan,
                        cos_inc,
                        sin_inc,
                    });
                }
            }
        }
        Ok(Self { spec, sats })
    }

    pub fn spec(&self) -> &ConstellationSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.sats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sats.is_empty()
    }

    pub fn layer(&self, id: SatelliteId) -> &LayerSpec {
        &self.spec.layers[id.layer as usize]
    }

    /// States of every satellite at time `t` (s), ordered by id.
    pub fn propagate(&self, t: f64) -> Vec<SatelliteState> {
        let earth_angle = if self.spec.earth_rotation { EARTH_ROTATION_RATE * t } else { 0.0 };
        let (sin_e, cos_e) = earth_angle.sin_cos();
        self.sats
            .iter()
            .map(|o| {
                let (sin_u, cos_u) = (o.arg_lat0 + o.mean_motion * t).sin_cos();
                let r = o.radius;
                let v = r * o.mean_motion;
                let pos_eci = [
                    r * (o.cos_raan * cos_u - o.sin_raan * sin_u * o.cos_inc),
                    r * (o.sin_raan * cos_u + o.cos_raan * sin_u * o.cos_inc),
                    r * sin_u * o.sin_inc,
                ];
                let vel_eci = [
                    v * (-o.cos_raan * sin_u - o.sin_raan * cos_u * o.cos_inc),
                    v * (-o.sin_raan * sin_u + o.cos_raan * cos_u * o.cos_inc),
                    v * cos_u * o.sin_inc,
                ];
                SatelliteState {
                    id: o.id,
                    position: rotate_z(pos_eci, cos_e, sin_e),
                    velocity: rotate_z(vel_eci, cos_e, sin_e),
                }
            })
            .collect()
    }
}

/// Rotate an inertial vector into the Earth-fixed frame (by `-angle` about z).
fn rotate_z(v: [f64; 3], cos_a: f64, sin_a: f64) -> [f64; 3] {
    [cos_a * v[0] + sin_a * v[1], -sin_a * v[0] + cos_a * v[1], v[2]]
}

/// States of every satellite of `spec` at time `t`.
pub fn propagate(spec: &ConstellationSpec, t: f64) -> Result<Vec<SatelliteState>> {
    Ok(Constellation::new(spec.clone())?.propagate(t))
}

/// A point on the ground (spherical Earth, zero altitude).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundUser {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
    pub position: [f64; 3],
    /// Speed used for the user-motion Doppler (m/s).
    pub speed: f64,
}

impl GroundUser {
    pub fn new(latitude: f64, longitude: f64, speed: f64) -> Self {
        let r = EARTH_RADIUS_M;
        let (sin_lat, cos_lat) = latitude.sin_cos();
        let (sin_lon, cos_lon) = longitude.sin_cos();
        Self {
            latitude,
            longitude,
            altitude: 0.0,
            position: [r * cos_lat * cos_lon, r * cos_lat * sin_lon, r * sin_lat],
            speed,
        }
    }

    /// The point at great-circle `distance` (m) from `self` along `bearing`
    /// (rad, clockwise from north).
    pub fn offset(&self, distance: f64, bearing: f64, speed: f64) -> Self {
        let delta = distance / EARTH_RADIUS_M;
        let (sin_lat, cos_lat) = self.latitude.sin_cos();
        let lat2 = (sin_lat * delta.cos() + cos_lat * delta.sin() * bearing.cos()).asin();
        let lon2 = self.longitude
            + (bearing.sin() * delta.sin() * cos_lat).atan2(delta.cos() - sin_lat * lat2.sin());
        Self::new(lat2, lon2, speed)
    }

    /// Great-circle distance to another ground point (m).
    pub fn ground_distance(&self, other: &GroundUser) -> f64 {
        let c = dot(&self.position, &other.position) / (norm(&self.position) * norm(&other.position));
        EARTH_RADIUS_M * c.clamp(-1.0, 1.0).acos()
    }
}

/// `count` users uniformly distributed over the disc of `radius` (m) around `center`.
pub fn place_users<R: Rng + ?Sized>(
    center: &GroundUser,
    radius: f64,
    count: usize,
    speed: f64,
    rng: &mut R,
) -> Vec<GroundUser> {
    (0..count)
        .map(|_| {
            let d = radius * rng.random::<f64>().sqrt();
            let bearing = 2.0 * PI * rng.random::<f64>();
            center.offset(d, bearing, speed)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlantGeometry {
    /// Satellite-to-point distance (m).
    pub distance: f64,
    /// Elevation above the local horizon plane (rad).
    pub elevation: f64,
}

pub fn slant_geometry(sat: &SatelliteState, point: &GroundUser) -> SlantGeometry {
    let d = sub(&sat.position, &point.position);
    let distance = norm(&d);
    let up = norm(&point.position);
    if up == 0.0 || distance == 0.0 {
        return SlantGeometry { distance, elevation: std::f64::consts::FRAC_PI_2 };
    }
    let p = &point.position;
    let along = dot(&d, p) / up;
    let cross = [d[1] * p[2] - d[2] * p[1], d[2] * p[0] - d[0] * p[2], d[0] * p[1] - d[1] * p[0]];
    let across = norm(&cross) / up;
    SlantGeometry { distance, elevation: along.atan2(across) }
}

/// Slant range for a satellite at `altitude` seen at `elevation` from the
/// ground, from the law of cosines on the Earth-centre triangle.
pub fn slant_range(altitude: f64, elevation: f64) -> f64 {
    let r = EARTH_RADIUS_M;
    let s = elevation.sin();
    -r * s + ((r * s).powi(2) + 2.0 * r * altitude + altitude * altitude).sqrt()
}

/// Serving-satellite state for the distance-threshold handover rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverPolicy {
    /// Relative distance improvement required before switching, in [0, 1).
    pub epsilon: f64,
    /// Candidates below this elevation at the coverage centre are ignored.
    pub min_elevation: f64,
    pub serving: Option<SatelliteId>,
    pub handover_count: u64,
}

/// What happened at one evaluation of the handover rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoverEvent {
    pub serving: SatelliteId,
    /// Index of the serving satellite in the slice passed in.
    pub serving_index: usize,
    pub geometry: SlantGeometry,
    pub handed_over: bool,
}

impl HandoverPolicy {
    pub fn new(epsilon: f64, min_elevation: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!("handover epsilon {epsilon} not in [0, 1)")));
        }
        Ok(Self { epsilon, min_elevation, serving: None, handover_count: 0 })
    }

    /// One step of the selection rule: find the nearest visible satellite
    /// `S(t)`; switch to it only if it differs from the current one and
    /// `d(S(t)) / d(serving) < 1 - epsilon`. The first call just assigns.
    pub fn select_and_handover(
        &mut self,
        sats: &[SatelliteState],
        center: &GroundUser,
    ) -> Result<HandoverEvent> {
        let mut nearest: Option<(usize, SlantGeometry)> = None;
        for (i, sat) in sats.iter().enumerate() {
            let g = slant_geometry(sat, center);
            if g.elevation < self.min_elevation {
                continue;
            }
            let better = match nearest {
                None => true,
                Some((j, best)) => {
                    g.distance < best.distance || (g.distance == best.distance && sat.id < sats[j].id)
                }
            };
            if better {
                nearest = Some((i, g));
            }
        }
        let (cand_idx, cand_geom) = nearest.ok_or(Error::NoVisibleSatellite {
            min_elevation_deg: self.min_elevation.to_degrees(),
        })?;
        let candidate = sats[cand_idx].id;

        let current = self.serving.and_then(|id| sats.iter().position(|s| s.id == id));
        let Some(cur_idx) = current else {
            // First contact (or the serving satellite left the catalogue).
            let handed_over = self.serving.is_some();
            if handed_over {
                self.handover_count += 1;
            }
            self.serving = Some(candidate);
            return Ok(HandoverEvent {
                serving: candidate,
                serving_index: cand_idx,
                geometry: cand_geom,
                handed_over,
            });
        };

        let cur_geom = slant_geometry(&sats[cur_idx], center);
        if candidate != sats[cur_idx].id && cand_geom.distance / cur_geom.distance < 1.0 - self.epsilon {
            self.serving = Some(candidate);
            self.handover_count += 1;
            Ok(HandoverEvent { serving: candidate, serving_index: cand_idx, geometry: cand_geom, handed_over: true })
        } else {
            Ok(HandoverEvent {
                serving: sats[cur_idx].id,
                serving_index: cur_idx,
                geometry: cur_geom,
                handed_over: false,
            })
        }
    }
}

/// One row of a constellation trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub serving: SatelliteId,
    pub distance: f64,
    pub elevation: f64,
    pub handover: bool,
}

/// Run the handover rule on a uniform time grid `t0, t0 + dt, ...` covering
/// `[t0, t0 + duration)`.
pub fn handover_trace(
    constellation: &Constellation,
    policy: &mut HandoverPolicy,
    center: &GroundUser,
    t0: f64,
    duration: f64,
    dt: f64,
) -> Result<Vec<TraceRow>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("trace step {dt} must be positive")));
    }
    let steps = (duration / dt).round() as usize;
    let mut rows = Vec::with_capacity(steps);
    for n in 0..steps {
        let t = t0 + n as f64 * dt;
        let sats = constellation.propagate(t);
        let ev = policy.select_and_handover(&sats, center)?;
        rows.push(TraceRow {
            t,
            serving: ev.serving,
            distance: ev.geometry.distance,
            elevation: ev.geometry.elevation,
            handover: ev.handed_over,
        });
    }
    Ok(rows)
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn single_layer(alt_km: f64) -> ConstellationSpec {
        ConstellationSpec {
            layers: vec![LayerSpec {
                plane_count: 3,
                sats_per_plane: 4,
                altitude: alt_km * 1e3,
                inclination: 53f64.to_radians(),
                raan_offset: 0.1,
                phase_offset: 0.2,
                phasing: 1,
            }],
            earth_rotation: false,
        }
    }

    fn sat_at(id: (u16, u16, u16), position: [f64; 3]) -> SatelliteState {
        SatelliteState {
            id: SatelliteId { layer: id.0, plane: id.1, slot: id.2 },
            position,
            velocity: [0.0; 3],
        }
    }

    /// A satellite directly above `center` at the given slant distance.
    fn overhead(center: &GroundUser, id: (u16, u16, u16), distance: f64) -> SatelliteState {
        let up = center.position.map(|x| x / EARTH_RADIUS_M);
        sat_at(id, [0, 1, 2].map(|i| center.position[i] + distance * up[i]))
    }

    #[test]
    fn period_and_speed_at_550_km() {
        let layer = &ConstellationSpec::default().layers[0];
        assert!((layer.period() - 5731.0).abs() < 1.0, "{}", layer.period());
        assert!((layer.orbital_speed() - 7590.0).abs() < 5.0, "{}", layer.orbital_speed());
    }

    #[test]
    fn default_is_four_layer_table() {
        let spec = ConstellationSpec::default();
        let counts: Vec<_> = spec.layers.iter().map(|l| (l.plane_count, l.sats_per_plane)).collect();
        assert_eq!(counts, vec![(72, 22), (36, 20), (6, 58), (72, 22)]);
        assert_eq!(spec.satellite_count(), 1584 + 720 + 348 + 1584);
        assert!((spec.layers[2].inclination.to_degrees() - 97.6).abs() < 1e-12);
    }

    #[test]
    fn states_respect_radius_and_speed() {
        let c = Constellation::new(ConstellationSpec::default()).unwrap();
        for t in [0.0, 17.3, 3600.0] {
            for s in c.propagate(t) {
                let layer = c.layer(s.id);
                assert!((norm(&s.position) - layer.radius()).abs() < 1.0);
                assert!((s.speed() - layer.orbital_speed()).abs() < 0.1);
            }
        }
    }

    #[test]
    fn orbit_is_periodic_without_earth_rotation() {
        let spec = single_layer(550.0);
        let period = spec.layers[0].period();
        let a = propagate(&spec, 0.0).unwrap();
        let b = propagate(&spec, period).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(norm(&sub(&x.position, &y.position)) < 1.0);
        }
    }

    #[test]
    fn propagate_is_bit_deterministic() {
        let spec = ConstellationSpec::default();
        assert_eq!(propagate(&spec, 123.456).unwrap(), propagate(&spec, 123.456).unwrap());
    }

    #[test]
    fn invalid_layers_are_rejected() {
        let mut spec = single_layer(550.0);
        spec.layers[0].inclination = 4.0;
        assert!(Constellation::new(spec).is_err());
        let mut spec = single_layer(550.0);
        spec.layers[0].plane_count = 0;
        assert!(Constellation::new(spec).is_err());
    }

    #[test]
    fn zenith_and_horizon_geometry() {
        let center = GroundUser::new(0.3, -0.2, 0.0);
        let g = slant_geometry(&overhead(&center, (0, 0, 0), 550e3), &center);
        assert!((g.distance - 550e3).abs() < 1e-6);
        assert!((g.elevation - PI / 2.0).abs() < 1e-9);

        // A point displaced along the local horizon (east direction).
        let east = [-center.longitude.sin(), center.longitude.cos(), 0.0];
        let p = [0, 1, 2].map(|i| center.position[i] + 1000e3 * east[i]);
        let g = slant_geometry(&sat_at((0, 0, 0), p), &center);
        assert!(g.elevation.abs() < 1e-12);
    }

    #[test]
    fn slant_range_at_80_degrees() {
        let el = 80f64.to_radians();
        let d = slant_range(550e3, el);
        // Bisection on |sat - ground| along the elevation ray.
        let r = EARTH_RADIUS_M;
        let (mut lo, mut hi) = (0.0, 5000e3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let x = mid * el.cos();
            let y = r + mid * el.sin();
            if (x * x + y * y).sqrt() < r + 550e3 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((d - lo).abs() < 1e-3, "{d} vs {lo}");
        assert!((d - 558.1e3).abs() < 0.5e3, "{d}");
    }

    #[test]
    fn user_position_matches_geodetic() {
        let u = GroundUser::new(54.526f64.to_radians(), (-3.3f64).to_radians(), 1.0);
        assert!((norm(&u.position) - EARTH_RADIUS_M).abs() < 1.0);
        let lat = (u.position[2] / norm(&u.position)).asin();
        let lon = u.position[1].atan2(u.position[0]);
        assert!((lat - u.latitude).abs() < 1e-12);
        assert!((lon - u.longitude).abs() < 1e-12);
    }

    #[test]
    fn users_fall_inside_the_disc() {
        let center = GroundUser::new(54.526f64.to_radians(), (-3.3f64).to_radians(), 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for u in place_users(&center, 40e3, 200, 1.0, &mut rng) {
            assert!(center.ground_distance(&u) <= 40e3 + 1.0);
        }
    }

    fn handover_case(eps: f64, serving_km: f64, candidate_km: f64) -> (bool, u64) {
        let center = GroundUser::new(0.9, 0.1, 0.0);
        let a = overhead(&center, (0, 0, 0), serving_km * 1e3);
        let mut policy = HandoverPolicy::new(eps, 0.0).unwrap();
        policy.select_and_handover(&[a], &center).unwrap();
        let b = overhead(&center, (0, 0, 1), candidate_km * 1e3);
        let ev = policy.select_and_handover(&[a, b], &center).unwrap();
        (ev.handed_over, policy.handover_count)
    }

    #[test]
    fn handover_threshold_examples() {
        assert_eq!(handover_case(0.0, 600.0, 599.0), (true, 1));
        assert_eq!(handover_case(0.1, 600.0, 570.0), (false, 0));
        assert_eq!(handover_case(0.1, 600.0, 500.0), (true, 1));
    }

    #[test]
    fn first_assignment_is_not_a_handover() {
        let center = GroundUser::new(0.9, 0.1, 0.0);
        let mut policy = HandoverPolicy::new(0.0, 0.0).unwrap();
        let ev = policy.select_and_handover(&[overhead(&center, (0, 0, 0), 600e3)], &center).unwrap();
        assert!(!ev.handed_over);
        assert_eq!(policy.handover_count, 0);
        assert!(policy.serving.is_some());
    }

    #[test]
    fn ties_prefer_lowest_id() {
        let center = GroundUser::new(0.9, 0.1, 0.0);
        let far = overhead(&center, (1, 0, 0), 600e3);
        let near = overhead(&center, (0, 5, 0), 600e3);
        let mut policy = HandoverPolicy::new(0.0, 0.0).unwrap();
        let ev = policy.select_and_handover(&[far, near], &center).unwrap();
        assert_eq!(ev.serving, near.id);
    }

    #[test]
    fn empty_visibility_is_an_error() {
        let center = GroundUser::new(0.9, 0.1, 0.0);
        let mut policy = HandoverPolicy::new(0.0, 89.9f64.to_radians()).unwrap();
        // Far off to the side: low elevation.
        let east = [-center.longitude.sin(), center.longitude.cos(), 0.0];
        let p = [0, 1, 2].map(|i| center.position[i] * 1.05 + 2000e3 * east[i]);
        let err = policy.select_and_handover(&[sat_at((0, 0, 0), p)], &center).unwrap_err();
        assert!(matches!(err, Error::NoVisibleSatellite { .. }));
        assert!(HandoverPolicy::new(1.0, 0.0).is_err());
    }

    #[test]
    fn zero_epsilon_always_serves_the_nearest() {
        let c = Constellation::new(ConstellationSpec::default()).unwrap();
        let center = GroundUser::new(54.526f64.to_radians(), (-3.3f64).to_radians(), 0.0);
        let mut policy = HandoverPolicy::new(0.0, 25f64.to_radians()).unwrap();
        for n in 0..60 {
            let sats = c.propagate(n as f64 * 2.0);
            let ev = policy.select_and_handover(&sats, &center).unwrap();
            let min = sats
                .iter()
                .map(|s| slant_geometry(s, &center))
                .filter(|g| g.elevation >= policy.min_elevation)
                .map(|g| g.distance)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(ev.geometry.distance, min);
        }
    }
}
