//! Walker constellations on circular Keplerian orbits and the closed-form
//! inter-satellite geometry used for link eligibility.
//!
//! Longitudes are inertial (measured in the frame the orbits are defined in);
//! Earth rotation does not enter any satellite-to-satellite quantity.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants. Defaults: spherical Earth of radius 6371 km,
/// μ = 398600.4418 km³/s², c = 299792.458 km/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConstants {
    pub earth_radius_km: f64,
    pub mu_km3_s2: f64,
    pub light_speed_km_s: f64,
}

impl Default for GeometryConstants {
    fn default() -> Self {
        Self {
            earth_radius_km: 6371.0,
            mu_km3_s2: 398_600.441_8,
            light_speed_km_s: 299_792.458,
        }
    }
}

impl GeometryConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.earth_radius_km) && ok(self.mu_km3_s2) && ok(self.light_speed_km_s) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "geometry constants must be finite and positive: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkerPattern {
    /// Ascending nodes spread over 180°.
    Star,
    /// Ascending nodes spread over 360°.
    Delta,
}

impl WalkerPattern {
    fn raan_spread_deg(self) -> f64 {
        match self {
            WalkerPattern::Star => 180.0,
            WalkerPattern::Delta => 360.0,
        }
    }
}

/// Walker `i: T/P/F` constellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationSpec {
    pub total_satellites: usize,
    pub planes: usize,
    pub phasing: usize,
    pub inclination_deg: f64,
    pub altitude_km: f64,
    pub pattern: WalkerPattern,
}

impl ConstellationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.planes == 0 {
            return Err(Error::Config(
                "constellation needs at least one plane".into(),
            ));
        }
        if self.total_satellites == 0 || !self.total_satellites.is_multiple_of(self.planes) {
            return Err(Error::Config(format!(
                "total_satellites {} is not a positive multiple of planes {}",
                self.total_satellites, self.planes
            )));
        }
        if self.phasing >= self.planes {
            return Err(Error::Config(format!(
                "phasing {} must be below the plane count {}",
                self.phasing, self.planes
            )));
        }
        if !(self.altitude_km.is_finite() && self.altitude_km > 0.0) {
            return Err(Error::Config(format!(
                "altitude_km must be positive, got {}",
                self.altitude_km
            )));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(Error::Config(format!(
                "inclination_deg must lie in [0, 180], got {}",
                self.inclination_deg
            )));
        }
        Ok(())
    }

    pub fn satellites_per_plane(&self) -> usize {
        self.total_satellites / self.planes
    }

    pub fn orbit_radius_km(&self, constants: &GeometryConstants) -> f64 {
        constants.earth_radius_km + self.altitude_km
    }

    /// Mean motion in rad/s.
    pub fn mean_motion(&self, constants: &GeometryConstants) -> f64 {
        let a = self.orbit_radius_km(constants);
        (constants.mu_km3_s2 / (a * a * a)).sqrt()
    }

    pub fn orbital_period_s(&self, constants: &GeometryConstants) -> f64 {
        2.0 * PI / self.mean_motion(constants)
    }

    pub fn circular_speed_km_s(&self, constants: &GeometryConstants) -> f64 {
        (constants.mu_km3_s2 / self.orbit_radius_km(constants)).sqrt()
    }

    /// Uniform sampling grid `0, step, 2·step, …` strictly inside one orbital period.
    pub fn sampling_grid(&self, constants: &GeometryConstants, step_s: f64) -> Result<Vec<f64>> {
        if !(step_s.is_finite() && step_s > 0.0) {
            return Err(Error::Config(format!(
                "sampling step must be positive, got {step_s}"
            )));
        }
        let period = self.orbital_period_s(constants);
        let count = (period / step_s).ceil().max(1.0) as usize;
        Ok((0..count).map(|k| k as f64 * step_s).collect())
    }
}

/// One satellite at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteState {
    pub plane: usize,
    pub slot: usize,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_km: f64,
    pub velocity_km_s: [f64; 3],
}

impl SatelliteState {
    /// Cartesian position reconstructed from latitude, longitude and altitude.
    pub fn position_km(&self, constants: &GeometryConstants) -> [f64; 3] {
        let r = constants.earth_radius_km + self.altitude_km;
        let (lat, lon) = (
            self.latitude_deg.to_radians(),
            self.longitude_deg.to_radians(),
        );
        [
            r * lat.cos() * lon.cos(),
            r * lat.cos() * lon.sin(),
            r * lat.sin(),
        ]
    }

    pub fn speed_km_s(&self) -> f64 {
        norm(self.velocity_km_s)
    }
}

/// Propagates every satellite of the constellation to time `t` (seconds).
///
/// Plane `p` has its ascending node at `p·spread/P`; slot `k` starts at argument
/// of latitude `k·360°/K + p·F·360°/T` and advances with the mean motion.
pub fn build_walker(
    spec: &ConstellationSpec,
    constants: &GeometryConstants,
    t: f64,
) -> Result<Vec<SatelliteState>> {
    spec.validate()?;
    constants.validate()?;
    let k_per_plane = spec.satellites_per_plane();
    let a = spec.orbit_radius_km(constants);
    let n = spec.mean_motion(constants);
    let inc = spec.inclination_deg.to_radians();
    let (sin_i, cos_i) = inc.sin_cos();
    let spread = spec.pattern.raan_spread_deg();

    let mut states = Vec::with_capacity(spec.total_satellites);
    for plane in 0..spec.planes {
        let raan = (plane as f64 * spread / spec.planes as f64).to_radians();
        let (sin_o, cos_o) = raan.sin_cos();
        let phase_offset =
            plane as f64 * spec.phasing as f64 * 360.0 / spec.total_satellites as f64;
        for slot in 0..k_per_plane {
            let u0 = (slot as f64 * 360.0 / k_per_plane as f64 + phase_offset).to_radians();
            let u = (u0 + n * t).rem_euclid(2.0 * PI);
            let (sin_u, cos_u) = u.sin_cos();
            let pos = [
                a * (cos_o * cos_u - sin_o * sin_u * cos_i),
                a * (sin_o * cos_u + cos_o * sin_u * cos_i),
                a * sin_u * sin_i,
            ];
            let v = a * n;
            let vel = [
                v * (-cos_o * sin_u - sin_o * cos_u * cos_i),
                v * (-sin_o * sin_u + cos_o * cos_u * cos_i),
                v * cos_u * sin_i,
            ];
            let latitude = (pos[2] / a).clamp(-1.0, 1.0).asin().to_degrees();
            let mut longitude = pos[1].atan2(pos[0]).to_degrees();
            if longitude <= -180.0 {
                longitude += 360.0;
            }
            states.push(SatelliteState {
                plane,
                slot,
                latitude_deg: latitude,
                longitude_deg: longitude,
                altitude_km: spec.altitude_km,
                velocity_km_s: vel,
            });
        }
    }
    Ok(states)
}

/// Geocentric angle between two sub-satellite points, in radians, in `[0, π]`.
pub fn geocentric_angle(u: &SatelliteState, v: &SatelliteState) -> f64 {
    geocentric_angle_deg(
        u.latitude_deg,
        u.longitude_deg,
        v.latitude_deg,
        v.longitude_deg,
    )
}

pub fn geocentric_angle_deg(lat_u: f64, lon_u: f64, lat_v: f64, lon_v: f64) -> f64 {
    let (lu, lv) = (lat_u.to_radians(), lat_v.to_radians());
    let dlon = (lon_u - lon_v).to_radians();
    // Haversine form of arccos(sin·sin + cos·cos·cos Δλ); stays accurate near 0.
    let hav = ((lu - lv) / 2.0).sin().powi(2) + lu.cos() * lv.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * hav.clamp(0.0, 1.0).sqrt().asin()
}

/// Straight-line distance between two satellites separated by geocentric angle `phi`.
pub fn chord_distance(h_u: f64, h_v: f64, phi: f64, earth_radius_km: f64) -> f64 {
    let ru = h_u + earth_radius_km;
    let rv = h_v + earth_radius_km;
    (ru * ru + rv * rv - 2.0 * ru * rv * phi.cos())
        .max(0.0)
        .sqrt()
}

pub fn los_distance(u: &SatelliteState, v: &SatelliteState, constants: &GeometryConstants) -> f64 {
    chord_distance(
        u.altitude_km,
        v.altitude_km,
        geocentric_angle(u, v),
        constants.earth_radius_km,
    )
}

/// Longest line of sight that still clears the Earth's surface.
pub fn max_slant_range(h_u: f64, h_v: f64, earth_radius_km: f64) -> f64 {
    (h_u * (h_u + 2.0 * earth_radius_km)).sqrt() + (h_v * (h_v + 2.0 * earth_radius_km)).sqrt()
}

/// Doppler shift in Hz for a relative speed `psi` (km/s).
pub fn doppler_from_speed(psi_km_s: f64, carrier_hz: f64, light_speed_km_s: f64) -> f64 {
    psi_km_s.abs() * carrier_hz / light_speed_km_s
}

/// Relative speed projected on the line of sight, `|(v_u − v_v)·d̂|`.
pub fn line_of_sight_speed(
    u: &SatelliteState,
    v: &SatelliteState,
    constants: &GeometryConstants,
) -> Result<f64> {
    let pu = u.position_km(constants);
    let pv = v.position_km(constants);
    let d = sub(pv, pu);
    let len = norm(d);
    if len <= 1e-9 * (constants.earth_radius_km + u.altitude_km.max(v.altitude_km)) {
        return Err(Error::CoincidentSatellites(
            u.plane, u.slot, v.plane, v.slot,
        ));
    }
    let rel = sub(u.velocity_km_s, v.velocity_km_s);
    Ok((dot(rel, d) / len).abs())
}

/// Magnitude of the full relative velocity, without projection.
pub fn relative_speed(u: &SatelliteState, v: &SatelliteState) -> f64 {
    norm(sub(u.velocity_km_s, v.velocity_km_s))
}

pub fn doppler_shift(
    u: &SatelliteState,
    v: &SatelliteState,
    carrier_hz: f64,
    constants: &GeometryConstants,
) -> Result<f64> {
    let projected = line_of_sight_speed(u, v, constants)?;
    log::trace!(
        "doppler ({},{})-({},{}): projected {projected:.6} km/s, unprojected {:.6} km/s",
        u.plane,
        u.slot,
        v.plane,
        v.slot,
        relative_speed(u, v)
    );
    Ok(doppler_from_speed(
        projected,
        carrier_hz,
        constants.light_speed_km_s,
    ))
}

/// `plane,slot,t,lat,lon,alt` rows with a header line.
pub fn positions_csv(states: &[SatelliteState], t: f64) -> String {
    let mut out = String::from("plane,slot,t_s,latitude_deg,longitude_deg,altitude_km\n");
    for s in states {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.plane, s.slot, t, s.latitude_deg, s.longitude_deg, s.altitude_km
        );
    }
    out
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}
