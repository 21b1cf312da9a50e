//! Distance distributions of the serving and interfering links, and random
//! constellation and user samplers.
//!
//! Coordinates are Earth-centred with the serving-area centre `O` on the
//! positive z axis, so the typical satellite sits at `(0, 0, R_S)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::DerivedConstants;
use crate::error::{Error, Result};
use crate::numerics::integrate;

pub type Point = [f64; 3];

/// Attempts allowed when conditioning a snapshot on a visible interferer.
pub const REJECTION_BUDGET: usize = 10_000;

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `f_L(l) = 2l / R_T^2` on `[L_min, L_max]`.
pub fn pdf_link_distance(l: f64, k: &DerivedConstants) -> f64 {
    if l < k.l_min_m || l > k.l_max_m {
        return 0.0;
    }
    2.0 * l / (k.serving_radius_m * k.serving_radius_m)
}

pub fn cdf_link_distance(l: f64, k: &DerivedConstants) -> f64 {
    if l >= k.l_max_m {
        return 1.0;
    }
    let h = k.altitude_m;
    ((l * l - h * h) / (k.serving_radius_m * k.serving_radius_m)).clamp(0.0, 1.0)
}

fn check_rank(i: usize, n: usize) -> Result<()> {
    if i == 0 || i > n {
        return Err(Error::RankOutOfRange { rank: i, n });
    }
    Ok(())
}

/// Density of the `i`-th smallest of `n` i.i.d. serving-link distances.
pub fn pdf_ordered_link_distance(l: f64, i: usize, n: usize, k: &DerivedConstants) -> Result<f64> {
    check_rank(i, n)?;
    let f = pdf_link_distance(l, k);
    if f == 0.0 {
        return Ok(0.0);
    }
    let cdf = cdf_link_distance(l, k);
    let w = n as f64 * binomial(n - 1, i - 1);
    Ok(w * cdf.powi(i as i32 - 1) * (1.0 - cdf).powi((n - i) as i32) * f)
}

/// `P(L_(i) <= l)`: at least `i` of the `n` distances are below `l`.
pub fn cdf_ordered_link_distance(l: f64, i: usize, n: usize, k: &DerivedConstants) -> Result<f64> {
    check_rank(i, n)?;
    let f = cdf_link_distance(l, k);
    Ok((i..=n).map(|j| binomial(n, j) * f.powi(j as i32) * (1.0 - f).powi((n - j) as i32)).sum())
}

/// `E[L_(i)]`, the mean ordered distance.
pub fn mean_ordered_link_distance(i: usize, n: usize, k: &DerivedConstants) -> Result<f64> {
    check_rank(i, n)?;
    let est = integrate(
        |l| l * pdf_ordered_link_distance(l, i, n, k).unwrap_or(0.0),
        k.l_min_m,
        k.l_max_m,
        1e-12,
    )?;
    Ok(est.value)
}

/// Nearest-interferer distance density.
///
/// `conditional = true` conditions on at least one interfering satellite
/// above the horizon and integrates to one over `[R_min, R_max]`; otherwise the
/// density carries the mass `1 - exp(-lambda 2 pi (R_S - R_E) R_S)`.
pub fn pdf_nearest_interferer(r: f64, k: &DerivedConstants, conditional: bool) -> f64 {
    if r < k.r_min_m || r > k.r_max_m {
        return 0.0;
    }
    let c = k.cap_rate();
    let h = k.r_min_m;
    let unnormalised = 2.0 * c * r * (-c * (r * r - h * h)).exp();
    if conditional {
        unnormalised / k.prob_interferer_visible()
    } else {
        unnormalised
    }
}

/// Conditional CDF of the nearest-interferer distance.
pub fn cdf_nearest_interferer(r: f64, k: &DerivedConstants) -> f64 {
    let h = k.r_min_m;
    let r = r.clamp(k.r_min_m, k.r_max_m);
    (-(-k.cap_rate() * (r * r - h * h)).exp_m1() / k.prob_interferer_visible()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "SPPP")]
    Sppp,
    WalkerDelta,
}

impl ModelTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Sppp => "SPPP",
            ModelTag::WalkerDelta => "WalkerDelta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkerDeltaParams {
    pub total_satellites: u32,
    pub num_planes: u32,
    pub inclination_deg: f64,
    pub phasing_factor: u32,
}

impl WalkerDeltaParams {
    /// 53 degrees, phasing factor 1 and `round(sqrt(N))` planes, adjusted
    /// downward to the nearest divisor of `N`.
    pub fn default_for(total: u32) -> Self {
        let mut planes = ((total as f64).sqrt().round() as u32).max(1);
        while total % planes != 0 {
            planes -= 1;
        }
        WalkerDeltaParams { total_satellites: total, num_planes: planes, inclination_deg: 53.0, phasing_factor: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_satellites == 0 || self.num_planes == 0 || self.total_satellites % self.num_planes != 0 {
            return Err(Error::Config {
                field: "num_planes",
                reason: format!("{} satellites cannot be split into {} planes", self.total_satellites, self.num_planes),
            });
        }
        if !(self.inclination_deg > 0.0 && self.inclination_deg <= 90.0) {
            return Err(Error::Config { field: "inclination_deg", reason: "must lie in (0, 90]".into() });
        }
        Ok(())
    }

    pub fn per_plane(&self) -> u32 {
        self.total_satellites / self.num_planes
    }

    /// Unrotated grid positions on a shell of the given radius, plane by plane.
    pub fn grid(&self, radius: f64) -> Vec<Point> {
        let planes = self.num_planes as usize;
        let per = self.per_plane() as usize;
        let inc = self.inclination_deg.to_radians();
        let n = self.total_satellites as f64;
        let mut out = Vec::with_capacity(planes * per);
        for p in 0..planes {
            let raan = 2.0 * PI * p as f64 / planes as f64;
            let (so, co) = raan.sin_cos();
            for s in 0..per {
                let u = 2.0 * PI * s as f64 / per as f64 + 2.0 * PI * (self.phasing_factor as f64) * p as f64 / n;
                let (su, cu) = u.sin_cos();
                out.push([
                    radius * (cu * co - su * inc.cos() * so),
                    radius * (cu * so + su * inc.cos() * co),
                    radius * su * inc.sin(),
                ]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstellationModel {
    Sppp,
    WalkerDelta(WalkerDeltaParams),
}

impl ConstellationModel {
    pub fn tag(&self) -> ModelTag {
        match self {
            ConstellationModel::Sppp => ModelTag::Sppp,
            ConstellationModel::WalkerDelta(_) => ModelTag::WalkerDelta,
        }
    }
}

/// How user positions are drawn inside the serving area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtSampling {
    /// Uniform on a planar disk of radius `R_T`; slant distance `sqrt(H^2 + rho^2)`.
    #[default]
    PlanarDisk,
    /// Uniform on the spherical cap of geodesic radius `R_T`; exact slant distance.
    SphericalCap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtPosition {
    pub position: Point,
    /// Distance to the typical satellite.
    pub slant_m: f64,
}

/// One static snapshot of satellites and users.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSample {
    pub satellite_positions: Vec<Point>,
    pub typical_index: usize,
    pub ut_positions: Vec<UtPosition>,
    pub model_tag: ModelTag,
    /// Draws needed to satisfy the visibility condition (1 for Walker-Delta).
    pub attempts: usize,
}

pub fn norm(p: &Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    norm(&d)
}

fn uniform_unit<R: Rng + ?Sized>(rng: &mut R) -> Point {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let az = 2.0 * PI * rng.random::<f64>();
    let rho = (1.0 - z * z).max(0.0).sqrt();
    [rho * az.cos(), rho * az.sin(), z]
}

/// Uniform point on the cap of half-angle `half_angle` around +z, at the given radius.
fn uniform_in_cap<R: Rng + ?Sized>(rng: &mut R, radius: f64, half_angle: f64) -> Point {
    let cmin = half_angle.cos();
    let z = 1.0 - rng.random::<f64>() * (1.0 - cmin);
    let az = 2.0 * PI * rng.random::<f64>();
    let rho = (1.0 - z * z).max(0.0).sqrt();
    [radius * rho * az.cos(), radius * rho * az.sin(), radius * z]
}

/// Poisson-distributed satellite count with the given mean.
pub(crate) fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

/// Sub-satellite central-angle radius of the horizon seen from the shell: `acos(R_E / R_S)`.
pub fn horizon_angle(k: &DerivedConstants) -> f64 {
    (k.earth_radius_m / k.orbit_radius_m).acos()
}

/// Interferers of the SPPP inside the cap of half-angle `half_angle` around the zenith.
pub(crate) fn sppp_in_cap<R: Rng + ?Sized>(rng: &mut R, k: &DerivedConstants, half_angle: f64) -> Vec<Point> {
    let rs = k.orbit_radius_m;
    let area = 2.0 * PI * rs * rs * (1.0 - half_angle.cos());
    let count = poisson_count(rng, k.density_per_m2 * area);
    (0..count).map(|_| uniform_in_cap(rng, rs, half_angle)).collect()
}

fn quaternion_rotation<R: Rng + ?Sized>(rng: &mut R) -> [[f64; 3]; 3] {
    // Shoemake's uniform random unit quaternion
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (x, y, z, w) = (a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn apply(m: &[[f64; 3]; 3], p: &Point) -> Point {
    [
        m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
        m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
        m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
    ]
}

/// Rotation taking the unit vector `from` onto +z about their common normal.
fn rotation_to_zenith(from: &Point) -> [[f64; 3]; 3] {
    let n = norm(from);
    let f = [from[0] / n, from[1] / n, from[2] / n];
    let c = f[2];
    if c > 1.0 - 1e-15 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    if c < -1.0 + 1e-15 {
        return [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
    }
    // axis = f x z = (f_y, -f_x, 0); Rodrigues with K = [axis]_x
    let (ax, ay) = (f[1], -f[0]);
    let s2 = ax * ax + ay * ay;
    let k = (1.0 - c) / s2;
    [
        [1.0 - k * ay * ay, k * ax * ay, ay],
        [k * ax * ay, 1.0 - k * ax * ax, -ax],
        [-ay, ax, 1.0 - k * s2],
    ]
}

/// Walker-Delta snapshot: random orientation, nearest satellite to the pole
/// ground point rotated to the zenith. Returns positions and the index of
/// the serving satellite.
pub(crate) fn walker_snapshot<R: Rng + ?Sized>(
    rng: &mut R,
    params: &WalkerDeltaParams,
    k: &DerivedConstants,
) -> (Vec<Point>, usize) {
    let rot = quaternion_rotation(rng);
    let mut sats: Vec<Point> = params.grid(k.orbit_radius_m).iter().map(|p| apply(&rot, p)).collect();
    let (typical, _) = sats
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bz), (i, p)| if p[2] > bz { (i, p[2]) } else { (bi, bz) });
    let to_zenith = rotation_to_zenith(&sats[typical]);
    for p in &mut sats {
        *p = apply(&to_zenith, p);
    }
    sats[typical] = [0.0, 0.0, k.orbit_radius_m];
    (sats, typical)
}

/// Draws a constellation snapshot conditioned on at least one interfering
/// satellite above the horizon of `O`, plus `n_uts` users.
pub fn sample_constellation<R: Rng + ?Sized>(
    model: &ConstellationModel,
    k: &DerivedConstants,
    n_uts: usize,
    rng: &mut R,
) -> Result<ConstellationSample> {
    let zenith = [0.0, 0.0, k.orbit_radius_m];
    let centre = [0.0, 0.0, k.earth_radius_m];
    let (satellites, typical_index, attempts) = match model {
        ConstellationModel::Sppp => {
            let mut attempt = 0;
            loop {
                attempt += 1;
                if attempt > REJECTION_BUDGET {
                    return Err(Error::RejectionBudget { budget: REJECTION_BUDGET });
                }
                let count = poisson_count(rng, k.density_per_m2 * 4.0 * PI * k.orbit_radius_m.powi(2));
                let rs = k.orbit_radius_m;
                let mut sats: Vec<Point> = (0..count)
                    .map(|_| {
                        let u = uniform_unit(rng);
                        [u[0] * rs, u[1] * rs, u[2] * rs]
                    })
                    .collect();
                let visible = sats.iter().any(|p| distance(p, &centre) <= k.r_max_m);
                if visible {
                    sats.insert(0, zenith);
                    break (sats, 0, attempt);
                }
            }
        }
        ConstellationModel::WalkerDelta(params) => {
            params.validate()?;
            let (sats, idx) = walker_snapshot(rng, params, k);
            (sats, idx, 1)
        }
    };
    let ut_positions = sample_uts(n_uts, k, UtSampling::PlanarDisk, rng);
    Ok(ConstellationSample { satellite_positions: satellites, typical_index, ut_positions, model_tag: model.tag(), attempts })
}

/// `n` users uniform in the serving area around `O`.
pub fn sample_uts<R: Rng + ?Sized>(n: usize, k: &DerivedConstants, mode: UtSampling, rng: &mut R) -> Vec<UtPosition> {
    let re = k.earth_radius_m;
    let rt = k.serving_radius_m;
    let h = k.altitude_m;
    let zenith = [0.0, 0.0, k.orbit_radius_m];
    (0..n)
        .map(|_| {
            let az = 2.0 * PI * rng.random::<f64>();
            let u: f64 = rng.random();
            match mode {
                UtSampling::PlanarDisk => {
                    let rho = rt * u.sqrt();
                    let gamma = rho / re;
                    let position = [re * gamma.sin() * az.cos(), re * gamma.sin() * az.sin(), re * gamma.cos()];
                    UtPosition { position, slant_m: (h * h + rho * rho).sqrt() }
                }
                UtSampling::SphericalCap => {
                    let cmin = (rt / re).cos();
                    let z = 1.0 - u * (1.0 - cmin);
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    let position = [re * s * az.cos(), re * s * az.sin(), re * z];
                    UtPosition { position, slant_m: distance(&position, &zenith) }
                }
            }
        })
        .collect()
}

impl ConstellationSample {
    /// One line per satellite: `x_m,y_m,z_m,is_typical`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_m,y_m,z_m,is_typical\n");
        for (i, p) in self.satellite_positions.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", p[0], p[1], p[2], u8::from(i == self.typical_index));
        }
        out
    }

    /// Distance from `O` to the nearest non-typical satellite.
    pub fn nearest_interferer_distance(&self, k: &DerivedConstants) -> Option<f64> {
        let centre = [0.0, 0.0, k.earth_radius_m];
        self.satellite_positions
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.typical_index)
            .map(|(_, p)| distance(p, &centre))
            .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))))
    }

    /// Number of non-typical satellites within `R_max` of `O`.
    pub fn visible_interferers(&self, k: &DerivedConstants) -> usize {
        let centre = [0.0, 0.0, k.earth_radius_m];
        self.satellite_positions
            .iter()
            .enumerate()
            .filter(|(i, p)| *i != self.typical_index && distance(p, &centre) <= k.r_max_m)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{build_derived, SystemConfig};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k() -> DerivedConstants {
        build_derived(&SystemConfig::default()).unwrap()
    }

    #[test]
    fn link_distance_density() {
        let k = k();
        assert_eq!(cdf_link_distance(k.l_max_m, &k), 1.0);
        assert_eq!(cdf_link_distance(k.l_min_m, &k), 0.0);
        // 0.025 per km = 2.5e-5 per m
        assert_relative_eq!(pdf_link_distance(5e5, &k), 2.5e-5, max_relative = 1e-12);
        assert_eq!(pdf_link_distance(4e5, &k), 0.0);
        let total = integrate(|l| pdf_link_distance(l, &k), k.l_min_m, k.l_max_m, 1e-12).unwrap().value;
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn ordered_density_degenerate_and_rank_check() {
        let k = k();
        for &l in &[5.0e5, 5.1e5, 5.3e5] {
            assert_eq!(pdf_ordered_link_distance(l, 1, 1, &k).unwrap(), pdf_link_distance(l, &k));
        }
        assert!(matches!(pdf_ordered_link_distance(5e5, 0, 3, &k), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(pdf_ordered_link_distance(5e5, 4, 3, &k), Err(Error::RankOutOfRange { .. })));
    }

    #[test]
    fn nearest_interferer_mass() {
        let k = k();
        let c = integrate(|r| pdf_nearest_interferer(r, &k, true), k.r_min_m, k.r_max_m, 1e-12).unwrap().value;
        assert_relative_eq!(c, 1.0, epsilon = 1e-8);
        let u = integrate(|r| pdf_nearest_interferer(r, &k, false), k.r_min_m, k.r_max_m, 1e-12).unwrap().value;
        assert_relative_eq!(u, k.prob_interferer_visible(), epsilon = 1e-8);
        assert_relative_eq!(cdf_nearest_interferer(k.r_max_m, &k), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn walker_defaults() {
        let w = WalkerDeltaParams::default_for(600);
        assert_eq!(w.num_planes, 24);
        assert_eq!(w.total_satellites % w.num_planes, 0);
        let w = WalkerDeltaParams::default_for(7);
        assert_eq!(w.num_planes, 1);
        let bad = WalkerDeltaParams { total_satellites: 600, num_planes: 7, inclination_deg: 53.0, phasing_factor: 1 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn walker_plane_spacing_is_uniform() {
        let w = WalkerDeltaParams { total_satellites: 600, num_planes: 20, inclination_deg: 53.0, phasing_factor: 1 };
        let grid = w.grid(1.0);
        let per = w.per_plane() as usize;
        for p in 0..20 {
            let plane = &grid[p * per..(p + 1) * per];
            for s in 0..per {
                let a = &plane[s];
                let b = &plane[(s + 1) % per];
                let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                assert!((dot.clamp(-1.0, 1.0).acos() - 2.0 * PI / per as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn samples_live_on_their_spheres() {
        let k = k();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in [ConstellationModel::Sppp, ConstellationModel::WalkerDelta(WalkerDeltaParams::default_for(600))] {
            let s = sample_constellation(&model, &k, 5, &mut rng).unwrap();
            assert_eq!(s.satellite_positions[s.typical_index], [0.0, 0.0, k.orbit_radius_m]);
            for p in &s.satellite_positions {
                assert_relative_eq!(norm(p), k.orbit_radius_m, max_relative = 1e-6);
            }
            for u in &s.ut_positions {
                assert_relative_eq!(norm(&u.position), k.earth_radius_m, max_relative = 1e-6);
                let ang = (u.position[2] / norm(&u.position)).clamp(-1.0, 1.0).acos();
                assert!(ang * k.earth_radius_m <= k.serving_radius_m * (1.0 + 1e-9));
            }
            // the typical satellite is the nearest to O
            let centre = [0.0, 0.0, k.earth_radius_m];
            let dt = distance(&s.satellite_positions[s.typical_index], &centre);
            assert!(s.nearest_interferer_distance(&k).unwrap() >= dt);
            let csv = s.to_csv();
            assert_eq!(csv.lines().count(), s.satellite_positions.len() + 1);
            assert_eq!(csv.lines().filter(|l| l.ends_with(",1")).count(), 1);
        }
    }

    #[test]
    fn spherical_cap_sampling_stays_in_area() {
        let k = k();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // the chord to the zenith grows slightly faster than on the planar disk
        let edge = (k.altitude_m.powi(2) + k.orbit_radius_m / k.earth_radius_m * k.serving_radius_m.powi(2)).sqrt();
        for u in sample_uts(1000, &k, UtSampling::SphericalCap, &mut rng) {
            assert!(u.slant_m >= k.l_min_m - 1e-6 && u.slant_m <= edge * 1.0001);
        }
    }

    #[test]
    fn degenerate_serving_area() {
        let cfg = SystemConfig { serving_radius_km: 1e-6, ..Default::default() };
        let k = build_derived(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = sample_uts(1, &k, UtSampling::PlanarDisk, &mut rng);
        assert_relative_eq!(u[0].slant_m, k.altitude_m, max_relative = 1e-9);
    }

    #[test]
    fn rotation_to_zenith_is_orthonormal() {
        let p = [0.3, -0.4, 0.866];
        let m = rotation_to_zenith(&p);
        let q = apply(&m, &p);
        assert_relative_eq!(q[2], norm(&p), max_relative = 1e-12);
        assert!(q[0].abs() < 1e-12 && q[1].abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|t| m[i][t] * m[j][t]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
