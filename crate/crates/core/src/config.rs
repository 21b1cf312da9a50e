//! User-facing system parameters and the SI-unit constants derived from them.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::interference::FadingModel;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Smallest admissible margin above the free-space exponent.
pub const ALPHA_MARGIN: f64 = 0.0;

pub fn db_to_linear(value_db: f64) -> f64 {
    10f64.powf(value_db / 10.0)
}

pub fn linear_to_db(value: f64) -> f64 {
    10.0 * value.log10()
}

/// dBm to watts.
pub fn dbm_to_watts(value_dbm: f64) -> f64 {
    db_to_linear(value_dbm) * 1e-3
}

/// Which gain the noise power is referred to when normalising the SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseNormalization {
    /// `sigma^2 / (G_ml L_pl P)`: the desired signal carries the main-lobe
    /// gain, the thermal noise does not.
    MainLobe,
    /// `sigma^2 / (L_pl P)`: gain-free normalisation.
    TransmitOnly,
}

/// Physical and network parameters in user units (km, dBm, dBi, Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub earth_radius_km: f64,
    pub satellite_altitude_km: f64,
    pub num_satellites: u32,
    pub serving_radius_km: f64,
    pub transmit_power_dbm: f64,
    pub mainlobe_gain_dbi: f64,
    pub sidelobe_gain_dbi: f64,
    pub noise_power_dbm: f64,
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub pathloss_exponent: f64,
    pub noise_normalization: NoiseNormalization,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            earth_radius_km: 6371.393,
            satellite_altitude_km: 500.0,
            num_satellites: 600,
            serving_radius_km: 200.0,
            transmit_power_dbm: 50.0,
            mainlobe_gain_dbi: 30.0,
            sidelobe_gain_dbi: 10.0,
            noise_power_dbm: -110.0,
            carrier_frequency_hz: 1e9,
            bandwidth_hz: 100e6,
            pathloss_exponent: 2.0 + 1e-12,
            noise_normalization: NoiseNormalization::MainLobe,
        }
    }
}

impl SystemConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config { field, reason: format!("must be positive and finite, got {v}") })
            }
        }
        positive("earth_radius_km", self.earth_radius_km)?;
        positive("satellite_altitude_km", self.satellite_altitude_km)?;
        positive("serving_radius_km", self.serving_radius_km)?;
        positive("carrier_frequency_hz", self.carrier_frequency_hz)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        if self.num_satellites < 1 {
            return Err(Error::Config { field: "num_satellites", reason: "must be at least 1".into() });
        }
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent > 2.0 + ALPHA_MARGIN) {
            return Err(Error::Config {
                field: "pathloss_exponent",
                reason: format!("must exceed 2, got {}", self.pathloss_exponent),
            });
        }
        for (field, v) in [
            ("transmit_power_dbm", self.transmit_power_dbm),
            ("mainlobe_gain_dbi", self.mainlobe_gain_dbi),
            ("sidelobe_gain_dbi", self.sidelobe_gain_dbi),
            ("noise_power_dbm", self.noise_power_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::Config { field, reason: format!("must be finite, got {v}") });
            }
        }
        if self.mainlobe_gain_dbi < self.sidelobe_gain_dbi {
            return Err(Error::Config {
                field: "mainlobe_gain_dbi",
                reason: "main-lobe gain must not be below the side-lobe gain".into(),
            });
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form; used as provenance tag.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Constants derived from a [`SystemConfig`], all in SI units (m, W, linear gains).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub earth_radius_m: f64,
    pub altitude_m: f64,
    pub serving_radius_m: f64,
    /// `R_S = R_E + H_S`.
    pub orbit_radius_m: f64,
    /// Satellite density on the orbital shell, per m^2.
    pub density_per_m2: f64,
    /// `(c / (4 pi f_c))^2`, m^2.
    pub pathloss_ref: f64,
    pub transmit_power_w: f64,
    pub noise_power_w: f64,
    /// Normalised noise entering the SINR denominator.
    pub norm_noise: f64,
    pub l_min_m: f64,
    pub l_max_m: f64,
    pub r_min_m: f64,
    pub r_max_m: f64,
    pub mainlobe_gain: f64,
    pub sidelobe_gain: f64,
    /// `G_sl / G_ml`.
    pub gain_ratio: f64,
    pub alpha: f64,
}

impl DerivedConstants {
    /// `lambda pi R_S / R_E`, the rate of the nearest-interferer distance law in `r^2`.
    pub fn cap_rate(&self) -> f64 {
        self.density_per_m2 * PI * self.orbit_radius_m / self.earth_radius_m
    }

    /// Mean number of satellites visible from the sub-satellite point,
    /// `lambda 2 pi (R_S - R_E) R_S`.
    pub fn visible_mean(&self) -> f64 {
        self.density_per_m2 * 2.0 * PI * self.altitude_m * self.orbit_radius_m
    }

    /// Probability of at least one interfering satellite above the horizon.
    pub fn prob_interferer_visible(&self) -> f64 {
        -(-self.visible_mean()).exp_m1()
    }
}

pub fn build_derived(cfg: &SystemConfig) -> Result<DerivedConstants> {
    cfg.validate()?;
    let earth = cfg.earth_radius_km * 1e3;
    let altitude = cfg.satellite_altitude_km * 1e3;
    let serving = cfg.serving_radius_km * 1e3;
    let orbit = earth + altitude;
    let density = cfg.num_satellites as f64 / (4.0 * PI * orbit * orbit);
    let pathloss_ref = (SPEED_OF_LIGHT / (4.0 * PI * cfg.carrier_frequency_hz)).powi(2);
    let power = dbm_to_watts(cfg.transmit_power_dbm);
    let noise = dbm_to_watts(cfg.noise_power_dbm);
    let g_ml = db_to_linear(cfg.mainlobe_gain_dbi);
    let g_sl = db_to_linear(cfg.sidelobe_gain_dbi);
    let norm_noise = match cfg.noise_normalization {
        NoiseNormalization::MainLobe => noise / (g_ml * pathloss_ref * power),
        NoiseNormalization::TransmitOnly => noise / (pathloss_ref * power),
    };
    Ok(DerivedConstants {
        earth_radius_m: earth,
        altitude_m: altitude,
        serving_radius_m: serving,
        orbit_radius_m: orbit,
        density_per_m2: density,
        pathloss_ref,
        transmit_power_w: power,
        noise_power_w: noise,
        norm_noise,
        l_min_m: altitude,
        l_max_m: (altitude * altitude + serving * serving).sqrt(),
        r_min_m: altitude,
        r_max_m: (orbit * orbit - earth * earth).sqrt(),
        mainlobe_gain: g_ml,
        sidelobe_gain: g_sl,
        gain_ratio: g_sl / g_ml,
        alpha: cfg.pathloss_exponent,
    })
}

/// A fully resolved network: configuration, derived constants and fading.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: SystemConfig,
    pub derived: DerivedConstants,
    pub fading: FadingModel,
}

impl Network {
    pub fn new(config: SystemConfig, fading: FadingModel) -> Result<Self> {
        let derived = build_derived(&config)?;
        Ok(Network { config, derived, fading })
    }

    /// The reference parameter set with the given Nakagami shape.
    pub fn reference(kappa: u32) -> Self {
        Network::new(SystemConfig::default(), FadingModel::nakagami(kappa).expect("kappa >= 1"))
            .expect("reference config is valid")
    }

    pub fn hash(&self) -> String {
        let json = serde_json::json!({ "config": self.config, "fading": self.fading });
        hex_digest(json.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn db_conversions() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert_relative_eq!(db_to_linear(30.0), 1000.0, max_relative = 1e-14);
        assert_relative_eq!(db_to_linear(50.0), 1e5, max_relative = 1e-14);
        assert_relative_eq!(dbm_to_watts(50.0), 100.0, max_relative = 1e-14);
        for &x in &[-110.0, -6.0, 0.3, 17.0] {
            assert_relative_eq!(linear_to_db(db_to_linear(x)), x, max_relative = 1e-12);
        }
    }

    #[test]
    fn reference_constants() {
        let k = build_derived(&SystemConfig::default()).unwrap();
        let rs_km: f64 = 6871.393;
        assert_relative_eq!(k.density_per_m2 * 1e6, 600.0 / (4.0 * PI * rs_km * rs_km), max_relative = 1e-12);
        assert_relative_eq!(k.density_per_m2 * 1e6, 1.011e-6, max_relative = 1e-3);
        assert_relative_eq!(k.pathloss_ref, 5.70e-4, max_relative = 2e-3);
        assert_relative_eq!(k.r_max_m / 1e3, 2573.2, max_relative = 1e-4);
        assert_eq!(k.r_min_m, k.l_min_m);
        assert_eq!(k.r_min_m, 500e3);
        assert!(k.l_max_m > k.l_min_m && k.r_max_m > k.r_min_m);
        assert_relative_eq!(k.gain_ratio, 0.01, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_exponent_and_lengths() {
        let cfg = SystemConfig { pathloss_exponent: 1.5, ..Default::default() };
        assert!(matches!(build_derived(&cfg), Err(Error::Config { field: "pathloss_exponent", .. })));
        let cfg = SystemConfig { pathloss_exponent: 2.0, ..Default::default() };
        assert!(build_derived(&cfg).is_err());
        let cfg = SystemConfig { serving_radius_km: 0.0, ..Default::default() };
        assert!(matches!(build_derived(&cfg), Err(Error::Config { field: "serving_radius_km", .. })));
        let cfg = SystemConfig { sidelobe_gain_dbi: 40.0, ..Default::default() };
        assert!(build_derived(&cfg).is_err());
    }

    #[test]
    fn noise_decreases_with_power() {
        let mut last = f64::INFINITY;
        for p in [30.0, 40.0, 50.0, 60.0] {
            for norm in [NoiseNormalization::MainLobe, NoiseNormalization::TransmitOnly] {
                let cfg = SystemConfig { transmit_power_dbm: p, noise_normalization: norm, ..Default::default() };
                let k = build_derived(&cfg).unwrap();
                if norm == NoiseNormalization::MainLobe {
                    assert!(k.norm_noise < last);
                    last = k.norm_noise;
                }
            }
        }
    }

    #[test]
    fn json_overrides_defaults() {
        let cfg = SystemConfig::from_json_str(r#"{"num_satellites": 1200, "satellite_altitude_km": 550}"#).unwrap();
        assert_eq!(cfg.num_satellites, 1200);
        assert_eq!(cfg.serving_radius_km, 200.0);
        assert!(SystemConfig::from_json_str(r#"{"num_satelites": 3}"#).is_err());
        assert!(SystemConfig::from_json_str(r#"{"pathloss_exponent": 1.5}"#).is_err());
    }

    #[test]
    fn derived_is_deterministic() {
        let a = build_derived(&SystemConfig::default()).unwrap();
        let b = build_derived(&SystemConfig::default()).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
