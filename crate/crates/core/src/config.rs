//! Link configuration: flat `section.key = value` text in SI units, angles
//! in degrees.
//!
//! ```text
//! # Table 1 defaults
//! transmitter.r0_m = 0.003
//! transmitter.divergence_deg = 20
//! receiver.distance_m = 10
//! medium.extinction_per_m = 0.151
//! ```
//!
//! Unlisted keys take their defaults. The canonical form lists every key
//! once, sorted, and is what campaign hashes and arrival file headers use.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::analysis::Weighting;
use crate::error::{Error, Result};
use crate::medium::{solve_tthg_from_mean_cosine, WaterMedium};
use crate::qber::{DarkCountWindow, EnvironmentSpec};
use crate::transport::{CampaignSpec, ReceiverGeometry, TransmitterSpec, TransportLimits};

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitterConfig {
    pub r0_m: f64,
    pub divergence_deg: f64,
    pub wavelength_m: f64,
    pub photons_per_pulse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub distance_m: f64,
    pub aperture_diameter_m: f64,
    pub filter_width_m: f64,
    pub dark_count_rate_hz: f64,
    pub dark_counts_window: DarkCountWindow,
    /// Pinned field of view; selected from arrivals when absent.
    pub fov_deg: Option<f64>,
    /// Pinned bit period; selected from arrivals when absent.
    pub bit_period_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediumConfig {
    pub extinction_per_m: f64,
    pub scattering_per_m: f64,
    pub refractive_index: f64,
    pub mean_cosine: f64,
    pub backscatter_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub quantile_level: f64,
    /// Weighting of the delay and AoA quantiles.
    pub weighting: Weighting,
    /// Weighting of the received fraction γ.
    pub gamma_weighting: Weighting,
    /// Feed the presentation-rounded bit period and FoV downstream.
    pub pin_rounded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub photons: u64,
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide. Not part of the
    /// campaign identity.
    pub workers: usize,
    pub weight_threshold: f64,
    pub max_interactions: u32,
    pub z_min_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub transmitter: TransmitterConfig,
    pub receiver: ReceiverConfig,
    pub environment: EnvironmentSpec,
    pub medium: MediumConfig,
    pub analysis: AnalysisConfig,
    pub simulation: SimulationConfig,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            transmitter: TransmitterConfig {
                r0_m: 0.003,
                divergence_deg: 20.0,
                wavelength_m: 532e-9,
                photons_per_pulse: 1.0,
            },
            receiver: ReceiverConfig {
                distance_m: 10.0,
                aperture_diameter_m: 0.2,
                filter_width_m: 30e-9,
                dark_count_rate_hz: 60.0,
                dark_counts_window: DarkCountWindow::Bit,
                fov_deg: None,
                bit_period_s: None,
            },
            environment: EnvironmentSpec::full_moon_100m(),
            medium: MediumConfig {
                extinction_per_m: 0.151,
                scattering_per_m: 0.037,
                refractive_index: 1.33,
                mean_cosine: 0.9675,
                backscatter_fraction: None,
            },
            analysis: AnalysisConfig {
                quantile_level: 0.999,
                weighting: Weighting::Count,
                gamma_weighting: Weighting::Weight,
                pin_rounded: false,
            },
            simulation: SimulationConfig {
                photons: 10_000_000,
                seed: 20_230_901,
                workers: 0,
                weight_threshold: 1e-4,
                max_interactions: 10_000,
                z_min_m: -10.0,
            },
        }
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: Display,
{
    raw.parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{raw}`: {e}")))
}

fn parse_opt<T: FromStr>(key: &str, raw: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    if raw == "none" {
        Ok(None)
    } else {
        parse_value(key, raw).map(Some)
    }
}

fn show_opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl LinkConfig {
    /// Parse config text. Every key is optional; unknown or repeated keys
    /// are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::config(key, "key given more than once"));
            }
        }
        let mut cfg = LinkConfig::default();
        let mut absorption: Option<f64> = None;
        for (key, raw) in &entries {
            let k = key.as_str();
            let raw = raw.as_str();
            match k {
                "transmitter.r0_m" => cfg.transmitter.r0_m = parse_value(k, raw)?,
                "transmitter.divergence_deg" => cfg.transmitter.divergence_deg = parse_value(k, raw)?,
                "transmitter.wavelength_m" => cfg.transmitter.wavelength_m = parse_value(k, raw)?,
                "transmitter.photons_per_pulse" => cfg.transmitter.photons_per_pulse = parse_value(k, raw)?,
                "receiver.distance_m" => cfg.receiver.distance_m = parse_value(k, raw)?,
                "receiver.aperture_diameter_m" => cfg.receiver.aperture_diameter_m = parse_value(k, raw)?,
                "receiver.filter_width_m" => cfg.receiver.filter_width_m = parse_value(k, raw)?,
                "receiver.dark_count_rate_hz" => cfg.receiver.dark_count_rate_hz = parse_value(k, raw)?,
                "receiver.dark_counts_window" => cfg.receiver.dark_counts_window = parse_value(k, raw)?,
                "receiver.fov_deg" => cfg.receiver.fov_deg = parse_opt(k, raw)?,
                "receiver.bit_period_s" => cfg.receiver.bit_period_s = parse_opt(k, raw)?,
                "environment.surface_irradiance_w_m2" => cfg.environment.surface_irradiance = parse_value(k, raw)?,
                "environment.diffuse_attenuation_per_m" => cfg.environment.diffuse_attenuation = parse_value(k, raw)?,
                "environment.depth_m" => cfg.environment.depth = parse_value(k, raw)?,
                "medium.extinction_per_m" => cfg.medium.extinction_per_m = parse_value(k, raw)?,
                "medium.scattering_per_m" => cfg.medium.scattering_per_m = parse_value(k, raw)?,
                "medium.absorption_per_m" => absorption = Some(parse_value(k, raw)?),
                "medium.refractive_index" => cfg.medium.refractive_index = parse_value(k, raw)?,
                "medium.mean_cosine" => cfg.medium.mean_cosine = parse_value(k, raw)?,
                "medium.backscatter_fraction" => cfg.medium.backscatter_fraction = parse_opt(k, raw)?,
                "analysis.quantile_level" => cfg.analysis.quantile_level = parse_value(k, raw)?,
                "analysis.weighting" => cfg.analysis.weighting = parse_value(k, raw)?,
                "analysis.gamma_weighting" => cfg.analysis.gamma_weighting = parse_value(k, raw)?,
                "analysis.pin_rounded" => cfg.analysis.pin_rounded = parse_value(k, raw)?,
                "simulation.photons" => cfg.simulation.photons = parse_value(k, raw)?,
                "simulation.seed" => cfg.simulation.seed = parse_value(k, raw)?,
                "simulation.workers" => cfg.simulation.workers = parse_value(k, raw)?,
                "simulation.weight_threshold" => cfg.simulation.weight_threshold = parse_value(k, raw)?,
                "simulation.max_interactions" => cfg.simulation.max_interactions = parse_value(k, raw)?,
                "simulation.z_min_m" => cfg.simulation.z_min_m = parse_value(k, raw)?,
                _ => return Err(Error::config(k, "unknown key")),
            }
        }
        if let Some(alpha) = absorption {
            if entries.contains_key("medium.extinction_per_m") {
                let ext = cfg.medium.extinction_per_m;
                let sum = alpha + cfg.medium.scattering_per_m;
                if (sum - ext).abs() > 1e-12 * ext.abs() {
                    return Err(Error::config(
                        "medium.absorption_per_m",
                        format!("absorption + scattering = {sum} must equal extinction {ext}"),
                    ));
                }
            } else {
                cfg.medium.extinction_per_m = alpha + cfg.medium.scattering_per_m;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn entries(&self, include_runtime: bool) -> Vec<(&'static str, String)> {
        let t = &self.transmitter;
        let r = &self.receiver;
        let e = &self.environment;
        let m = &self.medium;
        let a = &self.analysis;
        let s = &self.simulation;
        let mut v = vec![
            ("analysis.gamma_weighting", a.gamma_weighting.to_string()),
            ("analysis.pin_rounded", a.pin_rounded.to_string()),
            ("analysis.quantile_level", a.quantile_level.to_string()),
            ("analysis.weighting", a.weighting.to_string()),
            ("environment.depth_m", e.depth.to_string()),
            ("environment.diffuse_attenuation_per_m", e.diffuse_attenuation.to_string()),
            ("environment.surface_irradiance_w_m2", e.surface_irradiance.to_string()),
            ("medium.backscatter_fraction", show_opt(&m.backscatter_fraction)),
            ("medium.extinction_per_m", m.extinction_per_m.to_string()),
            ("medium.mean_cosine", m.mean_cosine.to_string()),
            ("medium.refractive_index", m.refractive_index.to_string()),
            ("medium.scattering_per_m", m.scattering_per_m.to_string()),
            ("receiver.aperture_diameter_m", r.aperture_diameter_m.to_string()),
            ("receiver.bit_period_s", show_opt(&r.bit_period_s)),
            ("receiver.dark_count_rate_hz", r.dark_count_rate_hz.to_string()),
            ("receiver.dark_counts_window", r.dark_counts_window.to_string()),
            ("receiver.distance_m", r.distance_m.to_string()),
            ("receiver.filter_width_m", r.filter_width_m.to_string()),
            ("receiver.fov_deg", show_opt(&r.fov_deg)),
            ("simulation.max_interactions", s.max_interactions.to_string()),
            ("simulation.photons", s.photons.to_string()),
            ("simulation.seed", s.seed.to_string()),
            ("simulation.weight_threshold", s.weight_threshold.to_string()),
            ("simulation.z_min_m", s.z_min_m.to_string()),
            ("transmitter.divergence_deg", t.divergence_deg.to_string()),
            ("transmitter.photons_per_pulse", t.photons_per_pulse.to_string()),
            ("transmitter.r0_m", t.r0_m.to_string()),
            ("transmitter.wavelength_m", t.wavelength_m.to_string()),
        ];
        if include_runtime {
            v.push(("simulation.workers", s.workers.to_string()));
        }
        v.sort_by_key(|(k, _)| *k);
        v
    }

    fn render(entries: Vec<(&'static str, String)>) -> String {
        entries.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Every key, sorted. `parse(to_canonical_text())` reproduces `self`.
    pub fn to_canonical_text(&self) -> String {
        Self::render(self.entries(true))
    }

    /// Canonical text without runtime-only keys (worker count). This is the
    /// identity of a campaign.
    pub fn campaign_text(&self) -> String {
        Self::render(self.entries(false))
    }

    /// Hex SHA-256 of the campaign text, keying the arrival cache.
    pub fn campaign_hash(&self) -> String {
        hex::encode(Sha256::digest(self.campaign_text().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("transmitter.wavelength_m", self.transmitter.wavelength_m),
            ("transmitter.photons_per_pulse", self.transmitter.photons_per_pulse),
            ("receiver.distance_m", self.receiver.distance_m),
            ("receiver.aperture_diameter_m", self.receiver.aperture_diameter_m),
            ("receiver.filter_width_m", self.receiver.filter_width_m),
            ("medium.extinction_per_m", self.medium.extinction_per_m),
            ("medium.scattering_per_m", self.medium.scattering_per_m),
            ("simulation.weight_threshold", self.simulation.weight_threshold),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(k, format!("must be positive and finite, got {v}")));
            }
        }
        let non_negative = [
            ("transmitter.r0_m", self.transmitter.r0_m),
            ("receiver.dark_count_rate_hz", self.receiver.dark_count_rate_hz),
            ("environment.surface_irradiance_w_m2", self.environment.surface_irradiance),
            ("environment.diffuse_attenuation_per_m", self.environment.diffuse_attenuation),
            ("environment.depth_m", self.environment.depth),
        ];
        for (k, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(k, format!("must be non-negative and finite, got {v}")));
            }
        }
        if !(0.0..90.0).contains(&self.transmitter.divergence_deg) {
            return Err(Error::config("transmitter.divergence_deg", "must lie in [0, 90)"));
        }
        let m = &self.medium;
        if m.scattering_per_m > m.extinction_per_m {
            return Err(Error::config(
                "medium.scattering_per_m",
                format!(
                    "scattering {} exceeds extinction {}; absorption + scattering = extinction requires scattering <= extinction",
                    m.scattering_per_m, m.extinction_per_m
                ),
            ));
        }
        if !(m.refractive_index > 1.0) {
            return Err(Error::config("medium.refractive_index", "must exceed 1"));
        }
        if !(m.mean_cosine > 0.0 && m.mean_cosine < 1.0) {
            return Err(Error::config("medium.mean_cosine", "must lie in (0, 1)"));
        }
        if let Some(b) = m.backscatter_fraction {
            if !(0.0..0.5).contains(&b) {
                return Err(Error::config("medium.backscatter_fraction", "must lie in [0, 0.5)"));
            }
        }
        if !(self.analysis.quantile_level > 0.0 && self.analysis.quantile_level < 1.0) {
            return Err(Error::config("analysis.quantile_level", "must lie in (0, 1)"));
        }
        if let Some(fov) = self.receiver.fov_deg {
            if !(fov > 0.0 && fov <= 180.0) {
                return Err(Error::config("receiver.fov_deg", "must lie in (0, 180]"));
            }
        }
        if let Some(bp) = self.receiver.bit_period_s {
            if !(bp > 0.0 && bp.is_finite()) {
                return Err(Error::config("receiver.bit_period_s", "must be positive"));
            }
        }
        if self.simulation.max_interactions == 0 {
            return Err(Error::config("simulation.max_interactions", "must be at least 1"));
        }
        if !(self.simulation.z_min_m < 0.0) {
            return Err(Error::config("simulation.z_min_m", "must be below the source plane"));
        }
        Ok(())
    }

    pub fn water_medium(&self) -> WaterMedium {
        let m = &self.medium;
        WaterMedium {
            absorption: m.extinction_per_m - m.scattering_per_m,
            scattering: m.scattering_per_m,
            refractive_index: m.refractive_index,
            mean_cosine: m.mean_cosine,
            backscatter_fraction: m.backscatter_fraction,
        }
    }

    pub fn transmitter_spec(&self) -> TransmitterSpec {
        let t = &self.transmitter;
        TransmitterSpec {
            beam_radius: t.r0_m,
            max_divergence: t.divergence_deg.to_radians(),
            wavelength: t.wavelength_m,
            photons_per_pulse: t.photons_per_pulse,
        }
    }

    pub fn receiver_geometry(&self) -> ReceiverGeometry {
        ReceiverGeometry {
            distance: self.receiver.distance_m,
            aperture_diameter: self.receiver.aperture_diameter_m,
        }
    }

    pub fn limits(&self) -> TransportLimits {
        TransportLimits {
            weight_threshold: self.simulation.weight_threshold,
            max_interactions: self.simulation.max_interactions,
            z_min: self.simulation.z_min_m,
        }
    }

    /// Resolve the transport inputs, solving the phase function from the
    /// configured mean cosine.
    pub fn campaign_spec(&self) -> Result<CampaignSpec> {
        self.validate()?;
        let medium = self.water_medium();
        medium.validate()?;
        Ok(CampaignSpec {
            medium,
            phase: solve_tthg_from_mean_cosine(medium.mean_cosine)?.params,
            transmitter: self.transmitter_spec(),
            receiver: self.receiver_geometry(),
            limits: self.limits(),
        })
    }
}
