//! Weighted photon-packet transport from the transmitter plane `z = 0` to the
//! receiver plane `z = L`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::{sample_scattering_cosine, TthgParams, WaterMedium};
use crate::rng::PhotonRng;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

const UNIT_TOL: f64 = 1e-9;
const NEAR_AXIS: f64 = 0.9999;
const CHUNK: u64 = 1 << 15;

/// Source geometry and pulse content.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitterSpec {
    /// Beam radius r0, m.
    pub beam_radius: f64,
    /// Maximum divergence half-angle, rad.
    pub max_divergence: f64,
    /// Wavelength, m.
    pub wavelength: f64,
    /// Mean photons per pulse.
    pub photons_per_pulse: f64,
}

impl TransmitterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.beam_radius >= 0.0) {
            return Err(Error::domain("beam radius must be >= 0"));
        }
        if !(self.max_divergence >= 0.0 && self.max_divergence < PI / 2.0) {
            return Err(Error::domain("max divergence must lie in [0, π/2)"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::domain("wavelength must be > 0"));
        }
        if !(self.photons_per_pulse > 0.0) {
            return Err(Error::domain("photons per pulse must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverGeometry {
    /// Link distance L, m. The receiver plane is `z = L`.
    pub distance: f64,
    /// Aperture diameter d, m. Photons are collected within radius d/2.
    pub aperture_diameter: f64,
}

impl ReceiverGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0) {
            return Err(Error::domain("link distance must be > 0"));
        }
        if !(self.aperture_diameter > 0.0) {
            return Err(Error::domain("aperture diameter must be > 0"));
        }
        Ok(())
    }

    #[inline]
    fn aperture_radius_sq(&self) -> f64 {
        let r = 0.5 * self.aperture_diameter;
        r * r
    }
}

/// Termination rules that bound a photon's life.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportLimits {
    /// Packets whose weight drops below this are absorbed.
    pub weight_threshold: f64,
    pub max_interactions: u32,
    /// Packets that wander behind this plane are dropped, m.
    pub z_min: f64,
}

impl Default for TransportLimits {
    fn default() -> Self {
        Self {
            weight_threshold: 1e-4,
            max_interactions: 10_000,
            z_min: -10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonState {
    pub position: [f64; 3],
    pub direction: [f64; 3],
    pub weight: f64,
    /// Cumulative geometric path length, m.
    pub path_length: f64,
}

/// One packet crossing the receiver plane inside the aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalRecord {
    pub hit_x: f64,
    pub hit_y: f64,
    /// Delay relative to the ballistic time of flight, s.
    pub delay: f64,
    /// Angle between the arrival direction and the +z axis, rad.
    pub aoa: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EscapeReason {
    /// Crossed the receiver plane outside the aperture.
    MissedAperture,
    InteractionLimit,
    /// Fell behind `z_min`.
    BehindSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fate {
    Arrived(ArrivalRecord),
    Absorbed,
    Escaped(EscapeReason),
}

/// A launched photon: uniform azimuth, polar angle uniform in
/// `[-θmax, θmax]`, starting on the beam circle of radius r0 with the same
/// azimuth as its direction.
pub fn launch_photon(tx: &TransmitterSpec, u_azimuth: f64, u_polar: f64) -> PhotonState {
    let phi0 = TAU * u_azimuth;
    let theta0 = tx.max_divergence * (2.0 * u_polar - 1.0);
    let (sp, cp) = phi0.sin_cos();
    let (st, ct) = theta0.sin_cos();
    PhotonState {
        position: [tx.beam_radius * cp, tx.beam_radius * sp, 0.0],
        direction: [st * cp, st * sp, ct],
        weight: 1.0,
        path_length: 0.0,
    }
}

/// Free path for a draw `q ∈ (0, 1]`.
#[inline]
pub fn sample_step(extinction: f64, q: f64) -> f64 {
    -q.ln() / extinction
}

#[inline]
pub fn update_weight(weight: f64, medium: &WaterMedium) -> f64 {
    weight * medium.albedo()
}

#[inline]
fn rotate_cs(dir: [f64; 3], cos_t: f64, sin_t: f64, cos_p: f64, sin_p: f64) -> [f64; 3] {
    let [ux, uy, uz] = dir;
    let out = if uz.abs() > NEAR_AXIS {
        [sin_t * cos_p, sin_t * sin_p, uz.signum() * cos_t]
    } else {
        let s = (1.0 - uz * uz).sqrt();
        [
            sin_t * (ux * uz * cos_p - uy * sin_p) / s + ux * cos_t,
            sin_t * (uy * uz * cos_p + ux * sin_p) / s + uy * cos_t,
            -sin_t * cos_p * s + uz * cos_t,
        ]
    };
    let inv = 1.0 / (out[0] * out[0] + out[1] * out[1] + out[2] * out[2]).sqrt();
    [out[0] * inv, out[1] * inv, out[2] * inv]
}

/// Deflect `dir` by polar angle `theta` at azimuth `phi`.
///
/// Directions within the near-axis band `|μz| > 0.9999` are treated as
/// exactly parallel to ±z.
pub fn rotate_direction(dir: [f64; 3], theta: f64, phi: f64) -> Result<[f64; 3]> {
    let norm_sq = dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2];
    if !((norm_sq.sqrt() - 1.0).abs() <= UNIT_TOL) {
        return Err(Error::domain(format!("direction {dir:?} is not a unit vector")));
    }
    let (sin_t, cos_t) = theta.sin_cos();
    let (sin_p, cos_p) = phi.sin_cos();
    Ok(rotate_cs(dir, cos_t, sin_t, cos_p, sin_p))
}

/// Everything needed to trace photons through one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignSpec {
    pub medium: WaterMedium,
    pub phase: TthgParams,
    pub transmitter: TransmitterSpec,
    pub receiver: ReceiverGeometry,
    pub limits: TransportLimits,
}

/// Result of tracing one photon, with the number of interactions it made.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub fate: Fate,
    pub interactions: u32,
}

/// Trace one photon until it reaches the receiver plane, is absorbed, or
/// escapes the simulation bounds.
pub fn propagate(
    mut photon: PhotonState,
    medium: &WaterMedium,
    phase: &TthgParams,
    rx: &ReceiverGeometry,
    rng: &mut PhotonRng,
    limits: &TransportLimits,
) -> Trace {
    let extinction = medium.extinction();
    let albedo = medium.albedo();
    let plane = rx.distance;
    let delay_per_m = medium.refractive_index / SPEED_OF_LIGHT;
    let mut interactions = 0u32;

    loop {
        let step = sample_step(extinction, rng.uniform_open_zero());
        let [x, y, z] = photon.position;
        let [ux, uy, uz] = photon.direction;
        let z_next = z + uz * step;

        if uz > 0.0 && z_next >= plane {
            let s = (plane - z) / uz;
            let hx = x + ux * s;
            let hy = y + uy * s;
            let path = photon.path_length + s;
            let fate = if hx * hx + hy * hy <= rx.aperture_radius_sq() {
                Fate::Arrived(ArrivalRecord {
                    hit_x: hx,
                    hit_y: hy,
                    delay: (path - plane) * delay_per_m,
                    aoa: uz.min(1.0).acos(),
                    weight: photon.weight,
                })
            } else {
                Fate::Escaped(EscapeReason::MissedAperture)
            };
            return Trace { fate, interactions };
        }

        photon.position = [x + ux * step, y + uy * step, z_next];
        photon.path_length += step;
        if z_next < limits.z_min {
            return Trace {
                fate: Fate::Escaped(EscapeReason::BehindSource),
                interactions,
            };
        }

        photon.weight *= albedo;
        interactions += 1;
        if photon.weight < limits.weight_threshold {
            return Trace {
                fate: Fate::Absorbed,
                interactions,
            };
        }
        if interactions >= limits.max_interactions {
            return Trace {
                fate: Fate::Escaped(EscapeReason::InteractionLimit),
                interactions,
            };
        }

        let cos_t = sample_scattering_cosine(phase, rng.uniform(), rng.uniform());
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        let (sin_p, cos_p) = (TAU * rng.uniform()).sin_cos();
        photon.direction = rotate_cs(photon.direction, cos_t, sin_t, cos_p, sin_p);
    }
}

/// Trace photon `index` of a campaign with the given seed.
pub fn trace_photon(spec: &CampaignSpec, seed: u64, index: u64) -> Trace {
    let mut rng = PhotonRng::new(seed, index);
    let photon = launch_photon(&spec.transmitter, rng.uniform(), rng.uniform());
    propagate(photon, &spec.medium, &spec.phase, &spec.receiver, &mut rng, &spec.limits)
}

/// Per-fate tallies for a campaign.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CampaignStats {
    pub arrived: u64,
    pub absorbed: u64,
    pub escaped: u64,
    /// Subset of `escaped` that reached the plane outside the aperture.
    pub missed_aperture: u64,
}

impl CampaignStats {
    fn add(&mut self, other: &CampaignStats) {
        self.arrived += other.arrived;
        self.absorbed += other.absorbed;
        self.escaped += other.escaped;
        self.missed_aperture += other.missed_aperture;
    }
}

/// Arrivals in photon-index order plus tallies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignOutput {
    pub records: Vec<ArrivalRecord>,
    pub stats: CampaignStats,
}

impl CampaignOutput {
    /// Sum of arrival weights in record order.
    pub fn arrived_weight(&self) -> f64 {
        self.records.iter().map(|r| r.weight).sum()
    }
}

fn trace_range(spec: &CampaignSpec, seed: u64, start: u64, end: u64) -> CampaignOutput {
    let mut out = CampaignOutput::default();
    for index in start..end {
        match trace_photon(spec, seed, index).fate {
            Fate::Arrived(rec) => {
                out.stats.arrived += 1;
                out.records.push(rec);
            }
            Fate::Absorbed => out.stats.absorbed += 1,
            Fate::Escaped(reason) => {
                out.stats.escaped += 1;
                if reason == EscapeReason::MissedAperture {
                    out.stats.missed_aperture += 1;
                }
            }
        }
    }
    out
}

/// Trace `n_photons` photons. Output is identical for any `workers`
/// (0 picks the rayon default).
pub fn run_photons(spec: &CampaignSpec, n_photons: u64, seed: u64, workers: usize) -> Result<CampaignOutput> {
    spec.medium.validate()?;
    spec.phase.validate()?;
    spec.transmitter.validate()?;
    spec.receiver.validate()?;

    let chunks: Vec<(u64, u64)> = (0..n_photons.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(n_photons)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
    let parts: Vec<CampaignOutput> = pool.install(|| {
        chunks
            .par_iter()
            .map(|&(s, e)| trace_range(spec, seed, s, e))
            .collect()
    });

    let mut out = CampaignOutput {
        records: Vec::with_capacity(parts.iter().map(|p| p.records.len()).sum()),
        stats: CampaignStats::default(),
    };
    for part in parts {
        out.stats.add(&part.stats);
        out.records.extend(part.records);
    }
    Ok(out)
}
