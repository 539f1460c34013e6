//! Channel-design quantities derived from arrivals: delay and angle-of-arrival
//! distributions, bit period and FoV selection, and the received fraction γ.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::store::ArrivalSet;
use crate::transport::ArrivalRecord;

/// How arrivals are tallied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Each arrival counts as one received photon.
    #[default]
    Count,
    /// Each arrival contributes its packet weight.
    Weight,
}

impl Weighting {
    #[inline]
    pub fn of(self, r: &ArrivalRecord) -> f64 {
        match self {
            Weighting::Count => 1.0,
            Weighting::Weight => r.weight,
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Count => "count",
            Weighting::Weight => "weight",
        })
    }
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "count" => Ok(Weighting::Count),
            "weight" => Ok(Weighting::Weight),
            other => Err(format!("expected `count` or `weight`, got `{other}`")),
        }
    }
}

/// Weighted empirical distribution with linear interpolation between the
/// sorted sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
    /// Inclusive prefix sums of the weights, aligned with `values`.
    cumulative: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = samples.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::Empty("CDF needs at least one sample"));
        }
        if let Some(&(v, w)) = pairs.iter().find(|(v, w)| !v.is_finite() || !(*w > 0.0)) {
            return Err(Error::domain(format!("invalid CDF sample ({v}, {w})")));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let (values, cumulative) = pairs
            .into_iter()
            .map(|(v, w)| {
                acc += w;
                (v, acc)
            })
            .unzip();
        Ok(Self { values, cumulative })
    }

    pub fn total_weight(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorted `(value, cdf)` points.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let total = self.total_weight();
        self.values.iter().zip(&self.cumulative).map(move |(&v, &c)| (v, c / total))
    }

    /// Fraction of weight at or below `x`, interpolated between points.
    pub fn cdf(&self, x: f64) -> f64 {
        let total = self.total_weight();
        let n = self.values.len();
        if x < self.values[0] {
            return 0.0;
        }
        if x >= self.values[n - 1] {
            return 1.0;
        }
        // First index with value > x; i >= 1 here.
        let i = self.values.partition_point(|&v| v <= x);
        let (x0, x1) = (self.values[i - 1], self.values[i]);
        let (f0, f1) = (self.cumulative[i - 1] / total, self.cumulative[i] / total);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    /// Smallest value reaching cumulative fraction `level`, interpolated
    /// between the bracketing points. `quantile(1) = max`.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::domain(format!("quantile level {level} outside [0, 1]")));
        }
        let target = level * self.total_weight();
        let i = self.cumulative.partition_point(|&c| c < target);
        if i == 0 {
            return Ok(self.values[0]);
        }
        if i >= self.values.len() {
            return Ok(*self.values.last().unwrap());
        }
        let (c0, c1) = (self.cumulative[i - 1], self.cumulative[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        let frac = ((target - c0) / (c1 - c0)).clamp(0.0, 1.0);
        Ok(v0 + frac * (v1 - v0))
    }

    /// Write `value,cdf` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "value,cdf").map_err(io)?;
        for (v, c) in self.points() {
            writeln!(w, "{v:.16e},{c:.16e}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

pub fn delay_cdf(set: &ArrivalSet, weighting: Weighting) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(set.records.iter().map(|r| (r.delay, weighting.of(r))))
}

pub fn aoa_cdf(set: &ArrivalSet, weighting: Weighting) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(set.records.iter().map(|r| (r.aoa, weighting.of(r))))
}

pub const NS: f64 = 1e-9;

/// A selected quantity at full precision and at presentation resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selected {
    pub raw: f64,
    pub rounded: f64,
}

/// Round `raw` up to a multiple of `resolution`, tolerating float noise
/// just above an exact multiple.
pub fn round_up_to(raw: f64, resolution: f64) -> f64 {
    let steps = (raw / resolution * (1.0 - 1e-12)).ceil().max(0.0);
    // Dividing by an integral scale keeps 3 ns printing as 3, not 3.0000000000000004.
    let scale = resolution.recip();
    if scale >= 1.0 && (scale - scale.round()).abs() < 1e-9 * scale {
        steps / scale.round()
    } else {
        steps * resolution
    }
}

/// Bit period presentation: whole nanoseconds, rounded up so the selected
/// quantile stays inside the bit period.
pub fn round_bit_period(raw: f64) -> f64 {
    round_up_to(raw, NS)
}

/// FoV presentation: whole degrees, rounded up.
pub fn round_fov(raw: f64) -> f64 {
    round_up_to(raw.to_degrees(), 1.0).to_radians()
}

/// Bit period: the `level` quantile of delay over every arrival, with no
/// FoV restriction.
pub fn select_bit_period(set: &ArrivalSet, level: f64, weighting: Weighting) -> Result<Selected> {
    if set.is_empty() {
        return Err(Error::Empty("no arrivals to select a bit period from"));
    }
    let raw = delay_cdf(set, weighting)?.quantile(level)?;
    Ok(Selected {
        raw,
        rounded: round_bit_period(raw),
    })
}

/// Field of view: the `level` quantile of the angle of arrival.
pub fn select_fov(set: &ArrivalSet, level: f64, weighting: Weighting) -> Result<Selected> {
    if set.is_empty() {
        return Err(Error::Empty("no arrivals to select a field of view from"));
    }
    let raw = aoa_cdf(set, weighting)?.quantile(level)?;
    Ok(Selected {
        raw,
        rounded: round_fov(raw),
    })
}

/// Bit period and FoV chosen for one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSelection {
    /// s
    pub bit_period: f64,
    /// Half-angle, rad.
    pub fov: f64,
    pub quantile_level: f64,
    /// m
    pub distance: f64,
}

impl ChannelSelection {
    pub fn new(bit_period: f64, fov: f64, quantile_level: f64, distance: f64) -> Result<Self> {
        if !(bit_period > 0.0 && bit_period.is_finite()) {
            return Err(Error::domain(format!("bit period {bit_period} must be positive")));
        }
        if !(fov > 0.0 && fov <= std::f64::consts::PI) {
            return Err(Error::domain(format!("FoV {fov} outside (0, π]")));
        }
        if !(quantile_level > 0.0 && quantile_level < 1.0) {
            return Err(Error::domain(format!("quantile level {quantile_level} outside (0, 1)")));
        }
        Ok(Self {
            bit_period,
            fov,
            quantile_level,
            distance,
        })
    }
}

/// Select bit period and FoV from `set`, using presentation-rounded values
/// when `pin_rounded` is set.
pub fn select_channel(set: &ArrivalSet, level: f64, weighting: Weighting, pin_rounded: bool) -> Result<ChannelSelection> {
    let bp = select_bit_period(set, level, weighting)?;
    let fov = select_fov(set, level, weighting)?;
    let pick = |s: Selected| if pin_rounded { s.rounded } else { s.raw };
    ChannelSelection::new(pick(bp), pick(fov), level, set.config.receiver.distance_m)
}

/// Fraction of launched photons received inside `fov` with delay at most
/// `gate`, by direct filtering.
pub fn gamma(set: &ArrivalSet, fov: f64, gate: f64, weighting: Weighting) -> f64 {
    if set.n_photons == 0 {
        return 0.0;
    }
    let s: f64 = set
        .records
        .iter()
        .filter(|r| r.aoa <= fov && r.delay <= gate)
        .map(|r| weighting.of(r))
        .sum();
    s / set.n_photons as f64
}

/// γ as a function of gate time at a fixed FoV, for fast sweeps.
#[derive(Debug, Clone)]
pub struct GammaCurve {
    delays: Vec<f64>,
    cumulative: Vec<f64>,
    n_photons: f64,
}

impl GammaCurve {
    pub fn new(set: &ArrivalSet, fov: f64, weighting: Weighting) -> Self {
        let mut pairs: Vec<(f64, f64)> = set
            .records
            .iter()
            .filter(|r| r.aoa <= fov)
            .map(|r| (r.delay, weighting.of(r)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let (delays, cumulative) = pairs
            .into_iter()
            .map(|(d, w)| {
                acc += w;
                (d, acc)
            })
            .unzip();
        Self {
            delays,
            cumulative,
            n_photons: set.n_photons as f64,
        }
    }

    pub fn at(&self, gate: f64) -> f64 {
        let i = self.delays.partition_point(|&d| d <= gate);
        if i == 0 || self.n_photons == 0.0 {
            0.0
        } else {
            self.cumulative[i - 1] / self.n_photons
        }
    }

    /// Distinct delays within the FoV, ascending.
    pub fn distinct_delays(&self) -> Vec<f64> {
        let mut d = self.delays.clone();
        d.dedup();
        d
    }
}
