//! Background light, detector noise and the sifted-key error rate.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::transport::SPEED_OF_LIGHT;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Receiver front end for one gate setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverSpec {
    /// Aperture diameter, m.
    pub aperture_diameter: f64,
    /// Field-of-view half-angle, rad.
    pub fov: f64,
    /// Optical filter bandwidth, m.
    pub filter_width: f64,
    /// Dark count rate, Hz.
    pub dark_count_rate: f64,
    /// SPAD gate time, s.
    pub gate_time: f64,
}

impl ReceiverSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("aperture_diameter", self.aperture_diameter),
            ("fov", self.fov),
            ("filter_width", self.filter_width),
            ("dark_count_rate", self.dark_count_rate),
            ("gate_time", self.gate_time),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("receiver {name} = {v} must be finite and >= 0")));
            }
        }
        if self.fov > PI {
            return Err(Error::domain(format!("field of view {} exceeds π", self.fov)));
        }
        Ok(())
    }

    pub fn aperture_area(&self) -> f64 {
        let r = 0.5 * self.aperture_diameter;
        PI * r * r
    }
}

/// Ambient light conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentSpec {
    /// Downwelling irradiance just below the surface, W/m².
    pub surface_irradiance: f64,
    /// Asymptotic diffuse attenuation coefficient, 1/m.
    pub diffuse_attenuation: f64,
    /// Receiver depth, m.
    pub depth: f64,
}

impl EnvironmentSpec {
    /// Clear night sky with a full moon, receiver at 100 m.
    pub fn full_moon_100m() -> Self {
        Self {
            surface_irradiance: 1e-3,
            diffuse_attenuation: 0.08,
            depth: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("surface_irradiance", self.surface_irradiance),
            ("diffuse_attenuation", self.diffuse_attenuation),
            ("depth", self.depth),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("environment {name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Which window dark counts accumulate over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DarkCountWindow {
    /// The full bit period.
    #[default]
    Bit,
    /// Only while the gate is open.
    Gate,
}

impl fmt::Display for DarkCountWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DarkCountWindow::Bit => "bit",
            DarkCountWindow::Gate => "gate",
        })
    }
}

impl FromStr for DarkCountWindow {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bit" => Ok(DarkCountWindow::Bit),
            "gate" => Ok(DarkCountWindow::Gate),
            other => Err(format!("expected `bit` or `gate`, got `{other}`")),
        }
    }
}

/// Mean noise photons per bit slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    /// Background photons collected during the gate.
    pub background: f64,
    /// Dark counts.
    pub dark: f64,
    /// Noise reaching each of the two detectors.
    pub per_detector: f64,
}

/// Irradiance at the receiver depth, W/m².
pub fn irradiance_at_depth(env: &EnvironmentSpec) -> f64 {
    env.surface_irradiance * (-env.diffuse_attenuation * env.depth).exp()
}

/// Mean background photons collected in one gate.
pub fn background_count(rx: &ReceiverSpec, env: &EnvironmentSpec, wavelength: f64) -> f64 {
    let irradiance = irradiance_at_depth(env);
    PI * irradiance * rx.aperture_area() * wavelength * rx.filter_width * (1.0 - rx.fov.cos()) * rx.gate_time
        / (2.0 * PLANCK * SPEED_OF_LIGHT)
}

pub fn noise_budget(
    rx: &ReceiverSpec,
    env: &EnvironmentSpec,
    wavelength: f64,
    bit_period: f64,
    window: DarkCountWindow,
) -> NoiseBudget {
    let background = background_count(rx, env, wavelength);
    let dark = rx.dark_count_rate
        * match window {
            DarkCountWindow::Bit => bit_period,
            DarkCountWindow::Gate => rx.gate_time,
        };
    NoiseBudget {
        background,
        dark,
        per_detector: dark + background / 2.0,
    }
}

/// Quantum bit error rate of the sifted key for received fraction `gamma`.
pub fn qber(gamma: f64, photons_per_pulse: f64, noise: &NoiseBudget) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::domain(format!("received fraction {gamma} outside [0, 1]")));
    }
    if !(photons_per_pulse > 0.0) {
        return Err(Error::domain("photons per pulse must be > 0"));
    }
    let n = noise.per_detector;
    if !(n >= 0.0) {
        return Err(Error::domain(format!("noise {n} must be >= 0")));
    }
    let denom = gamma * photons_per_pulse / 2.0 + 2.0 * n;
    if denom == 0.0 {
        return Err(Error::domain("QBER undefined with neither signal nor noise"));
    }
    Ok(n / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_rx(fov_deg: f64, gate: f64) -> ReceiverSpec {
        ReceiverSpec {
            aperture_diameter: 0.2,
            fov: fov_deg.to_radians(),
            filter_width: 30e-9,
            dark_count_rate: 60.0,
            gate_time: gate,
        }
    }

    #[test]
    fn irradiance_decay() {
        let mut env = EnvironmentSpec::full_moon_100m();
        let deep = irradiance_at_depth(&env);
        assert!((deep - 3.354_626_279e-7).abs() < 1e-15, "{deep}");
        env.depth = 0.0;
        assert_eq!(irradiance_at_depth(&env), 1e-3);
        env.depth = 50.0;
        env.diffuse_attenuation = 0.0;
        assert_eq!(irradiance_at_depth(&env), 1e-3);
    }

    #[test]
    fn background_zero_cases() {
        let env = EnvironmentSpec::full_moon_100m();
        assert_eq!(background_count(&table1_rx(0.0, 9e-12), &env, 532e-9), 0.0);
        assert_eq!(background_count(&table1_rx(27.0, 0.0), &env, 532e-9), 0.0);
    }

    #[test]
    fn background_for_table1_defaults() {
        // Evaluated term by term by hand:
        // π·3.3546e-7·0.0314159·532e-9·30e-9·(1-cos27°)·9e-12 / (2·h·c)
        let env = EnvironmentSpec::full_moon_100m();
        let nb = background_count(&table1_rx(27.0, 9e-12), &env, 532e-9);
        let hand = {
            let num = PI * 3.354_626_279_025_119e-7 * (PI * 0.01) * 532e-9 * 30e-9 * (1.0 - 0.891_006_524_188_367_8) * 9e-12;
            num / (2.0 * 6.626_070_15e-34 * 2.997_924_58e8)
        };
        assert!(((nb - hand) / hand).abs() < 1e-12);
        assert!((nb - 1.3048e-9).abs() < 1e-12, "{nb:e}");
    }

    #[test]
    fn background_is_linear_in_each_factor() {
        let env = EnvironmentSpec::full_moon_100m();
        let rx = table1_rx(30.0, 20e-12);
        let base = background_count(&rx, &env, 532e-9);
        let mut brighter = env;
        brighter.surface_irradiance *= 3.0;
        assert!((background_count(&rx, &brighter, 532e-9) / base - 3.0).abs() < 1e-12);
        let mut wider = rx;
        wider.filter_width *= 2.0;
        assert!((background_count(&wider, &env, 532e-9) / base - 2.0).abs() < 1e-12);
        let mut longer = rx;
        longer.gate_time *= 2.0;
        assert!((background_count(&longer, &env, 532e-9) / base - 2.0).abs() < 1e-12);
        let mut bigger = rx;
        bigger.aperture_diameter *= 2.0f64.sqrt();
        assert!((background_count(&bigger, &env, 532e-9) / base - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dark_counts_over_bit_period() {
        let env = EnvironmentSpec::full_moon_100m();
        let nb = noise_budget(&table1_rx(27.0, 9e-12), &env, 532e-9, 1e-9, DarkCountWindow::Bit);
        assert!((nb.dark - 6e-8).abs() < 1e-22);
        assert_eq!(nb.per_detector, nb.dark + nb.background / 2.0);

        let gated = noise_budget(&table1_rx(27.0, 9e-12), &env, 532e-9, 1e-9, DarkCountWindow::Gate);
        assert!((gated.dark - 60.0 * 9e-12).abs() < 1e-24);
    }

    #[test]
    fn doubling_gate_doubles_background_only() {
        let env = EnvironmentSpec::full_moon_100m();
        let a = noise_budget(&table1_rx(27.0, 9e-12), &env, 532e-9, 1e-9, DarkCountWindow::Bit);
        let b = noise_budget(&table1_rx(27.0, 18e-12), &env, 532e-9, 1e-9, DarkCountWindow::Bit);
        assert!((b.background / a.background - 2.0).abs() < 1e-12);
        assert_eq!(a.dark, b.dark);
    }

    #[test]
    fn no_background_means_dark_only() {
        let mut env = EnvironmentSpec::full_moon_100m();
        env.surface_irradiance = 0.0;
        let nb = noise_budget(&table1_rx(27.0, 9e-12), &env, 532e-9, 1e-9, DarkCountWindow::Bit);
        assert_eq!(nb.per_detector, nb.dark);
    }

    #[test]
    fn qber_limits() {
        let silent = NoiseBudget {
            background: 0.0,
            dark: 0.0,
            per_detector: 0.0,
        };
        assert_eq!(qber(0.3, 1.0, &silent).unwrap(), 0.0);
        let noisy = NoiseBudget {
            background: 2e-8,
            dark: 1e-8,
            per_detector: 2e-8,
        };
        assert_eq!(qber(0.0, 1.0, &noisy).unwrap(), 0.5);
        assert!(qber(0.0, 1.0, &silent).is_err());
        assert!(qber(1.5, 1.0, &noisy).is_err());
        assert!(qber(0.5, 0.0, &noisy).is_err());
    }

    #[test]
    fn qber_monotonicity() {
        let mk = |n: f64| NoiseBudget {
            background: 0.0,
            dark: n,
            per_detector: n,
        };
        let mut prev = 0.0;
        for k in 1..50 {
            let q = qber(0.01, 1.0, &mk(k as f64 * 1e-8)).unwrap();
            assert!(q > prev && q <= 0.5);
            prev = q;
        }
        let mut prev = 0.5;
        for k in 1..50 {
            let q = qber(k as f64 * 0.01, 1.0, &mk(1e-6)).unwrap();
            assert!(q < prev);
            prev = q;
        }
    }

    #[test]
    fn dark_window_parses() {
        assert_eq!("bit".parse::<DarkCountWindow>().unwrap(), DarkCountWindow::Bit);
        assert_eq!("gate".parse::<DarkCountWindow>().unwrap(), DarkCountWindow::Gate);
        assert!("both".parse::<DarkCountWindow>().is_err());
        assert_eq!(DarkCountWindow::Gate.to_string(), "gate");
    }
}
