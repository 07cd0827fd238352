//! Lumped-mass heat transfer for a single keycap.
//!
//! A fingertip is treated as a constant-temperature source that conducts heat
//! into the keycap for the duration of a press (Fourier's law). The keycap then
//! relaxes back to ambient following Newton's law of cooling. Temperatures are
//! in kelvin; only differences enter the conduction formula.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Material and geometry of one keycap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KeycapSpec {
    /// Fingertip contact area, m².
    pub contact_area: f64,
    /// Keycap wall thickness, m.
    pub thickness: f64,
    /// kg.
    pub mass: f64,
    /// J/(kg·K).
    pub specific_heat: f64,
    /// W/(m·K).
    pub conductivity: f64,
}

impl KeycapSpec {
    /// Tabulated conductivity of PBT. The default uses 0.25 instead.
    pub const PBT_CONDUCTIVITY: f64 = 0.274;

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("contact_area", self.contact_area),
            ("thickness", self.thickness),
            ("mass", self.mass),
            ("specific_heat", self.specific_heat),
            ("conductivity", self.conductivity),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(format!(
                    "keycap {name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Heat capacity `c·m` in J/K.
    pub fn heat_capacity(&self) -> f64 {
        self.specific_heat * self.mass
    }
}

impl Default for KeycapSpec {
    fn default() -> Self {
        Self {
            contact_area: 0.000_240_25,
            thickness: 0.0015,
            mass: 0.000_471_6,
            specific_heat: 1000.0,
            conductivity: 0.25,
        }
    }
}

/// Room, skin and timing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvironmentSpec {
    /// Fingertip temperature, K.
    pub skin_temp: f64,
    /// Air and resting keyboard temperature, K.
    pub ambient_temp: f64,
    /// Contact time of one press, s.
    pub press_duration: f64,
    /// Newton cooling constant κ, 1/s.
    pub cooling_constant: f64,
    /// Smallest excess over ambient that still counts as residue, K.
    pub detectability_threshold: f64,
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("skin_temp", self.skin_temp),
            ("ambient_temp", self.ambient_temp),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be a positive kelvin value, got {value}"
                )));
            }
        }
        if !(self.press_duration.is_finite() && self.press_duration >= 0.0) {
            return Err(Error::domain("press_duration must be non-negative"));
        }
        if !(self.cooling_constant.is_finite() && self.cooling_constant > 0.0) {
            return Err(Error::domain("cooling_constant must be positive"));
        }
        if !(self.detectability_threshold.is_finite() && self.detectability_threshold > 0.0) {
            return Err(Error::domain("detectability_threshold must be positive"));
        }
        Ok(())
    }

    /// Largest excess a keycap can reach: it cannot get warmer than skin.
    pub fn max_excess(&self) -> f64 {
        (self.skin_temp - self.ambient_temp).max(0.0)
    }
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            skin_temp: 307.15,
            ambient_temp: 294.15,
            press_duration: 0.28,
            cooling_constant: 0.037,
            detectability_threshold: 0.04,
        }
    }
}

/// Heat delivered by one press and the resulting temperature rise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductionResult {
    /// J.
    pub heat: f64,
    /// K.
    pub delta_t: f64,
}

/// Fourier conduction `𝒦·A·(T₁−T₂)·t / d`.
pub fn conduction_heat(keycap: &KeycapSpec, env: &EnvironmentSpec) -> Result<f64> {
    if !(keycap.thickness > 0.0) {
        return Err(Error::domain(format!(
            "keycap thickness must be positive, got {}",
            keycap.thickness
        )));
    }
    Ok(keycap.conductivity
        * keycap.contact_area
        * (env.skin_temp - env.ambient_temp)
        * env.press_duration
        / keycap.thickness)
}

/// Temperature change from absorbing `heat` joules: `q / (c·m)`.
pub fn temperature_rise(heat: f64, keycap: &KeycapSpec) -> Result<f64> {
    if heat < 0.0 {
        return Err(Error::domain(format!("heat must be non-negative, got {heat}")));
    }
    let capacity = keycap.heat_capacity();
    if !(capacity > 0.0) {
        return Err(Error::domain("keycap mass and specific heat must be positive"));
    }
    Ok(heat / capacity)
}

/// Both halves of the heating step.
pub fn conduct(keycap: &KeycapSpec, env: &EnvironmentSpec) -> Result<ConductionResult> {
    let heat = conduction_heat(keycap, env)?;
    let delta_t = if heat >= 0.0 {
        temperature_rise(heat, keycap)?
    } else {
        // Keycap warmer than the finger: heat flows out, the keycap cools.
        -temperature_rise(-heat, keycap)?
    };
    Ok(ConductionResult { heat, delta_t })
}

/// Absolute temperature `t` seconds after the keycap stood `delta_t0` above ambient.
pub fn cool_temperature(delta_t0: f64, env: &EnvironmentSpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("elapsed time must be non-negative, got {t}")));
    }
    Ok(env.ambient_temp + decay(delta_t0, env.cooling_constant, t))
}

/// Excess remaining after `t` seconds of exponential decay.
pub(crate) fn decay(delta_t0: f64, kappa: f64, t: f64) -> f64 {
    delta_t0 * (-kappa * t).exp()
}

/// Seconds until an excess of `delta_t0` decays to `threshold`.
///
/// With `threshold` set to a camera's sensitivity this is the window in which
/// the camera can still see the press. Returns 0 when the excess already sits
/// at or below the threshold.
pub fn time_to_threshold(delta_t0: f64, threshold: f64, kappa: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::domain(format!("threshold must be positive, got {threshold}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::domain(format!("cooling constant must be positive, got {kappa}")));
    }
    if threshold >= delta_t0 {
        return Ok(0.0);
    }
    Ok((delta_t0 / threshold).ln() / kappa)
}
