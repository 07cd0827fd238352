use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use keyheat_core::keys::KeyboardLayout;
use keyheat_core::thermal::{CameraModel, TypingCadence, TypingStyle};
use keyheat_core::{EnvironmentSpec, KeycapSpec};

/// Everything a simulated attack needs, loadable from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub password: String,
    pub style: TypingStyle,
    pub layout: String,
    pub camera: String,
    pub keycap: KeycapSpec,
    pub environment: EnvironmentSpec,
    pub cadence: TypingCadence,
    /// Seconds between the last keystroke and the thermal image.
    pub capture_delay: f64,
    /// Recovery-curve sample times, seconds after the last keystroke.
    pub sample_times: Vec<f64>,
    /// Noise level of synthesized audio.
    pub snr_db: f64,
    /// Synthetic training keystrokes per key and typing style.
    pub training_per_key: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            password: "passw0rd".into(),
            style: TypingStyle::HuntAndPeck,
            layout: "us-qwerty".into(),
            camera: "sc620".into(),
            keycap: KeycapSpec::default(),
            environment: EnvironmentSpec::default(),
            cadence: TypingCadence::default(),
            capture_delay: 10.0,
            sample_times: (0..=24).map(|i| f64::from(i) * 5.0).collect(),
            snr_db: 20.0,
            training_per_key: 5,
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.password.is_empty() {
            bail!("password is empty");
        }
        self.layout()?;
        self.camera()?;
        self.keycap.validate()?;
        self.environment.validate()?;
        if !(self.capture_delay >= 0.0) {
            bail!("capture_delay must be non-negative");
        }
        if self.sample_times.iter().any(|t| !(*t >= 0.0)) || self.sample_times.windows(2).any(|w| w[1] < w[0]) {
            bail!("sample_times must be non-negative and ascending");
        }
        if self.training_per_key == 0 {
            bail!("training_per_key must be positive");
        }
        Ok(())
    }

    pub fn layout(&self) -> anyhow::Result<KeyboardLayout> {
        match self.layout.as_str() {
            "us-qwerty" | "qwerty" => Ok(KeyboardLayout::us_qwerty()),
            other => bail!("unknown keyboard layout {other:?}"),
        }
    }

    pub fn camera(&self) -> anyhow::Result<CameraModel> {
        CameraModel::preset(&self.camera).with_context(|| {
            let names: Vec<&str> = CameraModel::PRESETS.iter().map(|p| p.0).collect();
            format!("unknown camera preset {:?} (known: {})", self.camera, names.join(", "))
        })
    }
}
