use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instance::Instance;
use crate::model::{DeviceProfile, ModalityWeights, SystemConfig};
use crate::radio::path_loss_gain;

/// How random scenarios are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSettings {
    /// Side of the square cell in meters; the base station sits at its center.
    pub side: f64,
    pub path_loss_exponent: f64,
    /// Distances below this are raised to it before computing the gain.
    pub min_distance: f64,
    /// Bounds of the uniform weight draw.
    pub psi_range: [f64; 2],
    /// Replaces the random weights when set.
    pub fixed_psi: Option<[f64; 3]>,
    /// Added to every device's audio weight after the draw.
    pub audio_weight_increment: f64,
    /// Every generated device starts from this profile.
    pub base_profile: DeviceProfile,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        Self {
            side: 40.0,
            path_loss_exponent: 2.0,
            min_distance: 1.0,
            psi_range: [0.5, 1.5],
            fixed_psi: None,
            audio_weight_increment: 0.0,
            base_profile: DeviceProfile::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub profiles: Vec<DeviceProfile>,
    pub config: SystemConfig,
    pub seed: u64,
    /// Device coordinates relative to the base station.
    pub positions: Vec<(f64, f64)>,
}

impl Scenario {
    pub fn instance(&self) -> Result<Instance> {
        Instance::new(self.profiles.clone(), self.config.clone())
    }
}

/// Draws `d_count` devices. Devices are drawn one after another from a
/// single stream, so a scenario with more devices extends the smaller one.
pub fn generate_scenario(d_count: usize, seed: u64, settings: &ScenarioSettings, config: &SystemConfig) -> Result<Scenario> {
    if d_count == 0 {
        return Err(invalid("d_count", "at least one device is required"));
    }
    if !(settings.side > 0.0) || !(settings.min_distance > 0.0) {
        return Err(invalid("side", "cell side and minimum distance must be positive"));
    }
    let [lo, hi] = settings.psi_range;
    if !(lo >= 0.0 && hi >= lo) {
        return Err(invalid("psi_range", "needs 0 <= low <= high"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 * settings.side;
    let mut profiles = Vec::with_capacity(d_count);
    let mut positions = Vec::with_capacity(d_count);
    for id in 0..d_count {
        let x = rng.random_range(-half..=half);
        let y = rng.random_range(-half..=half);
        let drawn: [f64; 3] = std::array::from_fn(|_| if hi > lo { rng.random_range(lo..hi) } else { lo });
        let mut psi = settings.fixed_psi.unwrap_or(drawn);
        psi[1] += settings.audio_weight_increment;
        let distance = x.hypot(y).max(settings.min_distance);
        profiles.push(DeviceProfile {
            id,
            channel_gain: path_loss_gain(distance, settings.path_loss_exponent),
            maoi_weights: ModalityWeights::direct(psi),
            ..settings.base_profile.clone()
        });
        positions.push((x, y));
    }
    Ok(Scenario {
        profiles,
        config: config.clone(),
        seed,
        positions,
    })
}
