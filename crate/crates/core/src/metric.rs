//! MAoI attributes, the event-triggered growth model, the closed-form
//! average MAoI and the energy-penalized device / system cost.
//!
//! Every modality's age grows with slope 1 during a sampling interval in
//! which no content event occurred and with slope `1 + psi` otherwise.
//! Events are Poisson with rate `lambda`, so the elevated slope has
//! probability `1 - exp(-lambda * tau)` and the long-run average is
//! `E[K] * (tau / 2 + T_sys)`.

use serde::{Deserialize, Serialize};

use crate::energy::total_energy;
use crate::error::{invalid, MaoiError, Result};
use crate::model::{
    system_time, DeviceProfile, ModalityKind, ModalityWeights, NormalizationConfig, Provenance, SystemConfig,
};
use crate::radio::{transmission_time, OffloadVector};

/// Which age the optimizer minimizes. `Aoi` zeroes every weight in the age term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Maoi,
    Aoi,
}

impl Objective {
    #[inline]
    pub fn weights(self, psi: [f64; 3]) -> [f64; 3] {
        match self {
            Objective::Maoi => psi,
            Objective::Aoi => [0.0; 3],
        }
    }
}

/// Raw frames of one modality.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameSequence {
    /// Flattened pixel values, one vector per frame.
    Image(Vec<Vec<f64>>),
    /// One feature vector per audio frame.
    Audio(Vec<Vec<f64>>),
    /// Per frame, a set of detected points with `features` values each.
    Signal { features: usize, frames: Vec<Vec<Vec<f64>>> },
}

fn check_frames(frames: &[Vec<f64>]) -> Result<usize> {
    if frames.len() < 2 {
        return Err(MaoiError::TooFewFrames {
            required: 2,
            got: frames.len(),
        });
    }
    let dim = frames[0].len();
    if dim == 0 {
        return Err(MaoiError::DimensionMismatch {
            index: 0,
            expected: 1,
            got: 0,
        });
    }
    for (index, frame) in frames.iter().enumerate() {
        if frame.len() != dim {
            return Err(MaoiError::DimensionMismatch {
                index,
                expected: dim,
                got: frame.len(),
            });
        }
    }
    Ok(dim)
}

/// Mean over consecutive pairs of the mean absolute element-wise difference.
fn mean_abs_consecutive(frames: &[Vec<f64>]) -> Result<f64> {
    let dim = check_frames(frames)? as f64;
    let total: f64 = frames
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b).abs()).sum::<f64>() / dim)
        .sum();
    Ok(total / (frames.len() - 1) as f64)
}

/// Average absolute pixel-wise difference between consecutive images.
pub fn image_dynamism(frames: &[Vec<f64>]) -> Result<f64> {
    mean_abs_consecutive(frames)
}

/// Fraction of the image covered by regions of interest.
pub fn roi_ratio(roi_area: f64, total_area: f64) -> Result<f64> {
    if !(total_area > 0.0) {
        return Err(invalid("total_area", "must be > 0"));
    }
    if !(0.0..=total_area).contains(&roi_area) {
        return Err(invalid("roi_area", format!("must lie in [0, {total_area}], got {roi_area}")));
    }
    Ok(roi_area / total_area)
}

/// Mean absolute feature change across consecutive audio frames.
pub fn audio_semantic_variation(frames: &[Vec<f64>]) -> Result<f64> {
    mean_abs_consecutive(frames)
}

/// Mean squared change of the per-frame point-averaged descriptors.
pub fn signal_dynamics(features: usize, frames: &[Vec<Vec<f64>>]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(MaoiError::TooFewFrames {
            required: 2,
            got: frames.len(),
        });
    }
    if features == 0 {
        return Err(invalid("features", "must be >= 1"));
    }
    let mut descriptors = Vec::with_capacity(frames.len());
    for (i, points) in frames.iter().enumerate() {
        if points.is_empty() {
            return Err(MaoiError::EmptyFrame(i));
        }
        let mut z = vec![0.0; features];
        for point in points {
            if point.len() != features {
                return Err(MaoiError::DimensionMismatch {
                    index: i,
                    expected: features,
                    got: point.len(),
                });
            }
            for (acc, v) in z.iter_mut().zip(point) {
                *acc += v;
            }
        }
        let n = points.len() as f64;
        z.iter_mut().for_each(|v| *v /= n);
        descriptors.push(z);
    }
    let total: f64 = descriptors
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / features as f64)
        .sum();
    Ok(total / (descriptors.len() - 1) as f64)
}

/// Audio and signal acquisition quality, each divided by its reference product.
pub fn quality_terms(profile: &DeviceProfile, norm: &NormalizationConfig) -> Result<(f64, f64)> {
    if profile.aud_bit_depth == 0 {
        return Err(invalid("aud_bit_depth", "must be >= 1"));
    }
    if profile.sig_bit_depth == 0 {
        return Err(invalid("sig_bit_depth", "must be >= 1"));
    }
    let q_aud = profile.aud_rate * f64::from(profile.aud_bit_depth) / (norm.aud_ref_rate * norm.aud_ref_depth);
    let q_sig = profile.sig_rate * f64::from(profile.sig_bit_depth) / (norm.sig_ref_rate * norm.sig_ref_depth);
    Ok((q_aud, q_sig))
}

/// Content attributes measured from frames.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameAttributes {
    pub image_dynamism: f64,
    pub roi_ratio: f64,
    pub audio_variation: f64,
    pub signal_dynamics: f64,
}

impl FrameAttributes {
    /// Measures every attribute; `roi` is `(roi_area, total_area)`.
    pub fn measure(
        image: &[Vec<f64>],
        roi: (f64, f64),
        audio: &[Vec<f64>],
        signal_features: usize,
        signal: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        Ok(Self {
            image_dynamism: image_dynamism(image)?,
            roi_ratio: roi_ratio(roi.0, roi.1)?,
            audio_variation: audio_semantic_variation(audio)?,
            signal_dynamics: signal_dynamics(signal_features, signal)?,
        })
    }
}

/// Sums attributes into per-modality weights.
pub fn extract_weights(
    profile: &DeviceProfile,
    norm: &NormalizationConfig,
    attrs: &FrameAttributes,
) -> Result<ModalityWeights> {
    let (q_aud, q_sig) = quality_terms(profile, norm)?;
    Ok(ModalityWeights {
        psi: [
            attrs.image_dynamism + attrs.roi_ratio,
            q_aud + attrs.audio_variation,
            attrs.signal_dynamics + q_sig,
        ],
        provenance: Provenance::Extracted,
    })
}

/// Two-point distribution of the age slope over one sampling interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthPmf {
    /// Slope when at least one event occurred: `1 + psi`.
    pub elevated: f64,
    /// `1 - exp(-lambda * tau)`.
    pub p_elevated: f64,
}

impl GrowthPmf {
    pub fn new(psi: f64, lambda: f64, tau: f64) -> Self {
        Self {
            elevated: 1.0 + psi,
            p_elevated: -(-lambda * tau).exp_m1(),
        }
    }

    pub fn mean(&self) -> f64 {
        1.0 + (self.elevated - 1.0) * self.p_elevated
    }
}

/// `E[K] = 1 + psi * (1 - exp(-lambda * tau))`.
#[inline]
pub fn growth_rate_expectation(psi: f64, lambda: f64, tau: f64) -> f64 {
    1.0 - psi * (-lambda * tau).exp_m1()
}

/// Long-run average MAoI of one modality.
#[inline]
pub fn avg_maoi_modality(psi: f64, lambda: f64, tau: f64, t_sys: f64) -> f64 {
    growth_rate_expectation(psi, lambda, tau) * (0.5 * tau + t_sys)
}

/// System time of every modality of device `d` under `x`.
pub fn system_times(d: usize, profiles: &[DeviceProfile], config: &SystemConfig, x: &OffloadVector) -> [f64; 3] {
    let offloaded = x.get(d);
    let trans = if offloaded {
        transmission_time(d, profiles, config, x)
    } else {
        0.0
    };
    ModalityKind::ALL.map(|m| system_time(&profiles[d], config, m, offloaded, trans))
}

/// Per-modality average ages `(MAoI, AoI)` of device `d`.
pub fn modality_ages(
    d: usize,
    profiles: &[DeviceProfile],
    config: &SystemConfig,
    tau: f64,
    x: &OffloadVector,
) -> ([f64; 3], [f64; 3]) {
    let t_sys = system_times(d, profiles, config, x);
    let psi = profiles[d].maoi_weights.psi;
    let maoi = std::array::from_fn(|s| avg_maoi_modality(psi[s], config.event_rates[s], tau, t_sys[s]));
    let aoi = std::array::from_fn(|s| 0.5 * tau + t_sys[s]);
    (maoi, aoi)
}

/// Average MAoI of device `d`, summed over its modalities.
pub fn avg_maoi_device(d: usize, profiles: &[DeviceProfile], config: &SystemConfig, tau: f64, x: &OffloadVector) -> f64 {
    modality_ages(d, profiles, config, tau, x).0.iter().sum()
}

/// Device cost with the relaxed energy constraint: age plus `mu * (E / tau - E_max)`.
pub fn penalized_cost(
    d: usize,
    profiles: &[DeviceProfile],
    config: &SystemConfig,
    tau: f64,
    mu: f64,
    x: &OffloadVector,
    objective: Objective,
) -> f64 {
    let t_sys = system_times(d, profiles, config, x);
    let psi = objective.weights(profiles[d].maoi_weights.psi);
    let age: f64 = (0..3)
        .map(|s| avg_maoi_modality(psi[s], config.event_rates[s], tau, t_sys[s]))
        .sum();
    let energy = total_energy(d, profiles, config, x);
    age + mu * (energy / tau - profiles[d].energy_budget)
}

/// Sum of penalized device costs.
pub fn system_cost(
    profiles: &[DeviceProfile],
    config: &SystemConfig,
    tau: &[f64],
    mu: &[f64],
    x: &OffloadVector,
    objective: Objective,
) -> f64 {
    (0..profiles.len())
        .map(|d| penalized_cost(d, profiles, config, tau[d], mu[d], x, objective))
        .sum()
}

/// The penalized cost of one device as a function of its sampling interval,
/// with the offloading profile and multiplier held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostCurve {
    pub psi: [f64; 3],
    pub lambda: [f64; 3],
    pub t_sys: [f64; 3],
    pub mu: f64,
    /// Energy of one update.
    pub energy: f64,
    pub energy_budget: f64,
}

impl CostCurve {
    pub fn value(&self, tau: f64) -> f64 {
        let age: f64 = (0..3)
            .map(|s| avg_maoi_modality(self.psi[s], self.lambda[s], tau, self.t_sys[s]))
            .sum();
        age + self.mu * (self.energy / tau - self.energy_budget)
    }

    /// First derivative in `tau`.
    pub fn d1(&self, tau: f64) -> f64 {
        let mut weighted_decay = 0.0;
        let mut slope_sum = 0.0;
        let mut growth_sum = 0.0;
        for s in 0..3 {
            let decay = self.psi[s] * self.lambda[s] * (-self.lambda[s] * tau).exp();
            weighted_decay += decay * self.t_sys[s];
            slope_sum += decay;
            growth_sum += growth_rate_expectation(self.psi[s], self.lambda[s], tau);
        }
        weighted_decay + 0.5 * tau * slope_sum + 0.5 * growth_sum - self.mu * self.energy / (tau * tau)
    }

    /// Second derivative in `tau`.
    pub fn d2(&self, tau: f64) -> f64 {
        let curvature: f64 = (0..3)
            .map(|s| {
                let l = self.lambda[s];
                self.psi[s] * l * (-l * tau).exp() * (1.0 - 0.5 * l * tau - l * self.t_sys[s])
            })
            .sum();
        2.0 * self.mu * self.energy / tau.powi(3) + curvature
    }

    pub fn energy_rate(&self, tau: f64) -> f64 {
        self.energy / tau
    }
}
