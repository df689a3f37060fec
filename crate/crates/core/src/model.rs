//! Device and cell parameters, data sizes, complexity scaling laws and the
//! sensing / computation / waiting / system time models.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// The three update modalities, ordered by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityKind {
    Image = 1,
    Audio = 2,
    Signal = 3,
}

impl ModalityKind {
    pub const ALL: [ModalityKind; 3] = [ModalityKind::Image, ModalityKind::Audio, ModalityKind::Signal];

    /// Zero-based position, used to index per-modality arrays.
    #[inline]
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn name(self) -> &'static str {
        match self {
            ModalityKind::Image => "image",
            ModalityKind::Audio => "audio",
            ModalityKind::Signal => "signal",
        }
    }
}

/// Where a device's update is processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Local,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Weights supplied as numbers.
    #[default]
    Direct,
    /// Weights computed from frame attributes.
    Extracted,
}

/// Per-modality MAoI weights `psi[s]`, indexed by [`ModalityKind::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityWeights {
    pub psi: [f64; 3],
    #[serde(default)]
    pub provenance: Provenance,
}

impl ModalityWeights {
    pub fn direct(psi: [f64; 3]) -> Self {
        Self {
            psi,
            provenance: Provenance::Direct,
        }
    }

    pub fn get(&self, modality: ModalityKind) -> f64 {
        self.psi[modality.index()]
    }
}

impl Default for ModalityWeights {
    fn default() -> Self {
        Self::direct([1.0; 3])
    }
}

/// Reference products used to scale the quality terms to O(1).
/// Setting every reference to 1 gives the raw rate-times-depth products.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    pub aud_ref_rate: f64,
    pub aud_ref_depth: f64,
    pub sig_ref_rate: f64,
    pub sig_ref_depth: f64,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            aud_ref_rate: 16_000.0,
            aud_ref_depth: 16.0,
            sig_ref_rate: 80.0,
            sig_ref_depth: 16.0,
        }
    }
}

/// Physical, media, energy and weight parameters of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceProfile {
    pub id: usize,
    pub img_height: u32,
    pub img_width: u32,
    pub aud_duration: f64,
    pub aud_rate: f64,
    pub aud_bit_depth: u32,
    pub aud_channels: u32,
    pub sig_duration: f64,
    pub sig_frame_rate: f64,
    pub sig_points_per_frame: u32,
    pub sig_features_per_point: u32,
    pub sig_bits_per_feature: u32,
    pub sig_rate: f64,
    pub sig_bit_depth: u32,
    pub tx_power: f64,
    pub channel_gain: f64,
    pub cam_overhead_energy: f64,
    pub per_pixel_energy: f64,
    pub img_channels: u32,
    pub aud_baseline_power: f64,
    pub adc_scaling: f64,
    pub sig_active_power: f64,
    pub maoi_weights: ModalityWeights,
    pub energy_budget: f64,
}

impl Default for DeviceProfile {
    fn default() -> Self {
        Self {
            id: 0,
            img_height: 224,
            img_width: 224,
            aud_duration: 2.0,
            aud_rate: 16_000.0,
            aud_bit_depth: 16,
            aud_channels: 1,
            sig_duration: 3.0,
            sig_frame_rate: 80.0,
            sig_points_per_frame: 64,
            sig_features_per_point: 4,
            sig_bits_per_feature: 16,
            sig_rate: 80.0,
            sig_bit_depth: 16,
            tx_power: 0.1,
            channel_gain: 1e-2,
            cam_overhead_energy: 5e-3,
            per_pixel_energy: 15e-12,
            img_channels: 3,
            aud_baseline_power: 8e-3,
            adc_scaling: 1e-8,
            sig_active_power: 50e-3,
            maoi_weights: ModalityWeights::default(),
            energy_budget: 1.0,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

fn nonzero(name: &'static str, v: u32) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(invalid(name, "must be >= 1"))
    }
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        nonzero("img_height", self.img_height)?;
        nonzero("img_width", self.img_width)?;
        non_negative("aud_duration", self.aud_duration)?;
        positive("aud_rate", self.aud_rate)?;
        nonzero("aud_bit_depth", self.aud_bit_depth)?;
        nonzero("aud_channels", self.aud_channels)?;
        non_negative("sig_duration", self.sig_duration)?;
        positive("sig_frame_rate", self.sig_frame_rate)?;
        nonzero("sig_points_per_frame", self.sig_points_per_frame)?;
        nonzero("sig_features_per_point", self.sig_features_per_point)?;
        nonzero("sig_bits_per_feature", self.sig_bits_per_feature)?;
        positive("sig_rate", self.sig_rate)?;
        nonzero("sig_bit_depth", self.sig_bit_depth)?;
        positive("tx_power", self.tx_power)?;
        positive("channel_gain", self.channel_gain)?;
        non_negative("cam_overhead_energy", self.cam_overhead_energy)?;
        non_negative("per_pixel_energy", self.per_pixel_energy)?;
        nonzero("img_channels", self.img_channels)?;
        non_negative("aud_baseline_power", self.aud_baseline_power)?;
        non_negative("adc_scaling", self.adc_scaling)?;
        non_negative("sig_active_power", self.sig_active_power)?;
        positive("energy_budget", self.energy_budget)?;
        for &psi in &self.maoi_weights.psi {
            non_negative("maoi_weights", psi)?;
        }
        let samples = self.aud_duration * self.aud_rate;
        if (samples - samples.round()).abs() > 1e-6 * samples.max(1.0) {
            return Err(invalid(
                "aud_duration",
                format!("duration x rate = {samples} is not an integer sample count"),
            ));
        }
        Ok(())
    }

    /// Number of signal frames per update; partial frames are dropped.
    pub fn signal_frames(&self) -> f64 {
        (self.sig_frame_rate * self.sig_duration + 1e-9).floor()
    }
}

/// Cell-wide constants and solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub bandwidth: f64,
    pub noise_power: f64,
    /// FLOP/s.
    pub f_local: f64,
    /// FLOP/s.
    pub f_edge: f64,
    pub energy_per_flop: f64,
    pub resnet_base_flops: f64,
    pub ds2_base_flops_per_sec: f64,
    pub tft_base_flops: f64,
    pub tft_base_len: f64,
    pub event_rates: [f64; 3],
    pub tau_min: f64,
    /// Edge payload capacity in bits.
    pub capacity_threshold: f64,
    pub lagrange_step: f64,
    pub step_rule: StepRule,
    pub convergence_eps: f64,
    pub newton_max_iters: usize,
    pub newton_tol: f64,
    pub local_schedule_order: [ModalityKind; 3],
    /// Process local modalities in descending weight order instead of the fixed order.
    pub weight_priority_scheduling: bool,
    pub max_outer_iters: usize,
    /// Relative energy overshoot tolerated when declaring convergence.
    pub energy_tolerance: f64,
    pub initial_multiplier: f64,
    /// Fraction of the other devices assumed to offload by the IDD baseline.
    pub idd_interference_prior: f64,
    /// Also search the non-convex region above the threshold for a cheaper interval.
    pub outer_region_refinement: bool,
    pub commit_rule: CommitRule,
    pub normalization: NormalizationConfig,
}

/// Step size applied to the multiplier update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `eta * max(1, mu / budget)`: never smaller than the fixed step, and
    /// proportional to the multiplier once it exceeds the budget.
    #[default]
    Scaled,
    /// `eta` used directly, in multiplier units per J/s.
    Fixed,
}

/// How the offloading round picks which deviating device to commit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CommitRule {
    /// Only the largest strictly positive system-cost reduction is committed.
    #[default]
    SystemGain,
    /// Largest system-cost reduction among devices whose own best response differs,
    /// committed even when that reduction is not positive. Ends at a Nash equilibrium.
    Equilibrium,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            bandwidth: 1e6,
            noise_power: 1e-13,
            f_local: 1e9,
            f_edge: 1e10,
            energy_per_flop: 1e-9,
            resnet_base_flops: 4e9,
            ds2_base_flops_per_sec: 5e9,
            tft_base_flops: 0.45e9,
            tft_base_len: 200.0,
            event_rates: [0.8; 3],
            tau_min: 2.0,
            capacity_threshold: 4.0e7,
            lagrange_step: 0.01,
            step_rule: StepRule::Scaled,
            convergence_eps: 1e-3,
            newton_max_iters: 50,
            newton_tol: 1e-8,
            local_schedule_order: ModalityKind::ALL,
            weight_priority_scheduling: false,
            max_outer_iters: 10_000,
            energy_tolerance: 0.05,
            initial_multiplier: 0.1,
            idd_interference_prior: 0.5,
            outer_region_refinement: true,
            commit_rule: CommitRule::SystemGain,
            normalization: NormalizationConfig::default(),
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        positive("bandwidth", self.bandwidth)?;
        positive("noise_power", self.noise_power)?;
        positive("f_local", self.f_local)?;
        positive("f_edge", self.f_edge)?;
        if self.f_edge < self.f_local {
            return Err(invalid("f_edge", "must be >= f_local"));
        }
        non_negative("energy_per_flop", self.energy_per_flop)?;
        non_negative("resnet_base_flops", self.resnet_base_flops)?;
        non_negative("ds2_base_flops_per_sec", self.ds2_base_flops_per_sec)?;
        non_negative("tft_base_flops", self.tft_base_flops)?;
        positive("tft_base_len", self.tft_base_len)?;
        for &rate in &self.event_rates {
            positive("event_rates", rate)?;
        }
        positive("tau_min", self.tau_min)?;
        non_negative("capacity_threshold", self.capacity_threshold)?;
        positive("lagrange_step", self.lagrange_step)?;
        if !(self.convergence_eps > 0.0) {
            return Err(invalid("convergence_eps", format!("must be > 0, got {}", self.convergence_eps)));
        }
        positive("newton_tol", self.newton_tol)?;
        if self.newton_max_iters == 0 {
            return Err(invalid("newton_max_iters", "must be >= 1"));
        }
        if self.max_outer_iters == 0 {
            return Err(invalid("max_outer_iters", "must be >= 1"));
        }
        let mut order = self.local_schedule_order;
        order.sort();
        if order != ModalityKind::ALL {
            return Err(invalid(
                "local_schedule_order",
                "must be a permutation of image, audio, signal",
            ));
        }
        if !(0.0..=1.0).contains(&self.idd_interference_prior) {
            return Err(invalid("idd_interference_prior", "must lie in [0, 1]"));
        }
        if self.energy_tolerance.is_nan() || self.energy_tolerance < 0.0 {
            return Err(invalid("energy_tolerance", "must be >= 0"));
        }
        non_negative("initial_multiplier", self.initial_multiplier)?;
        let n = &self.normalization;
        positive("normalization.aud_ref_rate", n.aud_ref_rate)?;
        positive("normalization.aud_ref_depth", n.aud_ref_depth)?;
        positive("normalization.sig_ref_rate", n.sig_ref_rate)?;
        positive("normalization.sig_ref_depth", n.sig_ref_depth)?;
        Ok(())
    }

    pub fn event_rate(&self, modality: ModalityKind) -> f64 {
        self.event_rates[modality.index()]
    }

    pub fn cpu(&self, location: Location) -> f64 {
        match location {
            Location::Local => self.f_local,
            Location::Edge => self.f_edge,
        }
    }
}

/// Payload of one modality in bits.
pub fn data_size_bits(profile: &DeviceProfile, modality: ModalityKind) -> f64 {
    match modality {
        ModalityKind::Image => f64::from(profile.img_height) * f64::from(profile.img_width) * 3.0 * 8.0,
        ModalityKind::Audio => {
            profile.aud_duration
                * profile.aud_rate
                * f64::from(profile.aud_channels)
                * f64::from(profile.aud_bit_depth)
        }
        ModalityKind::Signal => {
            profile.signal_frames()
                * f64::from(profile.sig_points_per_frame)
                * f64::from(profile.sig_features_per_point)
                * f64::from(profile.sig_bits_per_feature)
        }
    }
}

/// Total payload of one update (all modalities).
pub fn total_data_bits(profile: &DeviceProfile) -> f64 {
    ModalityKind::ALL.iter().map(|&m| data_size_bits(profile, m)).sum()
}

/// Inference workload in FLOPs, scaled from each network's reference input.
pub fn compute_flops(profile: &DeviceProfile, config: &SystemConfig, modality: ModalityKind) -> f64 {
    match modality {
        ModalityKind::Image => {
            let area = f64::from(profile.img_width) * f64::from(profile.img_height);
            config.resnet_base_flops * area / (224.0 * 224.0)
        }
        ModalityKind::Audio => config.ds2_base_flops_per_sec * profile.aud_duration,
        ModalityKind::Signal => {
            let ratio = profile.signal_frames() / config.tft_base_len;
            config.tft_base_flops * ratio * ratio
        }
    }
}

pub fn compute_time(
    profile: &DeviceProfile,
    config: &SystemConfig,
    modality: ModalityKind,
    location: Location,
) -> f64 {
    compute_flops(profile, config, modality) / config.cpu(location)
}

pub fn sensing_time(profile: &DeviceProfile, modality: ModalityKind) -> f64 {
    match modality {
        ModalityKind::Image => 0.0,
        ModalityKind::Audio => profile.aud_duration,
        ModalityKind::Signal => profile.sig_duration,
    }
}

/// Order in which the device's local processor handles its modalities.
pub fn local_order(profile: &DeviceProfile, config: &SystemConfig) -> [ModalityKind; 3] {
    if config.weight_priority_scheduling {
        let mut order = ModalityKind::ALL;
        // stable sort keeps index order among equal weights
        order.sort_by(|a, b| {
            profile
                .maoi_weights
                .get(*b)
                .total_cmp(&profile.maoi_weights.get(*a))
        });
        order
    } else {
        config.local_schedule_order
    }
}

/// Local compute time of every modality scheduled ahead of `modality`.
pub fn local_waiting_time(profile: &DeviceProfile, config: &SystemConfig, modality: ModalityKind) -> f64 {
    local_order(profile, config)
        .iter()
        .take_while(|&&m| m != modality)
        .map(|&m| compute_time(profile, config, m, Location::Local))
        .sum()
}

/// System time of one modality. `trans_time` is the device's uplink time
/// under the current offloading profile and is ignored when processing locally.
pub fn system_time(
    profile: &DeviceProfile,
    config: &SystemConfig,
    modality: ModalityKind,
    offloaded: bool,
    trans_time: f64,
) -> f64 {
    let sensing = sensing_time(profile, modality);
    if offloaded {
        sensing + trans_time + compute_time(profile, config, modality, Location::Edge)
    } else {
        sensing
            + local_waiting_time(profile, config, modality)
            + compute_time(profile, config, modality, Location::Local)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_defaults_data_sizes() {
        let p = DeviceProfile::default();
        assert_eq!(data_size_bits(&p, ModalityKind::Image), 1_204_224.0);
        assert_eq!(data_size_bits(&p, ModalityKind::Audio), 512_000.0);
        assert_eq!(p.signal_frames(), 240.0);
        assert_eq!(data_size_bits(&p, ModalityKind::Signal), 983_040.0);
        assert_eq!(total_data_bits(&p), 2_699_264.0);
    }

    #[test]
    fn fractional_frames_truncate() {
        let p = DeviceProfile {
            sig_duration: 3.01,
            ..DeviceProfile::default()
        };
        assert_eq!(p.signal_frames(), 240.0);
        let p = DeviceProfile {
            sig_duration: 2.999,
            ..DeviceProfile::default()
        };
        assert_eq!(p.signal_frames(), 239.0);
    }

    #[test]
    fn flops_and_times() {
        let p = DeviceProfile::default();
        let c = SystemConfig::default();
        assert_relative_eq!(compute_flops(&p, &c, ModalityKind::Image), 4e9);
        assert_relative_eq!(compute_flops(&p, &c, ModalityKind::Audio), 1e10);
        assert_relative_eq!(compute_flops(&p, &c, ModalityKind::Signal), 0.648e9, max_relative = 1e-12);
        assert_relative_eq!(compute_time(&p, &c, ModalityKind::Image, Location::Local), 4.0);
        assert_relative_eq!(compute_time(&p, &c, ModalityKind::Image, Location::Edge), 0.4);
        let silent = DeviceProfile {
            aud_duration: 0.0,
            ..p
        };
        assert_eq!(compute_time(&silent, &c, ModalityKind::Audio, Location::Local), 0.0);
    }

    #[test]
    fn sensing_times() {
        let p = DeviceProfile::default();
        assert_eq!(sensing_time(&p, ModalityKind::Image), 0.0);
        assert_eq!(sensing_time(&p, ModalityKind::Audio), 2.0);
        assert_eq!(sensing_time(&p, ModalityKind::Signal), 3.0);
    }

    #[test]
    fn waiting_follows_schedule() {
        let p = DeviceProfile::default();
        let c = SystemConfig::default();
        assert_eq!(local_waiting_time(&p, &c, ModalityKind::Image), 0.0);
        assert_relative_eq!(local_waiting_time(&p, &c, ModalityKind::Audio), 4.0);
        assert_relative_eq!(local_waiting_time(&p, &c, ModalityKind::Signal), 14.0);

        let c = SystemConfig {
            local_schedule_order: [ModalityKind::Signal, ModalityKind::Audio, ModalityKind::Image],
            ..SystemConfig::default()
        };
        assert_eq!(local_waiting_time(&p, &c, ModalityKind::Signal), 0.0);
        assert_relative_eq!(local_waiting_time(&p, &c, ModalityKind::Image), 10.648, max_relative = 1e-12);
    }

    #[test]
    fn weight_priority_puts_heaviest_first() {
        let mut p = DeviceProfile::default();
        p.maoi_weights = ModalityWeights::direct([0.5, 2.0, 1.0]);
        let c = SystemConfig {
            weight_priority_scheduling: true,
            ..SystemConfig::default()
        };
        assert_eq!(
            local_order(&p, &c),
            [ModalityKind::Audio, ModalityKind::Signal, ModalityKind::Image]
        );
        // equal weights fall back to index order
        p.maoi_weights = ModalityWeights::direct([1.0; 3]);
        assert_eq!(local_order(&p, &c), ModalityKind::ALL);
    }

    #[test]
    fn system_time_examples() {
        let p = DeviceProfile::default();
        let c = SystemConfig::default();
        assert_relative_eq!(system_time(&p, &c, ModalityKind::Image, false, 0.0), 4.0);
        assert_relative_eq!(
            system_time(&p, &c, ModalityKind::Signal, false, 0.0),
            17.648,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            system_time(&p, &c, ModalityKind::Audio, true, 0.0813),
            3.0813,
            max_relative = 1e-12
        );
    }

    #[test]
    fn edge_time_is_scaled_local_time() {
        let p = DeviceProfile::default();
        let c = SystemConfig::default();
        for m in ModalityKind::ALL {
            let local = compute_time(&p, &c, m, Location::Local);
            let edge = compute_time(&p, &c, m, Location::Edge);
            assert_relative_eq!(edge, local * c.f_local / c.f_edge, max_relative = 1e-15);
        }
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut p = DeviceProfile::default();
        assert!(p.validate().is_ok());
        p.channel_gain = 0.0;
        assert!(p.validate().is_err());

        let mut c = SystemConfig::default();
        assert!(c.validate().is_ok());
        c.local_schedule_order = [ModalityKind::Image, ModalityKind::Image, ModalityKind::Signal];
        assert!(c.validate().is_err());
        let c = SystemConfig {
            f_edge: 1e8,
            ..SystemConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn modality_order_is_index_order() {
        assert!(ModalityKind::Image < ModalityKind::Audio);
        assert!(ModalityKind::Audio < ModalityKind::Signal);
        assert_eq!(ModalityKind::Signal.index(), 2);
    }
}
