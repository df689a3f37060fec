//! Per-update sensing, computation and transmission energy.

use crate::model::{compute_flops, DeviceProfile, ModalityKind, SystemConfig};
use crate::radio::{transmission_time, OffloadVector};

/// Sensing energy of one modality for one update, in joules.
pub fn modality_sensing_energy(profile: &DeviceProfile, modality: ModalityKind) -> f64 {
    match modality {
        ModalityKind::Image => {
            let pixels = f64::from(profile.img_height) * f64::from(profile.img_width) * f64::from(profile.img_channels);
            profile.cam_overhead_energy + profile.per_pixel_energy * pixels
        }
        ModalityKind::Audio => {
            let adc = profile.adc_scaling
                * profile.aud_rate
                * f64::from(profile.aud_bit_depth)
                * f64::from(profile.aud_channels);
            (profile.aud_baseline_power + adc) * profile.aud_duration
        }
        ModalityKind::Signal => profile.sig_active_power * profile.sig_duration,
    }
}

pub fn sensing_energy(profile: &DeviceProfile) -> f64 {
    ModalityKind::ALL
        .iter()
        .map(|&m| modality_sensing_energy(profile, m))
        .sum()
}

/// Energy of running all three networks on the device.
pub fn computation_energy(profile: &DeviceProfile, config: &SystemConfig) -> f64 {
    let flops: f64 = ModalityKind::ALL
        .iter()
        .map(|&m| compute_flops(profile, config, m))
        .sum();
    config.energy_per_flop * flops
}

pub fn transmission_energy(d: usize, profiles: &[DeviceProfile], config: &SystemConfig, x: &OffloadVector) -> f64 {
    profiles[d].tx_power * transmission_time(d, profiles, config, x)
}

/// Energy of one update under the device's branch of `x`.
pub fn total_energy(d: usize, profiles: &[DeviceProfile], config: &SystemConfig, x: &OffloadVector) -> f64 {
    let profile = &profiles[d];
    let branch = if x.get(d) {
        transmission_energy(d, profiles, config, x)
    } else {
        computation_energy(profile, config)
    };
    sensing_energy(profile) + branch
}

/// Average power draw `E_d(x) / tau_d`.
pub fn avg_energy_rate(d: usize, profiles: &[DeviceProfile], config: &SystemConfig, x: &OffloadVector, tau: f64) -> f64 {
    total_energy(d, profiles, config, x) / tau
}
