//! Uplink rate under co-channel interference and transmission time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{total_data_bits, DeviceProfile, SystemConfig};

/// Device-level binary offloading decisions; `true` means offloaded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OffloadVector(Vec<bool>);

impl OffloadVector {
    pub fn all_local(devices: usize) -> Self {
        Self(vec![false; devices])
    }

    pub fn all_offloaded(devices: usize) -> Self {
        Self(vec![true; devices])
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| b != 0).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, d: usize) -> bool {
        self.0[d]
    }

    pub fn set(&mut self, d: usize, offload: bool) {
        self.0[d] = offload;
    }

    /// Copy with device `d` switched.
    pub fn flipped(&self, d: usize) -> Self {
        let mut out = self.clone();
        out.0[d] = !out.0[d];
        out
    }

    pub fn offloaded_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

impl fmt::Display for OffloadVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Received power `P_d * g_d` of one device at the base station.
#[inline]
pub fn received_power(profile: &DeviceProfile) -> f64 {
    profile.tx_power * profile.channel_gain
}

/// Interference seen by device `d`: received power of every other offloading device.
pub fn interference(d: usize, profiles: &[DeviceProfile], x: &OffloadVector) -> f64 {
    profiles
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != d && x.get(j))
        .map(|(_, p)| received_power(p))
        .sum()
}

/// Shannon rate for a given interference level.
#[inline]
pub fn rate_under_interference(profile: &DeviceProfile, config: &SystemConfig, interference: f64) -> f64 {
    let sinr = received_power(profile) / (config.noise_power + interference);
    config.bandwidth * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Uplink rate of device `d` in bit/s. Independent of `x[d]` itself.
pub fn uplink_rate(d: usize, profiles: &[DeviceProfile], config: &SystemConfig, x: &OffloadVector) -> f64 {
    rate_under_interference(&profiles[d], config, interference(d, profiles, x))
}

/// Time to upload all modalities of device `d`.
pub fn transmission_time(d: usize, profiles: &[DeviceProfile], config: &SystemConfig, x: &OffloadVector) -> f64 {
    total_data_bits(&profiles[d]) / uplink_rate(d, profiles, config, x)
}

/// Distance-based channel gain `h^-exponent`.
pub fn path_loss_gain(distance: f64, exponent: f64) -> f64 {
    distance.powf(-exponent)
}
