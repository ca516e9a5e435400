//! System model shared by every access scheme.
//!
//! A single cell of radius `R` with the base station at its centre. Devices
//! are placed uniformly over the disc and see a pure path-loss channel
//! `g = (r/R)^(-γ)`; no shadowing or fading. Only the normalized distance
//! `u = r/R` ever enters a formula, so the cell radius is not a parameter.
//! Transmit powers are fractions of the device maximum, so a power is
//! feasible iff it is at most `1`.

use std::f64::consts::LN_2;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

/// Errors raised by the system model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("normalized distance {0} is outside the cell (0, 1]")]
    OutsideCell(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("channel gain {0} is below the cell-edge gain 1")]
    GainBelowEdge(f64),
    #[error("normalized power {0} is outside [0, 1]")]
    PowerOutOfRange(f64),
    #[error("transmit bandwidth exceeds the system bandwidth (W/W_t = {0})")]
    BandwidthTooWide(f64),
}

/// Radio-resource and propagation constants for one resource block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Total bandwidth `W` in Hz.
    pub bandwidth_hz: f64,
    /// Slot duration `τ_s` in seconds.
    pub slot_s: f64,
    /// Packet payload `L` in bits.
    pub payload_bits: f64,
    /// Reference SNR `μ` (linear): received SNR of a cell-edge device
    /// transmitting at full power over the whole band.
    pub ref_snr: f64,
    /// Path-loss exponent `γ`.
    pub pathloss_exp: f64,
    /// Shortest TDMA sub-slot the radio supports, in seconds.
    pub min_slot_s: f64,
    /// Narrowest FDMA subchannel the radio supports, in Hz.
    pub min_subchannel_hz: f64,
}

impl Default for SystemParams {
    /// W = 1 MHz, τ_s = 1 s, L = 1000 bits, μ = 0 dB, γ = 4, minima of
    /// 1 ms and 1 kHz.
    fn default() -> Self {
        SystemParams {
            bandwidth_hz: 1e6,
            slot_s: 1.0,
            payload_bits: 1000.0,
            ref_snr: 1.0,
            pathloss_exp: 4.0,
            min_slot_s: 1e-3,
            min_subchannel_hz: 1e3,
        }
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParam {
        name,
        reason: reason.into(),
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("slot_s", self.slot_s),
            ("payload_bits", self.payload_bits),
            ("ref_snr", self.ref_snr),
            ("pathloss_exp", self.pathloss_exp),
            ("min_slot_s", self.min_slot_s),
            ("min_subchannel_hz", self.min_subchannel_hz),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if self.pathloss_exp <= 2.0 {
            return Err(invalid(
                "pathloss_exp",
                format!("must exceed 2, got {}", self.pathloss_exp),
            ));
        }
        if self.min_slot_s > self.slot_s {
            return Err(invalid("min_slot_s", "must not exceed slot_s"));
        }
        if self.min_subchannel_hz > self.bandwidth_hz {
            return Err(invalid("min_subchannel_hz", "must not exceed bandwidth_hz"));
        }
        Ok(())
    }

    /// Spectral efficiency `L / (W τ_s)` in bit/s/Hz that every packet needs
    /// when it occupies the whole resource block.
    pub fn required_rate(&self) -> f64 {
        self.payload_bits / (self.bandwidth_hz * self.slot_s)
    }

    /// SINR threshold `β = 2^(L/(W τ_s)) - 1` for the whole resource block.
    pub fn sinr_threshold(&self) -> f64 {
        snr_threshold(self.required_rate())
    }

    /// Largest partition count allowed by the FDMA subchannel minimum.
    pub fn max_subchannels(&self) -> u32 {
        partition_cap(self.bandwidth_hz, self.min_subchannel_hz)
    }

    /// Largest partition count allowed by the TDMA slot minimum.
    pub fn max_subslots(&self) -> u32 {
        partition_cap(self.slot_s, self.min_slot_s)
    }

    /// Stable textual echo of every field, free of commas so it can sit in a
    /// CSV cell. [`SystemParams::from_digest`] inverts it exactly.
    pub fn digest(&self) -> String {
        format!(
            "W={};tau={};L={};mu={};gamma={};min_slot={};min_sub={}",
            self.bandwidth_hz,
            self.slot_s,
            self.payload_bits,
            self.ref_snr,
            self.pathloss_exp,
            self.min_slot_s,
            self.min_subchannel_hz
        )
    }

    pub fn from_digest(digest: &str) -> Option<SystemParams> {
        let mut out = SystemParams::default();
        let mut seen = 0;
        for part in digest.split(';') {
            let (key, value) = part.split_once('=')?;
            let value: f64 = value.parse().ok()?;
            let slot = match key {
                "W" => &mut out.bandwidth_hz,
                "tau" => &mut out.slot_s,
                "L" => &mut out.payload_bits,
                "mu" => &mut out.ref_snr,
                "gamma" => &mut out.pathloss_exp,
                "min_slot" => &mut out.min_slot_s,
                "min_sub" => &mut out.min_subchannel_hz,
                _ => return None,
            };
            *slot = value;
            seen += 1;
        }
        (seen == 7).then_some(out)
    }
}

/// `2^rate - 1`, accurate for small rates.
pub(crate) fn snr_threshold(rate: f64) -> f64 {
    (rate * LN_2).exp_m1()
}

fn partition_cap(total: f64, minimum: f64) -> u32 {
    // Guard against 1e6 / 1e3 landing a hair below 1000.
    let ratio = total / minimum;
    let cap = (ratio * (1.0 + 1e-12)).floor();
    cap.clamp(1.0, u32::MAX as f64) as u32
}

/// Poisson packet arrivals at the base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel {
    /// Mean arrival rate `λ` in packets per second.
    pub arrival_rate: f64,
}

impl TrafficModel {
    pub fn new(arrival_rate: f64) -> Result<Self, ModelError> {
        if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
            return Err(invalid(
                "arrival_rate",
                format!("must be finite and >= 0, got {arrival_rate}"),
            ));
        }
        Ok(TrafficModel { arrival_rate })
    }

    /// Expected number of packets per slot, `λ τ_s`.
    pub fn offered_load(&self, slot_s: f64) -> f64 {
        self.arrival_rate * slot_s
    }
}

/// Normalized gain `u^(-γ)` of a device at normalized distance `u = r/R`.
pub fn channel_gain(normalized_distance: f64, pathloss_exp: f64) -> Result<f64, ModelError> {
    let u = normalized_distance;
    if !(u > 0.0 && u <= 1.0) {
        return Err(ModelError::OutsideCell(u));
    }
    if !(pathloss_exp > 0.0) {
        return Err(invalid("pathloss_exp", "must be > 0"));
    }
    Ok(u.powf(-pathloss_exp))
}

/// Draws `count` normalized distances uniformly over the unit disc.
///
/// Inverse-CDF sampling: `u = sqrt(v)` with `v` uniform on `(0, 1]`, giving
/// density `2u`.
pub fn sample_placement<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| placement_from_uniform(unit_open_closed(rng))).collect()
}

/// Maps a uniform `v ∈ (0, 1]` to a normalized distance.
pub fn placement_from_uniform(v: f64) -> f64 {
    v.sqrt()
}

/// Uniform on `(0, 1]`.
pub(crate) fn unit_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Number of packets arriving in one slot, Poisson with mean `λ τ_s`.
pub fn sample_arrivals<R: Rng + ?Sized>(traffic: &TrafficModel, slot_s: f64, rng: &mut R) -> u64 {
    let mean = traffic.offered_load(slot_s);
    if mean <= 0.0 {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(dist) => dist.sample(rng) as u64,
        // Only reachable for non-finite means, which TrafficModel rejects.
        Err(_) => 0,
    }
}

/// Received SNR `p · (W/W_t) · μ · g`.
pub fn received_snr(
    normalized_power: f64,
    bandwidth_fraction: f64,
    ref_snr: f64,
    gain: f64,
) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&normalized_power) {
        return Err(ModelError::PowerOutOfRange(normalized_power));
    }
    if !(bandwidth_fraction >= 1.0) {
        return Err(ModelError::BandwidthTooWide(bandwidth_fraction));
    }
    Ok(normalized_power * bandwidth_fraction * ref_snr * gain)
}

/// Contending devices, held as normalized channel gains sorted strongest
/// first. Every gain is at least `1` (the cell-edge gain).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviceSet {
    gains: Vec<f64>,
}

impl DeviceSet {
    pub fn from_gains(mut gains: Vec<f64>) -> Result<Self, ModelError> {
        if let Some(&bad) = gains.iter().find(|g| !(**g >= 1.0)) {
            return Err(ModelError::GainBelowEdge(bad));
        }
        gains.sort_unstable_by(|a, b| b.total_cmp(a));
        Ok(DeviceSet { gains })
    }

    pub fn from_distances(distances: &[f64], pathloss_exp: f64) -> Result<Self, ModelError> {
        let gains = distances
            .iter()
            .map(|&u| channel_gain(u, pathloss_exp))
            .collect::<Result<Vec<_>, _>>()?;
        DeviceSet::from_gains(gains)
    }

    /// Places `count` devices uniformly in the cell.
    pub fn sample<R: Rng + ?Sized>(count: usize, pathloss_exp: f64, rng: &mut R) -> Self {
        let mut gains: Vec<f64> = (0..count)
            .map(|_| unit_open_closed(rng).powf(-pathloss_exp / 2.0))
            .collect();
        gains.sort_unstable_by(|a, b| b.total_cmp(a));
        DeviceSet { gains }
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// The `count` strongest devices.
    pub fn strongest(&self, count: usize) -> &[f64] {
        &self.gains[..count.min(self.gains.len())]
    }
}

/// Identifier of the random stream used by the generator.
pub const RNG_NAME: &str = "chacha8-stream/v1";

/// Addresses one independent random stream: a master seed plus an index.
///
/// Streams are ChaCha8 keyed by the master seed with the index as the
/// ChaCha stream id, so any stream can be rebuilt without touching others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Substream {
    pub master_seed: u64,
    pub index: u64,
}

impl Substream {
    pub fn new(master_seed: u64, index: u64) -> Self {
        Substream { master_seed, index }
    }

    /// Stream index for trial `trial` of sweep point `point`.
    pub fn for_trial(master_seed: u64, point: u32, trial: u32) -> Self {
        Substream::new(master_seed, (u64::from(point) << 32) | u64::from(trial))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.index);
        rng
    }
}

impl fmt::Display for Substream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", RNG_NAME, self.master_seed, self.index)
    }
}
