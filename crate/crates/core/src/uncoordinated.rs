//! Uncoordinated (random) access: the base station knows only the traffic
//! load and broadcasts a design point.
//!
//! For FDMA and TDMA the design is an access probability `p_c` plus a
//! partition count `N` (subchannels or sub-slots). An active device
//! transmits only if full power closes the link on one partition, then
//! picks a partition uniformly; two or more devices on the same partition
//! destroy each other. The analytical model treats the transmitter count
//! `N_p` as a real-valued expectation.
//!
//! For NOMA the design is a common received SNR target `γ_0`. Devices able
//! to reach it transmit on the whole block and the base station decodes
//! them by successive interference cancellation.

use std::f64::consts::LN_2;

use thiserror::Error;

use crate::model::{snr_threshold, SystemParams, TrafficModel};
use crate::Access;

/// Relative slack on the NOMA decodability test, so a design solved exactly
/// at the boundary does not flip on rounding.
const DECODE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UncoordinatedError {
    #[error("partition count must be at least 1")]
    NoPartitions,
    #[error("{n_p} transmitters exceed the NOMA load bound {bound}")]
    Infeasible { n_p: f64, bound: f64 },
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("{0} has no access-probability design; use the NOMA design instead")]
    UnsupportedScheme(Access),
}

/// Which closed form to use for the NOMA target SNR.
///
/// `AsPrinted` is `γ_0 = 1/(1/β - N_p)`. Solving the SIC rate condition
/// directly gives `γ_0 = 1/(1/β - (N_p - 1))` instead, available as
/// `Rederived`. The two differ by exactly one device of slack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrTargetVariant {
    #[default]
    AsPrinted,
    Rederived,
}

impl SnrTargetVariant {
    pub fn name(self) -> &'static str {
        match self {
            SnrTargetVariant::AsPrinted => "as_printed",
            SnrTargetVariant::Rederived => "rederived",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "as_printed" => Some(SnrTargetVariant::AsPrinted),
            "rederived" => Some(SnrTargetVariant::Rederived),
            _ => None,
        }
    }
}

/// Design point broadcast by the base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncoordinatedDesign {
    pub scheme: Access,
    /// Access probability `p_c`. Always 1 for NOMA.
    pub access_prob: f64,
    /// Partition count `N_w` or `N_t`. Always 1 for NOMA.
    pub partitions: u32,
    /// Target received SNR `γ_0` (NOMA only, 0 otherwise).
    pub target_snr: f64,
}

impl UncoordinatedDesign {
    pub fn fdma(access_prob: f64, partitions: u32) -> Self {
        UncoordinatedDesign {
            scheme: Access::Fdma,
            access_prob,
            partitions,
            target_snr: 0.0,
        }
    }

    pub fn tdma(access_prob: f64, partitions: u32) -> Self {
        UncoordinatedDesign {
            scheme: Access::Tdma,
            ..Self::fdma(access_prob, partitions)
        }
    }

    pub fn noma(target_snr: f64) -> Self {
        UncoordinatedDesign {
            scheme: Access::Noma,
            access_prob: 1.0,
            partitions: 1,
            target_snr,
        }
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), UncoordinatedError> {
        if !(0.0..=1.0).contains(&self.access_prob) {
            return Err(UncoordinatedError::InvalidDesign(format!(
                "access probability {} outside [0, 1]",
                self.access_prob
            )));
        }
        if self.partitions == 0 {
            return Err(UncoordinatedError::NoPartitions);
        }
        let too_fine = match self.scheme {
            Access::Fdma => self.partitions > params.max_subchannels(),
            Access::Tdma => self.partitions > params.max_subslots(),
            Access::Noma => {
                if !(self.target_snr > 0.0 && self.target_snr.is_finite()) {
                    return Err(UncoordinatedError::InvalidDesign(format!(
                        "target SNR {} must be positive",
                        self.target_snr
                    )));
                }
                false
            }
        };
        if too_fine {
            return Err(UncoordinatedError::InvalidDesign(format!(
                "{} partitions violate the minimum partition size",
                self.partitions
            )));
        }
        Ok(())
    }

    /// Whether a device with normalized gain `gain` can close its link at
    /// full power under this design.
    pub fn transmits(&self, gain: f64, params: &SystemParams) -> bool {
        match self.scheme {
            Access::Fdma => partition_threshold(self, params) <= self.partitions as f64 * params.ref_snr * gain,
            Access::Tdma => partition_threshold(self, params) <= params.ref_snr * gain,
            Access::Noma => self.target_snr <= params.ref_snr * gain,
        }
    }
}

/// `2^(L N / (W τ_s)) - 1`: the SNR one partition of `N` must reach.
fn partition_threshold(design: &UncoordinatedDesign, params: &SystemParams) -> f64 {
    snr_threshold(params.required_rate() * design.partitions as f64)
}

/// `P(g ≥ t)` for a uniformly placed device: `min(1, t^(-2/γ))`.
fn gain_tail(threshold: f64, pathloss_exp: f64) -> f64 {
    if threshold <= 1.0 {
        1.0
    } else {
        threshold.powf(-2.0 / pathloss_exp)
    }
}

/// Probability that an active device can transmit on one of `N_w`
/// subchannels: `min(1, (N_w μ / (2^(L N_w/(W τ_s)) - 1))^(2/γ))`.
pub fn fdma_tx_probability(design: &UncoordinatedDesign, params: &SystemParams) -> f64 {
    let ratio = design.partitions as f64 * params.ref_snr / partition_threshold(design, params);
    gain_tail(1.0 / ratio, params.pathloss_exp)
}

/// Probability that an active device can transmit in one of `N_t` sub-slots:
/// `min(1, (μ / (2^(L N_t/(W τ_s)) - 1))^(2/γ))`.
pub fn tdma_tx_probability(design: &UncoordinatedDesign, params: &SystemParams) -> f64 {
    let ratio = params.ref_snr / partition_threshold(design, params);
    gain_tail(1.0 / ratio, params.pathloss_exp)
}

/// Probability that a device can reach the received SNR `γ_0`:
/// `min(1, (μ/γ_0)^(2/γ))`.
pub fn noma_feasibility_probability(target_snr: f64, params: &SystemParams) -> f64 {
    gain_tail(target_snr / params.ref_snr, params.pathloss_exp)
}

/// Dispatches to the scheme's transmit probability.
pub fn tx_probability(design: &UncoordinatedDesign, params: &SystemParams) -> f64 {
    match design.scheme {
        Access::Fdma => fdma_tx_probability(design, params),
        Access::Tdma => tdma_tx_probability(design, params),
        Access::Noma => noma_feasibility_probability(design.target_snr, params),
    }
}

/// Probability that a transmitter shares its partition with someone else,
/// `1 - (1 - 1/N)^(N_p - 1)`, with the exponent clamped at zero for
/// `N_p < 1`.
pub fn collision_probability(expected_transmitters: f64, partitions: u32) -> Result<f64, UncoordinatedError> {
    if partitions == 0 {
        return Err(UncoordinatedError::NoPartitions);
    }
    let others = (expected_transmitters.max(1.0) - 1.0).max(0.0);
    if others == 0.0 {
        return Ok(0.0);
    }
    if partitions == 1 {
        return Ok(1.0);
    }
    let survive = (others * (-1.0 / partitions as f64).ln_1p()).exp();
    Ok(1.0 - survive)
}

/// Expected outcome of one slot under a design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncoordinatedAnalysis {
    /// `N_c`: devices that pass the access-probability draw.
    pub expected_active: f64,
    /// `N_p`: active devices able to transmit.
    pub expected_transmitting: f64,
    /// Collision probability `P_c`. For NOMA, 1 when the SIC chain fails
    /// and 0 otherwise.
    pub collision_prob: f64,
    /// Expected packets delivered per slot.
    pub expected_success: f64,
}

/// Achievable SIC rate (bit/s/Hz) of the weakest-decoded device when `n_p`
/// devices arrive at the common SNR `γ_0`:
/// `log2(1 + γ_0 / (1 + (N_p - 1) γ_0))`.
pub fn noma_min_rate(n_p: f64, target_snr: f64) -> f64 {
    let interferers = (n_p.max(1.0) - 1.0).max(0.0);
    (target_snr / (1.0 + interferers * target_snr)).ln_1p() / LN_2
}

/// Whether `n_p` devices at target `γ_0` all decode: `W τ_s R_min ≥ L`.
pub fn noma_decodable(n_p: f64, target_snr: f64, params: &SystemParams) -> bool {
    params.bandwidth_hz * params.slot_s * noma_min_rate(n_p, target_snr)
        >= params.payload_bits * (1.0 - DECODE_SLACK)
}

/// Upper bound `1/(2^(L/(W τ_s)) - 1)` on the number of devices NOMA
/// supports in one block.
pub fn noma_device_cap(params: &SystemParams) -> f64 {
    1.0 / params.sinr_threshold()
}

/// Received SNR target that lets `n_p` devices all decode.
pub fn noma_required_snr(n_p: f64, params: &SystemParams, variant: SnrTargetVariant) -> Result<f64, UncoordinatedError> {
    let cap = noma_device_cap(params);
    let load = match variant {
        SnrTargetVariant::AsPrinted => n_p,
        SnrTargetVariant::Rederived => n_p - 1.0,
    };
    let slack = cap - load;
    if !(slack > 0.0) {
        let bound = match variant {
            SnrTargetVariant::AsPrinted => cap,
            SnrTargetVariant::Rederived => cap + 1.0,
        };
        return Err(UncoordinatedError::Infeasible { n_p, bound });
    }
    Ok(1.0 / slack)
}

/// Expected slot outcome for a design at the given traffic.
pub fn uncoordinated_throughput(
    design: &UncoordinatedDesign,
    params: &SystemParams,
    traffic: &TrafficModel,
) -> Result<UncoordinatedAnalysis, UncoordinatedError> {
    design.validate(params)?;
    let active = design.access_prob * traffic.offered_load(params.slot_s);
    let transmitting = active * tx_probability(design, params);
    let (collision_prob, expected_success) = match design.scheme {
        Access::Fdma | Access::Tdma => {
            let pc = collision_probability(transmitting, design.partitions)?;
            (pc, transmitting * (1.0 - pc))
        }
        Access::Noma => {
            if noma_decodable(transmitting, design.target_snr, params) {
                (0.0, transmitting)
            } else {
                (1.0, 0.0)
            }
        }
    };
    Ok(UncoordinatedAnalysis {
        expected_active: active,
        expected_transmitting: transmitting,
        collision_prob,
        expected_success,
    })
}

/// Expected successes `N_p (1 - P_c)` on `partitions` partitions.
fn aloha_success(n_p: f64, partitions: u32) -> f64 {
    match collision_probability(n_p, partitions) {
        Ok(pc) => n_p * (1.0 - pc),
        Err(_) => 0.0,
    }
}

/// Golden-section search for the maximum of a unimodal function on
/// `[lo, hi]`.
fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Base-station choice of `(p_c, N)` maximizing expected successes for
/// FDMA or TDMA.
///
/// `N` ranges over every count the partition minimum allows; `p_c` is
/// searched per `N` by golden section. Ties go to the smaller `N`, then the
/// smaller `p_c`.
pub fn optimize_design(
    scheme: Access,
    params: &SystemParams,
    traffic: &TrafficModel,
) -> Result<UncoordinatedDesign, UncoordinatedError> {
    let (max_partitions, build): (u32, fn(f64, u32) -> UncoordinatedDesign) = match scheme {
        Access::Fdma => (params.max_subchannels(), UncoordinatedDesign::fdma),
        Access::Tdma => (params.max_subslots(), UncoordinatedDesign::tdma),
        Access::Noma => return Err(UncoordinatedError::UnsupportedScheme(scheme)),
    };
    let offered = traffic.offered_load(params.slot_s);

    let mut best = build(1.0, 1);
    let mut best_success = f64::NEG_INFINITY;
    for partitions in 1..=max_partitions {
        let candidate = build(1.0, partitions);
        let reach = offered * tx_probability(&candidate, params);
        // With nothing to thin, leave access unrestricted.
        let (access_prob, success) = if reach <= 0.0 {
            (1.0, 0.0)
        } else {
            let objective = |p: f64| aloha_success(p * reach, partitions);
            let (p, s) = golden_section_max(objective, 0.0, 1.0, 1e-10);
            let full = objective(1.0);
            if full >= s {
                (1.0, full)
            } else {
                (p, s)
            }
        };
        if success > best_success * (1.0 + 1e-12) || best_success == f64::NEG_INFINITY {
            best_success = success;
            best = build(access_prob, partitions);
        }
    }
    Ok(best)
}

/// NOMA design point: the target SNR that the expected transmitting load
/// can sustain.
///
/// A larger `γ_0` locks out more distant devices, so the base station picks
/// the load `n` where `λ τ_s · P(device reaches γ_0(n)) = n`, capped at the
/// whole offered load, and sets `γ_0 = γ_0(n)`.
pub fn noma_design(params: &SystemParams, traffic: &TrafficModel, variant: SnrTargetVariant) -> UncoordinatedDesign {
    let offered = traffic.offered_load(params.slot_s);
    let reach = |n: f64| match noma_required_snr(n, params, variant) {
        Ok(snr) => offered * noma_feasibility_probability(snr, params),
        Err(_) => 0.0,
    };
    let snr_for = |n: f64| noma_required_snr(n, params, variant);

    if let Ok(snr) = snr_for(offered) {
        if noma_feasibility_probability(snr, params) >= 1.0 {
            return UncoordinatedDesign::noma(snr);
        }
    }
    let bound = match variant {
        SnrTargetVariant::AsPrinted => noma_device_cap(params),
        SnrTargetVariant::Rederived => noma_device_cap(params) + 1.0,
    };
    let mut lo = 0.0;
    let mut hi = offered.min(bound);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if reach(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The upper end keeps the realized expected load at or below the
    // designed one, so the design decodes.
    let snr = snr_for(hi).or_else(|_| snr_for(lo)).unwrap_or(f64::MAX);
    UncoordinatedDesign::noma(snr)
}

/// Design point for any scheme: `optimize_design` for FDMA/TDMA and
/// `noma_design` for NOMA.
pub fn design_for(
    scheme: Access,
    params: &SystemParams,
    traffic: &TrafficModel,
    variant: SnrTargetVariant,
) -> Result<UncoordinatedDesign, UncoordinatedError> {
    match scheme {
        Access::Noma => Ok(noma_design(params, traffic, variant)),
        _ => optimize_design(scheme, params, traffic),
    }
}
