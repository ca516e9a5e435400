//! Coordinated access: the base station knows every contending device and
//! its channel, and hands out the smallest resource share that still lets
//! each packet through at Shannon capacity.
//!
//! * FDMA: each device gets the narrowest band `W_min` carrying `L` bits in
//!   one slot at full power.
//! * TDMA: each device gets the whole band for the shortest time `τ_min`.
//! * NOMA: all devices share the block; the base station decodes strongest
//!   first with successive interference cancellation and each device picks
//!   the smallest power that survives the interference left undecoded.
//!
//! Devices are admitted strongest first until the budget runs out.

use std::f64::consts::LN_2;

use thiserror::Error;

use crate::model::{DeviceSet, SystemParams};
use crate::Access;

/// Relative slack when comparing a resource sum against its budget.
const BUDGET_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoordinatedError {
    /// No finite bandwidth carries the packet: even an unbounded band stays
    /// below the `μ W g / ln 2` wideband capacity limit.
    #[error("device with gain {gain} cannot deliver its packet in one slot at any bandwidth")]
    Infeasible { gain: f64 },
    #[error("invalid channel: {0}")]
    Domain(String),
}

/// Resource handed to one admitted device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceResource {
    pub gain: f64,
    /// Bandwidth in Hz (FDMA), time in seconds (TDMA) or normalized power
    /// (NOMA).
    pub resource: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatedAllocation {
    pub scheme: Access,
    pub admitted: usize,
    pub per_device: Vec<DeviceResource>,
}

impl CoordinatedAllocation {
    pub fn total_resource(&self) -> f64 {
        self.per_device.iter().map(|d| d.resource).sum()
    }
}

fn check_gain(gain: f64) -> Result<(), CoordinatedError> {
    if gain.is_finite() && gain >= 1.0 {
        Ok(())
    } else {
        Err(CoordinatedError::Domain(format!("gain {gain} must be finite and >= 1")))
    }
}

/// Bits deliverable in one slot over bandwidth `w` at full power, minus the
/// payload. Strictly increasing in `w`.
fn fdma_excess_bits(w: f64, wideband_snr: f64, params: &SystemParams) -> f64 {
    params.slot_s * w * (wideband_snr / w).ln_1p() / LN_2 - params.payload_bits
}

/// Narrowest FDMA subchannel (Hz) over which a device of gain `gain` delivers
/// its packet within one slot at full power.
///
/// Solves `L/(τ_s w) = log2(1 + μ (W/w) g)` by bisection on the monotone
/// form `w τ_s log2(1 + μ W g / w) = L`.
pub fn fdma_min_bandwidth(gain: f64, params: &SystemParams) -> Result<f64, CoordinatedError> {
    check_gain(gain)?;
    let wideband_snr = params.ref_snr * params.bandwidth_hz * gain;
    if params.payload_bits * LN_2 >= params.slot_s * wideband_snr {
        return Err(CoordinatedError::Infeasible { gain });
    }
    let f = |w: f64| fdma_excess_bits(w, wideband_snr, params);

    let mut lo = 1e-6 * params.bandwidth_hz;
    while f(lo) >= 0.0 {
        lo *= 1e-3;
        if lo < f64::MIN_POSITIVE {
            return Err(CoordinatedError::Domain(format!("no lower bracket for gain {gain}")));
        }
    }
    let mut hi = params.bandwidth_hz;
    let mut expansions = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        expansions += 1;
        // Within rounding of the capacity limit the excess never turns
        // positive in floating point.
        if expansions > 1100 || !hi.is_finite() {
            return Err(CoordinatedError::Infeasible { gain });
        }
    }

    // Newton steps kept inside the sign-changing bracket; any step that
    // leaves it falls back to bisection.
    let slope = |w: f64| {
        let x = wideband_snr / w;
        params.slot_s * (x.ln_1p() - x / (1.0 + x)) / LN_2
    };
    let tol = 1e-14 * params.payload_bits;
    let mut w = 0.5 * (lo + hi);
    for _ in 0..2000 {
        let fw = f(w);
        if fw.abs() <= tol {
            return Ok(w);
        }
        if fw < 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let newton = w - fw / slope(w);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next <= lo || next >= hi {
            break;
        }
        w = next;
    }
    Ok(if f(lo).abs() < f(hi).abs() { lo } else { hi })
}

/// Shortest time (s) a device of gain `gain` needs at full power over the
/// whole band.
pub fn tdma_min_time(gain: f64, params: &SystemParams) -> Result<f64, CoordinatedError> {
    let snr = params.ref_snr * gain;
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(CoordinatedError::Domain(format!("μ·g = {snr} must be positive")));
    }
    Ok(params.payload_bits * LN_2 / (params.bandwidth_hz * snr.ln_1p()))
}

/// Greedy strongest-first admission against a resource budget. Stops at the
/// first device that does not fit; its resource demand only grows further
/// down the list.
fn admit_greedy(
    devices: &DeviceSet,
    scheme: Access,
    budget: f64,
    floor: Option<f64>,
    cap: usize,
    demand: impl Fn(f64) -> Result<f64, CoordinatedError>,
) -> CoordinatedAllocation {
    let limit = budget * (1.0 + BUDGET_SLACK);
    let mut used = 0.0;
    let mut per_device = Vec::new();
    for &gain in devices.gains() {
        if per_device.len() >= cap {
            break;
        }
        let need = match demand(gain) {
            Ok(need) => floor.map_or(need, |min| need.max(min)),
            Err(_) => break,
        };
        if used + need > limit {
            break;
        }
        used += need;
        per_device.push(DeviceResource { gain, resource: need });
    }
    CoordinatedAllocation {
        scheme,
        admitted: per_device.len(),
        per_device,
    }
}

/// Maximum number of devices FDMA fits in the band.
///
/// With `enforce_minimum`, every subchannel is padded up to
/// `min_subchannel_hz`, which caps the count at `W / min_subchannel_hz`.
pub fn fdma_kmax(devices: &DeviceSet, params: &SystemParams, enforce_minimum: bool) -> CoordinatedAllocation {
    let (floor, cap) = if enforce_minimum {
        (Some(params.min_subchannel_hz), params.max_subchannels() as usize)
    } else {
        (None, usize::MAX)
    };
    admit_greedy(devices, Access::Fdma, params.bandwidth_hz, floor, cap, |g| {
        fdma_min_bandwidth(g, params)
    })
}

/// Maximum number of devices TDMA fits in the slot.
///
/// With `enforce_minimum`, every sub-slot is padded up to `min_slot_s`.
pub fn tdma_kmax(devices: &DeviceSet, params: &SystemParams, enforce_minimum: bool) -> CoordinatedAllocation {
    let (floor, cap) = if enforce_minimum {
        (Some(params.min_slot_s), params.max_subslots() as usize)
    } else {
        (None, usize::MAX)
    };
    admit_greedy(devices, Access::Tdma, params.slot_s, floor, cap, |g| {
        tdma_min_time(g, params)
    })
}

/// Normalized transmit powers for SIC decoding in gain order, given the
/// strongest-first gains of the `K` devices sharing the block.
///
/// Device `i` (1-based) needs `P_i = 2^((K-i) r) β / (μ g_i)` with
/// `r = L/(W τ_s)` and `β = 2^r - 1`. Values above 1 are returned as is.
pub fn noma_power_allocation(gains: &[f64], params: &SystemParams) -> Vec<f64> {
    let rate = params.required_rate();
    let beta = params.sinr_threshold();
    let k = gains.len();
    gains
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let later = (k - 1 - i) as f64;
            (later * rate).exp2() * beta / (params.ref_snr * g)
        })
        .collect()
}

fn noma_prefix_feasible(gains: &[f64], params: &SystemParams) -> bool {
    noma_power_allocation(gains, params).iter().all(|&p| p <= 1.0)
}

/// Largest `K` for which the `K` strongest devices all get a normalized
/// power of at most 1.
pub fn noma_kmax(devices: &DeviceSet, params: &SystemParams) -> CoordinatedAllocation {
    let gains = devices.gains();
    let rate_ln = params.required_rate() * LN_2;
    let beta = params.sinr_threshold();

    // Prefix K is feasible iff K - 1 <= min_{i<K} (i + log2(μ g_i / β) / r).
    // The running minimum only falls while K rises, so the first failure ends
    // the search.
    let mut bound = f64::INFINITY;
    let mut k = 0;
    for (i, &g) in gains.iter().enumerate() {
        bound = bound.min(i as f64 + (params.ref_snr * g / beta).ln() / rate_ln);
        if i as f64 <= bound {
            k = i + 1;
        } else {
            break;
        }
    }
    // Settle rounding at the boundary against the power allocation itself.
    while k > 0 && !noma_prefix_feasible(&gains[..k], params) {
        k -= 1;
    }
    while k < gains.len() && noma_prefix_feasible(&gains[..k + 1], params) {
        k += 1;
    }

    let powers = noma_power_allocation(&gains[..k], params);
    CoordinatedAllocation {
        scheme: Access::Noma,
        admitted: k,
        per_device: gains[..k]
            .iter()
            .zip(powers)
            .map(|(&gain, resource)| DeviceResource { gain, resource })
            .collect(),
    }
}

/// Dispatches to the scheme's `K_max` computation. NOMA ignores
/// `enforce_minimum`: it never splits the block.
pub fn kmax(scheme: Access, devices: &DeviceSet, params: &SystemParams, enforce_minimum: bool) -> CoordinatedAllocation {
    match scheme {
        Access::Fdma => fdma_kmax(devices, params, enforce_minimum),
        Access::Tdma => tdma_kmax(devices, params, enforce_minimum),
        Access::Noma => noma_kmax(devices, params),
    }
}
