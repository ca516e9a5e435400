use m2m_access::coordinated::{
    fdma_kmax, fdma_min_bandwidth, kmax, noma_kmax, noma_power_allocation, tdma_kmax, tdma_min_time,
};
use m2m_access::model::{DeviceSet, Substream, SystemParams};
use m2m_access::Access;
use proptest::prelude::*;

fn fdma_residual(w: f64, gain: f64, p: &SystemParams) -> f64 {
    let lhs = p.payload_bits / (p.slot_s * w);
    let rhs = (p.ref_snr * p.bandwidth_hz * gain / w).ln_1p() / std::f64::consts::LN_2;
    (lhs - rhs).abs() / lhs
}

fn sinr(powers: &[f64], gains: &[f64], mu: f64, i: usize) -> f64 {
    let interference: f64 = (i + 1..powers.len()).map(|j| powers[j] * mu * gains[j]).sum();
    powers[i] * mu * gains[i] / (1.0 + interference)
}

fn params_strategy() -> impl Strategy<Value = SystemParams> {
    (1e4f64..1e7, 0.01f64..2.0, 100.0f64..1e5, 1e-3f64..1e3, 2.5f64..5.0).prop_map(|(w, tau, l, mu, gamma)| {
        SystemParams {
            bandwidth_hz: w,
            slot_s: tau,
            payload_bits: l,
            ref_snr: mu,
            pathloss_exp: gamma,
            min_slot_s: tau / 1000.0,
            min_subchannel_hz: w / 1000.0,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noma_sinr_identity(p in params_strategy(), seed in any::<u64>(), k in 1usize..60) {
        let set = DeviceSet::sample(k, p.pathloss_exp, &mut Substream::new(seed, 0).rng());
        let powers = noma_power_allocation(set.gains(), &p);
        let beta = p.sinr_threshold();
        for i in 0..k {
            let s = sinr(&powers, set.gains(), p.ref_snr, i);
            prop_assert!((s - beta).abs() <= 1e-9 * beta, "device {i}: {s} vs {beta}");
        }
    }

    #[test]
    fn fdma_root_residual(p in params_strategy(), u in 0.01f64..=1.0) {
        let gain = u.powf(-p.pathloss_exp);
        match fdma_min_bandwidth(gain, &p) {
            Ok(w) => prop_assert!(fdma_residual(w, gain, &p) < 1e-9),
            Err(_) => prop_assert!(p.payload_bits * std::f64::consts::LN_2 >= p.slot_s * p.ref_snr * p.bandwidth_hz * gain * (1.0 - 1e-9)),
        }
    }

    #[test]
    fn greedy_admission_is_maximal(p in params_strategy(), seed in any::<u64>(), k in 0usize..300, enforce in any::<bool>()) {
        let set = DeviceSet::sample(k, p.pathloss_exp, &mut Substream::new(seed, 1).rng());
        for (alloc, budget, demand, floor) in [
            (fdma_kmax(&set, &p, enforce), p.bandwidth_hz, Access::Fdma, p.min_subchannel_hz),
            (tdma_kmax(&set, &p, enforce), p.slot_s, Access::Tdma, p.min_slot_s),
        ] {
            prop_assert!(alloc.total_resource() <= budget * (1.0 + 1e-9));
            if enforce {
                prop_assert!(alloc.per_device.iter().all(|d| d.resource >= floor));
            }
            if alloc.admitted < k {
                let next = set.gains()[alloc.admitted];
                let need = match demand {
                    Access::Fdma => fdma_min_bandwidth(next, &p),
                    _ => tdma_min_time(next, &p),
                };
                if let Ok(need) = need {
                    let need = if enforce { need.max(floor) } else { need };
                    let capped = enforce && alloc.admitted >= (budget / floor * (1.0 + 1e-12)).floor() as usize;
                    prop_assert!(capped || alloc.total_resource() + need > budget);
                }
            }
        }
    }

    #[test]
    fn noma_prefix_below_kmax_is_feasible(p in params_strategy(), seed in any::<u64>(), k in 0usize..400) {
        let set = DeviceSet::sample(k, p.pathloss_exp, &mut Substream::new(seed, 2).rng());
        let alloc = noma_kmax(&set, &p);
        prop_assert!(alloc.per_device.iter().all(|d| d.resource > 0.0 && d.resource <= 1.0));
        if alloc.admitted > 0 {
            let shorter = noma_power_allocation(set.strongest(alloc.admitted - 1), &p);
            prop_assert!(shorter.iter().all(|&x| x <= 1.0));
        }
        if alloc.admitted < k {
            let longer = noma_power_allocation(set.strongest(alloc.admitted + 1), &p);
            prop_assert!(longer.iter().any(|&x| x > 1.0));
        }
    }

    #[test]
    fn kmax_monotone_in_resources(p in params_strategy(), seed in any::<u64>(), k in 0usize..300, factor in 1.0f64..4.0, enforce in any::<bool>()) {
        let set = DeviceSet::sample(k, p.pathloss_exp, &mut Substream::new(seed, 3).rng());
        // Minima are held at their absolute values so only the named
        // quantity moves.
        let wider = SystemParams { bandwidth_hz: p.bandwidth_hz * factor, ..p };
        let longer = SystemParams { slot_s: p.slot_s * factor, ..p };
        let louder = SystemParams { ref_snr: p.ref_snr * factor, ..p };
        let bigger = SystemParams { payload_bits: p.payload_bits * factor, ..p };
        for access in Access::ALL {
            let base = kmax(access, &set, &p, enforce).admitted;
            prop_assert!(kmax(access, &set, &wider, enforce).admitted >= base, "{access} W");
            prop_assert!(kmax(access, &set, &longer, enforce).admitted >= base, "{access} tau");
            prop_assert!(kmax(access, &set, &louder, enforce).admitted >= base, "{access} mu");
            prop_assert!(kmax(access, &set, &bigger, enforce).admitted <= base, "{access} L");
        }
    }

    #[test]
    fn whole_band_fdma_equals_full_slot_tdma(p in params_strategy(), u in 0.05f64..=1.0) {
        let gain = u.powf(-p.pathloss_exp);
        let exact = SystemParams {
            payload_bits: p.bandwidth_hz * p.slot_s * (p.ref_snr * gain).ln_1p() / std::f64::consts::LN_2,
            ..p
        };
        let w = fdma_min_bandwidth(gain, &exact).unwrap();
        let t = tdma_min_time(gain, &exact).unwrap();
        prop_assert!((w / exact.bandwidth_hz - 1.0).abs() < 1e-9);
        prop_assert!((t / exact.slot_s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn noma_kmax_non_decreasing_in_reference_snr() {
    let set = DeviceSet::sample(5000, 4.0, &mut Substream::new(5, 0).rng());
    let mut last = 0;
    for db in (-30..=30).step_by(5) {
        let p = SystemParams { ref_snr: 10f64.powf(db as f64 / 10.0), ..SystemParams::default() };
        let k = noma_kmax(&set, &p).admitted;
        assert!(k >= last, "{db} dB: {k} < {last}");
        last = k;
    }
}
