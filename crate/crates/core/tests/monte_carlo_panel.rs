//! Monte Carlo against closed forms on a fixed panel, 10^4 trials per point.

use m2m_access::config::to_csv_string;
use m2m_access::model::{SystemParams, TrafficModel};
use m2m_access::sim::{aggregate, run_point, run_sweep, Scheme, SchemeConfig, TrialStats};
use m2m_access::uncoordinated::{design_for, uncoordinated_throughput, SnrTargetVariant};
use m2m_access::Access;

const TRIALS: u32 = 10_000;
const SEED: u64 = 20_160_501;

fn simulate(scheme: Scheme, lambda: f64, point: u32) -> (SchemeConfig, TrialStats) {
    let params = SystemParams::default();
    let traffic = TrafficModel::new(lambda).unwrap();
    let config = scheme.resolve(&params, &traffic).unwrap();
    let outcomes = run_point(&config, &params, &traffic, TRIALS, SEED, point).unwrap();
    (config, aggregate(&outcomes).unwrap())
}

/// `E[min(K, cap)]` for `K ~ Poisson(mean)`, summed over the pmf.
fn truncated_poisson_mean(mean: f64, cap: u64) -> f64 {
    let mut log_pmf = -mean;
    let mut below = 0.0;
    let mut mass_below = 0.0;
    for k in 0..cap {
        let pmf = log_pmf.exp();
        below += k as f64 * pmf;
        mass_below += pmf;
        log_pmf += mean.ln() - ((k + 1) as f64).ln();
    }
    below + cap as f64 * (1.0 - mass_below)
}

#[test]
fn truncated_poisson_oracle_sanity() {
    assert!((truncated_poisson_mean(3.0, 1_000_000) - 3.0).abs() < 1e-9);
    assert!((truncated_poisson_mean(3.0, 1) - (1.0 - (-3.0f64).exp())).abs() < 1e-12);
}

#[test]
fn uncoordinated_oma_matches_closed_form() {
    let params = SystemParams::default();
    for access in [Access::Fdma, Access::Tdma] {
        for (point, lambda) in [1e2, 1e3, 1e4].into_iter().enumerate() {
            let scheme = Scheme::Uncoordinated { access, variant: SnrTargetVariant::AsPrinted };
            let (config, stats) = simulate(scheme, lambda, point as u32);
            let SchemeConfig::Uncoordinated(design) = config else { unreachable!() };
            let expected = uncoordinated_throughput(&design, &params, &TrafficModel::new(lambda).unwrap())
                .unwrap()
                .expected_success;
            let z = (stats.mean_served - expected) / stats.std_error();
            assert!(z.abs() <= 3.0, "{access} λ={lambda}: mc {} analytic {expected} z {z}", stats.mean_served);
        }
    }
}

#[test]
fn uncoordinated_noma_bounded_by_closed_form() {
    // All-or-nothing SIC fails whenever the realized load overshoots the
    // design, so the simulation sits below the expectation model.
    let params = SystemParams::default();
    for variant in [SnrTargetVariant::AsPrinted, SnrTargetVariant::Rederived] {
        for (point, lambda) in [1e2, 1e3, 5e3].into_iter().enumerate() {
            let traffic = TrafficModel::new(lambda).unwrap();
            let design = design_for(Access::Noma, &params, &traffic, variant).unwrap();
            let expected = uncoordinated_throughput(&design, &params, &traffic).unwrap().expected_success;
            let (_, stats) = simulate(Scheme::Uncoordinated { access: Access::Noma, variant }, lambda, point as u32);
            assert!(
                stats.mean_served <= expected + 3.0 * stats.std_error(),
                "{variant:?} λ={lambda}: mc {} analytic {expected}",
                stats.mean_served
            );
            assert!(stats.mean_served > 0.0);
        }
    }
}

#[test]
fn coordinated_matches_poisson_oracles() {
    // NOMA admits every arrival at these loads, so E[served] = λ τ_s.
    for (point, lambda) in [1e2, 1e3, 5e3].into_iter().enumerate() {
        let scheme = Scheme::Coordinated { access: Access::Noma, enforce_minimum: false };
        let (_, stats) = simulate(scheme, lambda, point as u32);
        let z = (stats.mean_served - lambda) / stats.std_error();
        assert!(z.abs() <= 3.0, "noma λ={lambda}: {} z {z}", stats.mean_served);
    }
    // With μ = 0 dB every in-cell device needs less than the 1 ms / 1 kHz
    // minimum, so the padded schemes serve exactly min(K, 1000).
    for access in [Access::Fdma, Access::Tdma] {
        for (point, lambda) in [500.0, 1000.0, 2000.0].into_iter().enumerate() {
            let scheme = Scheme::Coordinated { access, enforce_minimum: true };
            let (_, stats) = simulate(scheme, lambda, point as u32);
            let expected = truncated_poisson_mean(lambda, 1000);
            let se = stats.std_error().max(1e-12);
            let z = (stats.mean_served - expected) / se;
            assert!(
                z.abs() <= 3.0 || (stats.mean_served - expected).abs() < 1e-9,
                "{access} λ={lambda}: {} vs {expected}",
                stats.mean_served
            );
        }
    }
}

#[test]
fn sweeps_are_identical_across_thread_counts() {
    let params = SystemParams::default();
    let grid = [200.0, 1500.0, 4000.0];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut rows = Vec::new();
            for scheme in [
                Scheme::Coordinated { access: Access::Fdma, enforce_minimum: false },
                Scheme::Uncoordinated { access: Access::Tdma, variant: SnrTargetVariant::AsPrinted },
                Scheme::Uncoordinated { access: Access::Noma, variant: SnrTargetVariant::Rederived },
            ] {
                rows.extend(run_sweep(&scheme, &params, &grid, 64, 42).unwrap());
            }
            to_csv_string(&rows)
        })
    };
    let serial = run(1);
    assert_eq!(serial, run(8));
    assert_eq!(serial, run(3));
}
