//! Monte Carlo engine.
//!
//! Each trial is one slot: Poisson arrivals, uniform placement, then the
//! scheme's admission or random-access rule. Every trial draws from its own
//! [`Substream`] keyed by `(master_seed, sweep point, trial index)`, and
//! results are merged by index, so a sweep gives bit-identical rows however
//! many threads evaluate it. Schemes evaluated at the same sweep point see
//! the same arrivals and placements.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::coordinated;
use crate::model::{
    sample_arrivals, unit_open_closed, DeviceSet, ModelError, Substream, SystemParams, TrafficModel,
};
use crate::uncoordinated::{self, noma_decodable, SnrTargetVariant, UncoordinatedDesign, UncoordinatedError};
use crate::Access;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Uncoordinated(#[from] UncoordinatedError),
    #[error("cannot aggregate an empty set of trials")]
    NoTrials,
    #[error("lambda grid must be non-empty and strictly increasing")]
    BadGrid,
    #[error("{0} has no closed-form throughput")]
    NoAnalyticModel(SchemeTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coordination {
    Coordinated,
    Uncoordinated,
}

/// Coordination mode and access technique, e.g. `uncoordinated-noma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemeTag {
    pub coordination: Coordination,
    pub access: Access,
}

impl SchemeTag {
    pub fn parse(label: &str) -> Option<SchemeTag> {
        let (mode, access) = label.split_once('-')?;
        let coordination = match mode {
            "coordinated" => Coordination::Coordinated,
            "uncoordinated" => Coordination::Uncoordinated,
            _ => return None,
        };
        let access = Access::ALL.into_iter().find(|a| a.name() == access)?;
        Some(SchemeTag { coordination, access })
    }

    pub fn all() -> Vec<SchemeTag> {
        [Coordination::Coordinated, Coordination::Uncoordinated]
            .into_iter()
            .flat_map(|coordination| Access::ALL.map(|access| SchemeTag { coordination, access }))
            .collect()
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.coordination {
            Coordination::Coordinated => "coordinated",
            Coordination::Uncoordinated => "uncoordinated",
        };
        write!(f, "{mode}-{}", self.access)
    }
}

/// A scheme as requested, before the design point for a given load exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Coordinated { access: Access, enforce_minimum: bool },
    Uncoordinated { access: Access, variant: SnrTargetVariant },
}

impl Scheme {
    pub fn from_tag(tag: SchemeTag, enforce_minimum: bool, variant: SnrTargetVariant) -> Scheme {
        match tag.coordination {
            Coordination::Coordinated => Scheme::Coordinated {
                access: tag.access,
                enforce_minimum,
            },
            Coordination::Uncoordinated => Scheme::Uncoordinated {
                access: tag.access,
                variant,
            },
        }
    }

    pub fn tag(&self) -> SchemeTag {
        match *self {
            Scheme::Coordinated { access, .. } => SchemeTag {
                coordination: Coordination::Coordinated,
                access,
            },
            Scheme::Uncoordinated { access, .. } => SchemeTag {
                coordination: Coordination::Uncoordinated,
                access,
            },
        }
    }

    /// Fixes the base-station design for the given load. Uncoordinated
    /// designs depend only on the expected load, never on a realization.
    pub fn resolve(&self, params: &SystemParams, traffic: &TrafficModel) -> Result<SchemeConfig, SimError> {
        Ok(match *self {
            Scheme::Coordinated { access, enforce_minimum } => SchemeConfig::Coordinated { access, enforce_minimum },
            Scheme::Uncoordinated { access, variant } => {
                SchemeConfig::Uncoordinated(uncoordinated::design_for(access, params, traffic, variant)?)
            }
        })
    }
}

/// A scheme with its design point fixed, ready to simulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeConfig {
    Coordinated { access: Access, enforce_minimum: bool },
    Uncoordinated(UncoordinatedDesign),
}

impl SchemeConfig {
    pub fn tag(&self) -> SchemeTag {
        match *self {
            SchemeConfig::Coordinated { access, .. } => SchemeTag {
                coordination: Coordination::Coordinated,
                access,
            },
            SchemeConfig::Uncoordinated(design) => SchemeTag {
                coordination: Coordination::Uncoordinated,
                access: design.scheme,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub arrivals: u64,
    pub served: u64,
    pub scheme: SchemeTag,
    pub seed_substream: Substream,
}

/// Simulates one slot.
pub fn run_trial(
    config: &SchemeConfig,
    params: &SystemParams,
    traffic: &TrafficModel,
    substream: Substream,
) -> Result<TrialOutcome, SimError> {
    params.validate()?;
    let mut rng = substream.rng();
    let arrivals = sample_arrivals(traffic, params.slot_s, &mut rng);
    let served = match config {
        SchemeConfig::Coordinated { access, enforce_minimum } => {
            let devices = DeviceSet::sample(arrivals as usize, params.pathloss_exp, &mut rng);
            coordinated::kmax(*access, &devices, params, *enforce_minimum).admitted as u64
        }
        SchemeConfig::Uncoordinated(design) => {
            design.validate(params)?;
            random_access_slot(design, params, arrivals, &mut rng)
        }
    };
    Ok(TrialOutcome {
        arrivals,
        served: served.min(arrivals),
        scheme: config.tag(),
        seed_substream: substream,
    })
}

fn random_access_slot<R: Rng + ?Sized>(design: &UncoordinatedDesign, params: &SystemParams, arrivals: u64, rng: &mut R) -> u64 {
    let gain_exp = -params.pathloss_exp / 2.0;
    match design.scheme {
        Access::Fdma | Access::Tdma => {
            let mut occupancy = vec![0u32; design.partitions as usize];
            for _ in 0..arrivals {
                let gain = unit_open_closed(rng).powf(gain_exp);
                let active = rng.random::<f64>() < design.access_prob;
                if active && design.transmits(gain, params) {
                    occupancy[rng.random_range(0..design.partitions) as usize] += 1;
                }
            }
            occupancy.iter().filter(|&&n| n == 1).count() as u64
        }
        Access::Noma => {
            let transmitters = (0..arrivals)
                .filter(|_| design.transmits(unit_open_closed(rng).powf(gain_exp), params))
                .count() as u64;
            // SIC either peels every packet or stalls on the first one.
            if transmitters > 0 && noma_decodable(transmitters as f64, design.target_snr, params) {
                transmitters
            } else {
                0
            }
        }
    }
}

/// Summary statistics of packets served per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStats {
    pub trials: u64,
    pub mean_served: f64,
    /// Sample standard deviation (zero for a single trial).
    pub std_dev: f64,
    /// Normal-approximation 95% half-width, `1.96 s / sqrt(n)`.
    pub ci95_halfwidth: f64,
    pub mean_arrivals: f64,
}

impl TrialStats {
    pub fn std_error(&self) -> f64 {
        self.std_dev / (self.trials as f64).sqrt()
    }
}

/// Mean, sample deviation and 95% half-width of the served counts.
///
/// Sums are taken in exact integer arithmetic, so the result does not
/// depend on the order of `outcomes`.
pub fn aggregate(outcomes: &[TrialOutcome]) -> Result<TrialStats, SimError> {
    if outcomes.is_empty() {
        return Err(SimError::NoTrials);
    }
    let n = outcomes.len() as u128;
    let sum: u128 = outcomes.iter().map(|o| u128::from(o.served)).sum();
    let sum_sq: u128 = outcomes.iter().map(|o| u128::from(o.served).pow(2)).sum();
    let arrivals: u128 = outcomes.iter().map(|o| u128::from(o.arrivals)).sum();
    let mean = sum as f64 / n as f64;
    let std_dev = if n > 1 {
        // n Σx² - (Σx)² is exact and non-negative.
        let spread = (n * sum_sq - sum * sum) as f64;
        (spread / (n as f64 * (n - 1) as f64)).sqrt()
    } else {
        0.0
    };
    Ok(TrialStats {
        trials: n as u64,
        mean_served: mean,
        std_dev,
        ci95_halfwidth: Z95 * std_dev / (n as f64).sqrt(),
        mean_arrivals: arrivals as f64 / n as f64,
    })
}

/// One `(scheme, λ)` result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Scheme label; analytic rows carry an `:analytic` suffix.
    pub scheme: String,
    pub lambda: f64,
    /// Monte Carlo trials behind the row; 0 for analytic rows.
    pub trials: u64,
    /// Packets per second, mean served per slot over `τ_s`.
    pub mean_throughput: f64,
    pub ci95_halfwidth: f64,
    pub seed: u64,
    pub params: SystemParams,
}

fn check_grid(lambda_grid: &[f64]) -> Result<(), SimError> {
    let increasing = lambda_grid.windows(2).all(|w| w[0] < w[1]);
    if lambda_grid.is_empty() || !increasing {
        return Err(SimError::BadGrid);
    }
    Ok(())
}

/// Runs every trial of one sweep point and returns the outcomes in trial
/// order.
pub fn run_point(
    config: &SchemeConfig,
    params: &SystemParams,
    traffic: &TrafficModel,
    trials: u32,
    master_seed: u64,
    point: u32,
) -> Result<Vec<TrialOutcome>, SimError> {
    (0..trials)
        .into_par_iter()
        .map(|t| run_trial(config, params, traffic, Substream::for_trial(master_seed, point, t)))
        .collect()
}

/// Monte Carlo throughput of `scheme` at every arrival rate of the grid.
pub fn run_sweep(
    scheme: &Scheme,
    params: &SystemParams,
    lambda_grid: &[f64],
    trials: u32,
    master_seed: u64,
) -> Result<Vec<SweepRow>, SimError> {
    params.validate()?;
    check_grid(lambda_grid)?;
    if trials == 0 {
        return Err(SimError::NoTrials);
    }
    lambda_grid
        .par_iter()
        .enumerate()
        .map(|(point, &lambda)| {
            let traffic = TrafficModel::new(lambda)?;
            let config = scheme.resolve(params, &traffic)?;
            let outcomes = run_point(&config, params, &traffic, trials, master_seed, point as u32)?;
            let stats = aggregate(&outcomes)?;
            Ok(SweepRow {
                scheme: scheme.tag().to_string(),
                lambda,
                trials: stats.trials,
                mean_throughput: stats.mean_served / params.slot_s,
                ci95_halfwidth: stats.ci95_halfwidth / params.slot_s,
                seed: master_seed,
                params: *params,
            })
        })
        .collect()
}

/// Closed-form throughput over the grid, for uncoordinated schemes.
pub fn analytic_sweep(scheme: &Scheme, params: &SystemParams, lambda_grid: &[f64], seed: u64) -> Result<Vec<SweepRow>, SimError> {
    params.validate()?;
    check_grid(lambda_grid)?;
    if let Scheme::Coordinated { .. } = scheme {
        return Err(SimError::NoAnalyticModel(scheme.tag()));
    }
    lambda_grid
        .iter()
        .map(|&lambda| {
            let traffic = TrafficModel::new(lambda)?;
            let SchemeConfig::Uncoordinated(design) = scheme.resolve(params, &traffic)? else {
                unreachable!("uncoordinated schemes resolve to designs")
            };
            let analysis = uncoordinated::uncoordinated_throughput(&design, params, &traffic)?;
            Ok(SweepRow {
                scheme: format!("{}:analytic", scheme.tag()),
                lambda,
                trials: 0,
                mean_throughput: analysis.expected_success / params.slot_s,
                ci95_halfwidth: 0.0,
                seed,
                params: *params,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(served: u64) -> TrialOutcome {
        TrialOutcome {
            arrivals: served + 1,
            served,
            scheme: SchemeTag::parse("coordinated-noma").unwrap(),
            seed_substream: Substream::new(0, 0),
        }
    }

    #[test]
    fn tags_round_trip() {
        for tag in SchemeTag::all() {
            assert_eq!(SchemeTag::parse(&tag.to_string()), Some(tag));
        }
        assert_eq!(SchemeTag::all().len(), 6);
        assert_eq!(SchemeTag::parse("coordinated-cdma"), None);
        assert_eq!(SchemeTag::parse("noma"), None);
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[]), Err(SimError::NoTrials));
        let same = aggregate(&[outcome(5), outcome(5), outcome(5)]).unwrap();
        assert_eq!(same.mean_served, 5.0);
        assert_eq!(same.ci95_halfwidth, 0.0);

        let pair = aggregate(&[outcome(0), outcome(2)]).unwrap();
        assert_eq!(pair.mean_served, 1.0);
        // s = sqrt(2), half-width = 1.96 sqrt(2) / sqrt(2)
        assert!((pair.std_dev - 2f64.sqrt()).abs() < 1e-15);
        assert!((pair.ci95_halfwidth - 1.96).abs() < 1e-15);

        let one = aggregate(&[outcome(7)]).unwrap();
        assert_eq!((one.std_dev, one.ci95_halfwidth), (0.0, 0.0));
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let mut outcomes: Vec<_> = [3, 9, 0, 14, 2, 2, 7].into_iter().map(outcome).collect();
        let a = aggregate(&outcomes).unwrap();
        outcomes.reverse();
        outcomes.swap(0, 3);
        assert_eq!(aggregate(&outcomes).unwrap(), a);
    }

    #[test]
    fn zero_traffic_serves_nothing() {
        let params = SystemParams::default();
        let traffic = TrafficModel::new(0.0).unwrap();
        for tag in SchemeTag::all() {
            let scheme = Scheme::from_tag(tag, false, SnrTargetVariant::AsPrinted);
            let config = scheme.resolve(&params, &traffic).unwrap();
            let o = run_trial(&config, &params, &traffic, Substream::new(1, 0)).unwrap();
            assert_eq!((o.arrivals, o.served), (0, 0));
        }
        let rows = run_sweep(
            &Scheme::Coordinated { access: Access::Noma, enforce_minimum: false },
            &params,
            &[0.0],
            50,
            4,
        )
        .unwrap();
        assert_eq!((rows[0].mean_throughput, rows[0].ci95_halfwidth), (0.0, 0.0));
    }

    #[test]
    fn single_partition_collides() {
        let params = SystemParams::default();
        let design = UncoordinatedDesign::fdma(1.0, 1);
        let mut rng = Substream::new(2, 0).rng();
        // μ = 1 makes every device power-feasible on one subchannel.
        assert_eq!(random_access_slot(&design, &params, 2, &mut rng), 0);
        assert_eq!(random_access_slot(&design, &params, 1, &mut rng), 1);
    }

    #[test]
    fn served_never_exceeds_arrivals_or_partitions() {
        let params = SystemParams::default();
        for (i, lambda) in [50.0, 800.0, 3000.0].into_iter().enumerate() {
            let traffic = TrafficModel::new(lambda).unwrap();
            for tag in SchemeTag::all() {
                let config = Scheme::from_tag(tag, true, SnrTargetVariant::AsPrinted)
                    .resolve(&params, &traffic)
                    .unwrap();
                for o in run_point(&config, &params, &traffic, 20, 99, i as u32).unwrap() {
                    assert!(o.served <= o.arrivals);
                    if let SchemeConfig::Uncoordinated(d) = config {
                        if d.scheme != Access::Noma {
                            assert!(o.served <= u64::from(d.partitions));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn bad_grids_rejected() {
        let s = Scheme::Coordinated { access: Access::Tdma, enforce_minimum: false };
        let p = SystemParams::default();
        assert_eq!(run_sweep(&s, &p, &[], 10, 0), Err(SimError::BadGrid));
        assert_eq!(run_sweep(&s, &p, &[5.0, 5.0], 10, 0), Err(SimError::BadGrid));
        assert!(analytic_sweep(&s, &p, &[5.0], 0).is_err());
    }
}
