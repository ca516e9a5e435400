//! Uplink multiple-access throughput for cellular machine-to-machine
//! traffic.
//!
//! The crate compares FDMA, TDMA and power-domain NOMA on a single
//! resource block (bandwidth `W`, slot `τ_s`) shared by devices that each
//! carry one `L`-bit packet:
//!
//! * [`coordinated`]: the base station knows every channel and allocates
//!   the minimum resource per device.
//! * [`uncoordinated`]: random access with a broadcast design point,
//!   evaluated in closed form.
//! * [`sim`]: seeded, order-independent Monte Carlo over Poisson arrivals
//!   and uniform device placement.
//! * [`config`]: flat `key=value` run configuration and the CSV output
//!   format used by the `m2m-access` binary.
//!
//! ```
//! use m2m_access::model::SystemParams;
//! use m2m_access::uncoordinated::noma_device_cap;
//!
//! let params = SystemParams::default();
//! assert!((noma_device_cap(&params) - 1442.195).abs() < 1e-3);
//! ```

use std::fmt;

pub mod config;
pub mod coordinated;
pub mod model;
pub mod sim;
pub mod uncoordinated;

/// How devices share the resource block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Access {
    Fdma,
    Tdma,
    Noma,
}

impl Access {
    pub const ALL: [Access; 3] = [Access::Fdma, Access::Tdma, Access::Noma];

    pub fn name(self) -> &'static str {
        match self {
            Access::Fdma => "fdma",
            Access::Tdma => "tdma",
            Access::Noma => "noma",
        }
    }
}

impl fmt::Display for Access {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// The guide's code listings run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/system-model.md")]
    struct SystemModel;
    #[doc = include_str!("../../../book/src/coordinated.md")]
    struct Coordinated;
    #[doc = include_str!("../../../book/src/uncoordinated.md")]
    struct Uncoordinated;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
