//! Run configuration and CSV output.
//!
//! Configuration files are flat `key=value` lines; `#` starts a comment.
//! Values resolve with precedence flags > file > `MA_BENCH_SEED` (seed only)
//! > built-in defaults, and every invariant is checked after merging.
//!
//! ```text
//! # coordinated sweep with hardware minima
//! ref_snr=1
//! schemes=coordinated-fdma,coordinated-tdma,coordinated-noma
//! enforce_minimum=true
//! lambda_min=1000
//! lambda_max=20000
//! lambda_steps=20
//! ```

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::model::{ModelError, SystemParams};
use crate::sim::{Coordination, Scheme, SchemeTag, SweepRow};
use crate::uncoordinated::SnrTargetVariant;

/// Environment variable read as the lowest-precedence seed source.
pub const SEED_ENV: &str = "MA_BENCH_SEED";

pub const CSV_HEADER: &str = "scheme,lambda,trials,mean_throughput_pps,ci95_halfwidth,seed,params_digest";

/// Where a configuration value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Default,
    Env,
    File { line: usize },
    Flag,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub key: Option<String>,
    pub origin: Origin,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.origin {
            Origin::File { line } => write!(f, "line {line}: ")?,
            Origin::Flag => write!(f, "flag: ")?,
            Origin::Env => write!(f, "{SEED_ENV}: ")?,
            Origin::Default => {}
        }
        if let Some(key) = &self.key {
            write!(f, "key `{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Error)]
#[error("cannot write {}: {source}", path.display())]
pub struct CsvWriteError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analytic,
    MonteCarlo,
    Both,
}

impl Mode {
    fn parse(s: &str) -> Option<Mode> {
        match s {
            "analytic" => Some(Mode::Analytic),
            "montecarlo" => Some(Mode::MonteCarlo),
            "both" => Some(Mode::Both),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Analytic => "analytic",
            Mode::MonteCarlo => "montecarlo",
            Mode::Both => "both",
        }
    }

    pub fn runs_analytic(self) -> bool {
        self != Mode::MonteCarlo
    }

    pub fn runs_montecarlo(self) -> bool {
        self != Mode::Analytic
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub schemes: Vec<SchemeTag>,
    pub mode: Mode,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_steps: u32,
    pub trials: u32,
    pub master_seed: u64,
    /// `-` means standard output.
    pub output_path: PathBuf,
    pub noma_eq20_variant: SnrTargetVariant,
    /// Pad coordinated FDMA/TDMA allocations up to the partition minima.
    pub enforce_minimum: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: SystemParams::default(),
            schemes: SchemeTag::all(),
            mode: Mode::MonteCarlo,
            lambda_min: 1000.0,
            lambda_max: 20000.0,
            lambda_steps: 20,
            trials: 10_000,
            master_seed: 0,
            output_path: PathBuf::from("-"),
            noma_eq20_variant: SnrTargetVariant::AsPrinted,
            enforce_minimum: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "bandwidth_hz",
    "slot_s",
    "payload_bits",
    "ref_snr",
    "pathloss_exp",
    "min_slot_s",
    "min_subchannel_hz",
    "schemes",
    "mode",
    "lambda_min",
    "lambda_max",
    "lambda_steps",
    "trials",
    "master_seed",
    "output_path",
    "noma_eq20_variant",
    "enforce_minimum",
];

fn number<T: FromStr>(key: &str, value: &str, origin: &Origin) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError {
        key: Some(key.to_string()),
        origin: origin.clone(),
        message: format!("cannot parse `{value}`"),
    })
}

impl RunConfig {
    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError {
            key: Some(key.to_string()),
            origin: origin.clone(),
            message,
        };
        match key {
            "bandwidth_hz" => self.params.bandwidth_hz = number(key, value, &origin)?,
            "slot_s" => self.params.slot_s = number(key, value, &origin)?,
            "payload_bits" => self.params.payload_bits = number(key, value, &origin)?,
            "ref_snr" => self.params.ref_snr = number(key, value, &origin)?,
            "pathloss_exp" => self.params.pathloss_exp = number(key, value, &origin)?,
            "min_slot_s" => self.params.min_slot_s = number(key, value, &origin)?,
            "min_subchannel_hz" => self.params.min_subchannel_hz = number(key, value, &origin)?,
            "schemes" => {
                self.schemes = if value == "all" {
                    SchemeTag::all()
                } else {
                    value
                        .split(',')
                        .map(|s| SchemeTag::parse(s.trim()).ok_or_else(|| bad(format!("unknown scheme `{}`", s.trim()))))
                        .collect::<Result<_, _>>()?
                };
            }
            "mode" => {
                self.mode = Mode::parse(value).ok_or_else(|| bad(format!("unknown mode `{value}`")))?;
            }
            "lambda_min" => self.lambda_min = number(key, value, &origin)?,
            "lambda_max" => self.lambda_max = number(key, value, &origin)?,
            "lambda_steps" => self.lambda_steps = number(key, value, &origin)?,
            "trials" => self.trials = number(key, value, &origin)?,
            "master_seed" => self.master_seed = number(key, value, &origin)?,
            "output_path" => self.output_path = PathBuf::from(value),
            "noma_eq20_variant" => {
                self.noma_eq20_variant =
                    SnrTargetVariant::parse(value).ok_or_else(|| bad(format!("unknown variant `{value}`")))?;
            }
            "enforce_minimum" => self.enforce_minimum = number(key, value, &origin)?,
            _ => return Err(bad("unknown key".to_string())),
        }
        Ok(())
    }

    /// The arrival-rate grid: `lambda_steps` evenly spaced points from
    /// `lambda_min` to `lambda_max` inclusive.
    pub fn lambda_grid(&self) -> Vec<f64> {
        if self.lambda_steps <= 1 {
            return vec![self.lambda_min];
        }
        let last = self.lambda_steps - 1;
        let step = (self.lambda_max - self.lambda_min) / last as f64;
        (0..self.lambda_steps)
            .map(|i| if i == last { self.lambda_max } else { self.lambda_min + i as f64 * step })
            .collect()
    }

    pub fn scheme_list(&self) -> Vec<Scheme> {
        self.schemes
            .iter()
            .map(|&tag| Scheme::from_tag(tag, self.enforce_minimum, self.noma_eq20_variant))
            .collect()
    }

    fn validate(&self, origins: &[(String, Origin)]) -> Result<(), ConfigError> {
        let origin_of = |key: &str| {
            origins
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .map_or(Origin::Default, |(_, o)| o.clone())
        };
        let fail = |key: &str, message: String| ConfigError {
            key: Some(key.to_string()),
            origin: origin_of(key),
            message,
        };
        if let Err(err) = self.params.validate() {
            return Err(match err {
                ModelError::InvalidParam { name, reason } => fail(name, reason),
                other => fail("params", other.to_string()),
            });
        }
        if !(self.lambda_min.is_finite() && self.lambda_min >= 0.0) {
            return Err(fail("lambda_min", "must be finite and >= 0".into()));
        }
        if !(self.lambda_max.is_finite() && self.lambda_max >= self.lambda_min) {
            return Err(fail("lambda_max", "must be finite and >= lambda_min".into()));
        }
        if self.lambda_steps == 0 {
            return Err(fail("lambda_steps", "must be at least 1".into()));
        }
        if self.lambda_steps > 1 && self.lambda_max == self.lambda_min {
            return Err(fail("lambda_steps", "several steps need lambda_max > lambda_min".into()));
        }
        if self.trials == 0 {
            return Err(fail("trials", "must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(fail("schemes", "no scheme selected".into()));
        }
        let coordinated = self.schemes.iter().any(|s| s.coordination == Coordination::Coordinated);
        if self.mode == Mode::Analytic && coordinated {
            return Err(fail(
                "mode",
                "coordinated schemes have no closed form; use montecarlo or both".into(),
            ));
        }
        Ok(())
    }
}

/// Builds a validated configuration from a file body and flag overrides.
pub fn parse_config(file_text: &str, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    parse_config_with_env(file_text, overrides, None)
}

/// As [`parse_config`], with the value of `MA_BENCH_SEED` (if any) as the
/// seed to use when neither the file nor a flag sets one.
pub fn parse_config_with_env(
    file_text: &str,
    overrides: &[(String, String)],
    env_seed: Option<&str>,
) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    let mut origins: Vec<(String, Origin)> = Vec::new();

    if let Some(seed) = env_seed {
        config.set("master_seed", seed.trim(), Origin::Env)?;
        origins.push(("master_seed".into(), Origin::Env));
    }
    for (index, raw) in file_text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError {
                key: None,
                origin: Origin::File { line },
                message: format!("expected `key=value`, found `{content}`"),
            });
        };
        let key = key.trim();
        config.set(key, value.trim(), Origin::File { line })?;
        origins.push((key.to_string(), Origin::File { line }));
    }
    for (key, value) in overrides {
        config.set(key, value.trim(), Origin::Flag)?;
        origins.push((key.clone(), Origin::Flag));
    }
    config.validate(&origins)?;
    Ok(config)
}

/// Formats rows as CSV. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.scheme,
            row.lambda,
            row.trials,
            row.mean_throughput,
            row.ci95_halfwidth,
            row.seed,
            row.params.digest()
        )?;
    }
    out.flush()
}

pub fn to_csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// Writes rows to `path`; `-` writes to standard output.
pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<(), CsvWriteError> {
    let wrap = |source| CsvWriteError {
        path: path.to_path_buf(),
        source,
    };
    if path == Path::new("-") {
        return write_csv(rows, io::stdout().lock()).map_err(wrap);
    }
    let file = File::create(path).map_err(wrap)?;
    write_csv(rows, BufWriter::new(file)).map_err(wrap)
}

/// Reads rows back from [`write_csv`] output.
pub fn parse_csv(text: &str) -> Option<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next()? != CSV_HEADER {
        return None;
    }
    lines
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            let [scheme, lambda, trials, mean, ci, seed, digest] = fields[..] else {
                return None;
            };
            Some(SweepRow {
                scheme: scheme.to_string(),
                lambda: lambda.parse().ok()?,
                trials: trials.parse().ok()?,
                mean_throughput: mean.parse().ok()?,
                ci95_halfwidth: ci.parse().ok()?,
                seed: seed.parse().ok()?,
                params: SystemParams::from_digest(digest)?,
            })
        })
        .collect()
}
