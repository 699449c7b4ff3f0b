//! Manager configuration: programmatic construction, key=value files and
//! environment overrides.
//!
//! The on-disk format is one `key=value` pair per line with `#` comments.
//! Recognised keys: `ram_limit_bytes`, `preemptive_fraction`,
//! `significance_level`, `swap_dir`, `swap_file_size_bytes`, `swap_policy`,
//! `overcommit`, `worker_count`. Each key can be overridden by an environment
//! variable of the same name, upper-cased and prefixed with `OOCMEM_`
//! (e.g. `OOCMEM_RAM_LIMIT_BYTES`).

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Reaction to a full swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwapPolicy {
    /// Fail the allocation.
    Fail,
    /// Ask a registered callback whether swap space may be extended.
    Interactive,
    /// Provision additional swap files while disk space lasts.
    #[default]
    Autoextend,
}

impl FromStr for SwapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fail" => Ok(SwapPolicy::Fail),
            "interactive" => Ok(SwapPolicy::Interactive),
            "autoextend" => Ok(SwapPolicy::Autoextend),
            other => Err(Error::Config(format!("unknown swap_policy `{other}`"))),
        }
    }
}

impl std::fmt::Display for SwapPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SwapPolicy::Fail => "fail",
            SwapPolicy::Interactive => "interactive",
            SwapPolicy::Autoextend => "autoextend",
        };
        f.write_str(s)
    }
}

/// Static configuration of a [`crate::MemoryManager`].
#[derive(Debug, Clone)]
pub struct ManagerConfig {
    /// Hard limit on resident managed bytes (including in-flight swap-ins).
    pub ram_limit_bytes: u64,
    /// Fraction of the RAM limit reserved for speculatively loaded blocks,
    /// in `(0, 1]`.
    pub preemptive_fraction: f64,
    /// Significance level of the prefetch decay test, in `(0, 1)`.
    pub significance_level: f64,
    /// Directory holding the swap files.
    pub swap_dir: PathBuf,
    /// Size of each provisioned swap file.
    pub swap_file_size_bytes: u64,
    /// Reaction to a full swap.
    pub swap_policy: SwapPolicy,
    /// When true, pulls that exceed the RAM limit block instead of failing.
    pub overcommit: bool,
    /// Number of background transfer workers.
    pub worker_count: usize,
}

impl ManagerConfig {
    /// A configuration with library defaults: 10% pre-emptive budget, 1%
    /// significance level, swap files as large as the RAM limit, autoextend
    /// policy, overcommit off and two transfer workers.
    pub fn new(ram_limit_bytes: u64, swap_dir: impl Into<PathBuf>) -> Self {
        ManagerConfig {
            ram_limit_bytes,
            preemptive_fraction: 0.10,
            significance_level: 0.01,
            swap_dir: swap_dir.into(),
            swap_file_size_bytes: ram_limit_bytes,
            swap_policy: SwapPolicy::default(),
            overcommit: false,
            worker_count: 2,
        }
    }

    /// Load a configuration from a `key=value` file, then apply `OOCMEM_*`
    /// environment overrides.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse the `key=value` text format. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        // Defaults that apply when a key is absent from the file.
        let mut cfg = ManagerConfig::new(0, "");
        let mut saw_ram_limit = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            let applied = cfg.set_key(key.trim(), value.trim())?;
            if applied == "ram_limit_bytes" {
                saw_ram_limit = true;
            }
        }
        if !saw_ram_limit {
            return Err(Error::Config("ram_limit_bytes is required".into()));
        }
        if cfg.swap_file_size_bytes == 0 {
            cfg.swap_file_size_bytes = cfg.ram_limit_bytes;
        }
        Ok(cfg)
    }

    /// Apply `OOCMEM_*` environment variables over the current values.
    pub fn apply_env(&mut self) -> Result<()> {
        for key in KEYS {
            let var = format!("OOCMEM_{}", key.to_ascii_uppercase());
            if let Ok(value) = std::env::var(&var) {
                self.set_key(key, &value)?;
            }
        }
        Ok(())
    }

    fn set_key(&mut self, key: &str, value: &str) -> Result<&'static str> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for {key}")))
        }
        match key {
            "ram_limit_bytes" => self.ram_limit_bytes = num(key, value)?,
            "preemptive_fraction" => self.preemptive_fraction = num(key, value)?,
            "significance_level" => self.significance_level = num(key, value)?,
            "swap_dir" => self.swap_dir = PathBuf::from(value),
            "swap_file_size_bytes" => self.swap_file_size_bytes = num(key, value)?,
            "swap_policy" => self.swap_policy = value.parse()?,
            "overcommit" => {
                self.overcommit = match value.to_ascii_lowercase().as_str() {
                    "true" | "1" | "yes" | "on" => true,
                    "false" | "0" | "no" | "off" => false,
                    other => {
                        return Err(Error::Config(format!(
                            "invalid value `{other}` for overcommit"
                        )))
                    }
                }
            }
            "worker_count" => self.worker_count = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        // Return the canonical key name for bookkeeping.
        Ok(KEYS.iter().find(|k| **k == key).copied().unwrap())
    }

    /// Check all invariants. Called by the manager builder.
    pub fn validate(&self) -> Result<()> {
        if self.ram_limit_bytes == 0 {
            return Err(Error::Config("ram_limit_bytes must be positive".into()));
        }
        if !(self.preemptive_fraction > 0.0 && self.preemptive_fraction <= 1.0) {
            return Err(Error::Config(
                "preemptive_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.preemptive_budget_bytes() < 1 {
            return Err(Error::Config(
                "preemptive_fraction * ram_limit_bytes must be at least one byte".into(),
            ));
        }
        if !(self.significance_level > 0.0 && self.significance_level < 1.0) {
            return Err(Error::Config("significance_level must lie in (0, 1)".into()));
        }
        if self.swap_file_size_bytes < self.ram_limit_bytes {
            return Err(Error::Config(
                "swap_file_size_bytes must be at least as large as the largest \
                 allowed allocation (the RAM limit)"
                    .into(),
            ));
        }
        if self.worker_count == 0 {
            return Err(Error::Config("worker_count must be positive".into()));
        }
        if self.swap_dir.as_os_str().is_empty() {
            return Err(Error::Config("swap_dir must be set".into()));
        }
        Ok(())
    }

    /// The pre-emptive byte budget derived from the fraction.
    pub fn preemptive_budget_bytes(&self) -> u64 {
        (self.preemptive_fraction * self.ram_limit_bytes as f64).floor() as u64
    }
}

const KEYS: &[&str] = &[
    "ram_limit_bytes",
    "preemptive_fraction",
    "significance_level",
    "swap_dir",
    "swap_file_size_bytes",
    "swap_policy",
    "overcommit",
    "worker_count",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_full_file() {
        let text = "\
# example configuration
ram_limit_bytes = 1048576
preemptive_fraction = 0.2
significance_level = 0.05
swap_dir = /tmp/oocmem
swap_file_size_bytes = 2097152
swap_policy = fail
overcommit = true
worker_count = 4
";
        let cfg = ManagerConfig::parse(text).unwrap();
        assert_eq!(cfg.ram_limit_bytes, 1_048_576);
        assert_eq!(cfg.preemptive_fraction, 0.2);
        assert_eq!(cfg.significance_level, 0.05);
        assert_eq!(cfg.swap_dir, PathBuf::from("/tmp/oocmem"));
        assert_eq!(cfg.swap_file_size_bytes, 2_097_152);
        assert_eq!(cfg.swap_policy, SwapPolicy::Fail);
        assert!(cfg.overcommit);
        assert_eq!(cfg.worker_count, 4);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ManagerConfig::parse("ram_limit_bytes=1\nbogus=1\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ManagerConfig::parse("ram_limit_bytes=4096\nswap_dir=/tmp/x\n").unwrap();
        assert_eq!(cfg.preemptive_fraction, 0.10);
        assert_eq!(cfg.significance_level, 0.01);
        assert_eq!(cfg.swap_file_size_bytes, 4096);
        assert_eq!(cfg.swap_policy, SwapPolicy::Autoextend);
        assert!(!cfg.overcommit);
    }

    #[test]
    fn env_overrides_file() {
        // Env access is process-global; keep this test self-contained.
        std::env::set_var("OOCMEM_WORKER_COUNT", "7");
        std::env::set_var("OOCMEM_SWAP_POLICY", "interactive");
        let mut cfg = ManagerConfig::parse("ram_limit_bytes=4096\nswap_dir=/tmp/x\n").unwrap();
        cfg.apply_env().unwrap();
        std::env::remove_var("OOCMEM_WORKER_COUNT");
        std::env::remove_var("OOCMEM_SWAP_POLICY");
        assert_eq!(cfg.worker_count, 7);
        assert_eq!(cfg.swap_policy, SwapPolicy::Interactive);
    }

    #[test]
    fn validation_bounds() {
        let mut cfg = ManagerConfig::new(1000, "/tmp/x");
        cfg.validate().unwrap();
        cfg.preemptive_fraction = 0.0;
        assert!(cfg.validate().is_err());
        cfg.preemptive_fraction = 1.5;
        assert!(cfg.validate().is_err());
        cfg.preemptive_fraction = 0.1;
        cfg.significance_level = 1.0;
        assert!(cfg.validate().is_err());
        cfg.significance_level = 0.01;
        cfg.swap_file_size_bytes = 999;
        assert!(cfg.validate().is_err());
        cfg.swap_file_size_bytes = 1000;
        cfg.worker_count = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tiny_preemptive_budget_needs_one_byte() {
        let mut cfg = ManagerConfig::new(4, "/tmp/x");
        cfg.preemptive_fraction = 0.1; // 0.4 bytes -> invalid
        assert!(cfg.validate().is_err());
        cfg.preemptive_fraction = 0.25; // exactly 1 byte
        cfg.validate().unwrap();
        assert_eq!(cfg.preemptive_budget_bytes(), 1);
    }
}
