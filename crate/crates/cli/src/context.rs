use mdap_core::config::{Config, Section, ENV_PREFIX, SCHEDULE_KEYS};
use mdap_core::experiments::{ExperimentKind, EXPERIMENT_NAMES};
use mdap_core::{Error, Result};
use sha2::{Digest, Sha256};

use crate::args::{Cli, Command};

/// Keys shared by every section.
const COMMON_KEYS: &[&str] = &["seed", "threads"];

/// Parameter keys accepted in each section.
pub fn section_keys(name: &str) -> Option<Vec<&'static str>> {
    let own: &[&str] = match name {
        "count" => &["x", "T", "a", "b", "c", "set", "random", "h", "hits"],
        "vol" => &["query", "a", "b", "c", "T", "zeta", "theta1", "theta2", "gamma", "y", "k", "oracle", "samples", "tol"],
        "tessellate" => &["a", "b", "c", "T", "zeta", "theta1", "theta2", "samples", "tile_samples"],
        "height" => &["x", "r", "t", "oracle", "oracle_box"],
        "controlled" => &[
            "a", "b", "u1m", "u1p", "u2m", "u2p", "gamma", "delta", "eps", "m", "c", "matrices", "target", "budget",
        ],
        "corr" => &["op", "d1", "d2", "q", "t", "m", "nodes", "alpha", "beta"],
        "schmidt" => &["s_max", "family", "points", "beta", "kappa", "eps", "level", "weight"],
        "levelset" => &["t", "r", "levels", "n"],
        "heightmoment" => &["t", "r", "rho", "eta", "theta", "kappa", "n"],
        "l2siegel" => &["set", "eps", "gamma", "m", "t", "n"],
        "thinstrip" => &["a", "T", "n"],
        "asymptotics" => &["b", "T", "n"],
        "equidist" => &["box", "k", "n"],
        _ => return None,
    };
    Some(own.iter().chain(COMMON_KEYS).copied().collect())
}

const SECTIONS: [&str; 7] = ["count", "vol", "tessellate", "height", "controlled", "corr", "schmidt"];

fn all_keys() -> Vec<&'static str> {
    let mut keys: Vec<&str> = SECTIONS
        .iter()
        .chain(EXPERIMENT_NAMES.iter())
        .flat_map(|s| section_keys(s).unwrap_or_default())
        .chain(SCHEDULE_KEYS.iter().copied())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

/// Effective parameters of one run.
pub struct Context {
    /// Subcommand, or `experiment <name>`.
    pub command: String,
    /// Section holding the parameters (the experiment name for experiments).
    pub section: String,
    pub params: Section,
    pub seed: u64,
    pub threads: usize,
    pub config_hash: String,
}

impl Context {
    /// Loads the config file, applies `MDAP_*` overrides and the flags, and
    /// rejects unknown sections and keys.
    pub fn resolve<I>(cli: &Cli, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = match &cli.global.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        cfg.apply_env(ENV_PREFIX, env);
        let (section, command) = match &cli.command {
            Command::Experiment(a) => {
                let kind = ExperimentKind::parse(&a.name).ok_or_else(|| {
                    Error::Config(format!("unknown experiment {:?}; expected one of {}", a.name, EXPERIMENT_NAMES.join(", ")))
                })?;
                (kind.name().to_string(), format!("experiment {}", kind.name()))
            }
            c => (c.name().to_string(), c.name().to_string()),
        };
        for (k, v) in cli.command.overrides() {
            cfg.set(Some(&section), k, &v);
        }

        cfg.root().check_known(&all_keys())?;
        for name in cfg.section_names() {
            let keys = section_keys(&name).ok_or_else(|| Error::Config(format!("unknown section [{name}]")))?;
            cfg.own_section(&name)
                .check_known(&keys)
                .map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("[{name}] {m}")),
                    e => e,
                })?;
        }

        let keys = section_keys(&section).unwrap_or_default();
        let params = cfg.section(&section);
        let seed = match cli.global.seed {
            Some(s) => s,
            None => params.u64("seed")?.unwrap_or(1),
        };
        let threads = match cli.global.threads {
            Some(t) => t,
            None => params.u64("threads")?.unwrap_or(0) as usize,
        };
        let canonical = format!("command = {command}\nseed = {seed}\n{}", params.canonical(&keys));
        let config_hash = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { command, section, params, seed, threads, config_hash })
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.params.f64(key, &[])?.unwrap_or(default))
    }

    pub fn need_f64(&self, key: &str, vars: &[(&str, f64)]) -> Result<f64> {
        self.params.f64(key, vars)?.ok_or_else(|| missing(key))
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.params.u64(key)?.unwrap_or(default))
    }

    pub fn str(&self, key: &str, default: &str) -> Result<String> {
        Ok(self.params.str(key)?.unwrap_or_else(|| default.to_string()))
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.params.f64_list(key, &[])
    }

    /// A pair `v1,v2`; a single value `v` means `v,v`.
    pub fn pair(&self, key: &str) -> Result<Option<[f64; 2]>> {
        match self.list(key)?.as_deref() {
            None => Ok(None),
            Some([v]) => Ok(Some([*v, *v])),
            Some([a, b]) => Ok(Some([*a, *b])),
            Some(v) => Err(Error::Config(format!("{key}: expected one or two values, got {}", v.len()))),
        }
    }
}

pub fn missing(key: &str) -> Error {
    Error::Config(format!("missing key {key}"))
}
