//! Key-value configuration files (TOML syntax: flat keys plus one table per
//! experiment) with environment overrides and expression-valued entries.

use std::collections::BTreeMap;
use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::expr;
use crate::params::ParamSchedule;

/// Default prefix for environment overrides.
pub const ENV_PREFIX: &str = "MDAP_";

/// Keys accepted by [`schedule_from`].
pub const SCHEDULE_KEYS: &[&str] = &["a", "b", "c", "zeta", "theta1", "theta2", "T"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    root: Table,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(Self { root })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies overrides of the form `PREFIX<KEY>=v` (top level) and
    /// `PREFIX<SECTION>__<KEY>=v` (inside a section). Names are lowercased
    /// except a trailing `T`, which keeps its case. Values are read as TOML
    /// literals when possible, otherwise as strings.
    pub fn apply_env<I>(&mut self, prefix: &str, vars: I)
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (k, v) in vars {
            let Some(rest) = k.strip_prefix(prefix) else {
                continue;
            };
            let mut parts = rest.splitn(2, "__");
            let first = parts.next().unwrap_or_default();
            match parts.next() {
                Some(key) => self.set(Some(&first.to_ascii_lowercase()), &key_name(key), &v),
                None => self.set(None, &key_name(first), &v),
            }
        }
    }

    /// Sets `key` (top level or inside `section`) from raw text, read as a
    /// TOML literal when possible and as a string otherwise.
    pub fn set(&mut self, section: Option<&str>, key: &str, raw: &str) {
        let value = literal(raw);
        match section {
            Some(name) => {
                let entry = self
                    .root
                    .entry(name.to_string())
                    .or_insert_with(|| Value::Table(Table::new()));
                if let Value::Table(t) = entry {
                    t.insert(key.to_string(), value);
                }
            }
            None => {
                self.root.insert(key.to_string(), value);
            }
        }
    }

    /// Top-level scalar entries.
    pub fn root(&self) -> Section {
        let table = self
            .root
            .iter()
            .filter(|(_, v)| !v.is_table())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Section { table }
    }

    /// A named section with top-level scalars as defaults underneath it.
    pub fn section(&self, name: &str) -> Section {
        let mut sec = self.root();
        if let Some(Value::Table(t)) = self.root.get(name) {
            for (k, v) in t {
                sec.table.insert(k.clone(), v.clone());
            }
        }
        sec
    }

    /// A named section without the top-level defaults.
    pub fn own_section(&self, name: &str) -> Section {
        let table = match self.root.get(name) {
            Some(Value::Table(t)) => t.clone(),
            _ => Table::new(),
        };
        Section { table }
    }

    pub fn section_names(&self) -> Vec<String> {
        self.root
            .iter()
            .filter(|(_, v)| v.is_table())
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// Canonical text used for hashing: keys sorted, one `key = value` per line.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let sorted: BTreeMap<_, _> = self.root.iter().collect();
        for (k, v) in sorted {
            if let Value::Table(t) = v {
                let inner: BTreeMap<_, _> = t.iter().collect();
                for (ik, iv) in inner {
                    out.push_str(&format!("{k}.{ik} = {iv}\n"));
                }
            } else {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

fn key_name(raw: &str) -> String {
    if raw == "T" {
        raw.to_string()
    } else {
        raw.to_ascii_lowercase()
    }
}

fn literal(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// A flat view of one configuration section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    table: Table,
}

impl Section {
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.table.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    /// Rejects any key outside `allowed`.
    pub fn check_known(&self, allowed: &[&str]) -> Result<()> {
        for k in self.keys() {
            if !allowed.contains(&k) {
                return Err(Error::Config(format!("unknown key {k:?}")));
            }
        }
        Ok(())
    }

    /// A real value: a number literal or an expression string evaluated with `vars`.
    pub fn f64(&self, key: &str, vars: &[(&str, f64)]) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(Value::String(s)) => expr::eval(s, vars)
                .map(Some)
                .map_err(|e| Error::Config(format!("{key}: {e}"))),
            Some(other) => Err(Error::Config(format!(
                "{key}: expected a number, got {other}"
            ))),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(Value::Float(v)) if *v >= 0.0 && v.fract() == 0.0 && *v < 2f64.powi(64) => {
                Ok(Some(*v as u64))
            }
            Some(other) => Err(Error::Config(format!(
                "{key}: expected a nonnegative integer, got {other}"
            ))),
        }
    }

    pub fn str(&self, key: &str) -> Result<Option<String>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(Error::Config(format!(
                "{key}: expected a string, got {other}"
            ))),
        }
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(other) => Err(Error::Config(format!(
                "{key}: expected true or false, got {other}"
            ))),
        }
    }

    /// `key = value` lines for the keys in `keys`, sorted by key.
    pub fn canonical(&self, keys: &[&str]) -> String {
        let sorted: BTreeMap<_, _> = self
            .table
            .iter()
            .filter(|(k, _)| keys.contains(&k.as_str()))
            .collect();
        sorted
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// A list of reals, given as an array or as a comma-separated string.
    pub fn f64_list(&self, key: &str, vars: &[(&str, f64)]) -> Result<Option<Vec<f64>>> {
        let item = |v: &Value| -> Result<f64> {
            match v {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                Value::String(s) => {
                    expr::eval(s, vars).map_err(|e| Error::Config(format!("{key}: {e}")))
                }
                other => Err(Error::Config(format!("{key}: bad list item {other}"))),
            }
        };
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items.iter().map(item).collect::<Result<_>>().map(Some),
            Some(Value::String(s)) => s
                .split(',')
                .map(|p| {
                    expr::eval(p.trim(), vars).map_err(|e| Error::Config(format!("{key}: {e}")))
                })
                .collect::<Result<_>>()
                .map(Some),
            Some(v) => item(v).map(|x| Some(vec![x])),
        }
    }
}

/// Builds a schedule from the keys `a, b, c, zeta, theta1, theta2, T`. `T` is
/// evaluated first; the others may be expressions in `T`. Missing `zeta` and
/// `theta*` default to 1.
pub fn schedule_from(sec: &Section) -> Result<ParamSchedule> {
    let horizon = sec
        .f64("T", &[])?
        .ok_or_else(|| Error::Config("missing key T".into()))?;
    let vars = [("T", horizon)];
    let need = |k: &str| -> Result<f64> {
        sec.f64(k, &vars)?
            .ok_or_else(|| Error::Config(format!("missing key {k}")))
    };
    let opt = |k: &str| -> Result<f64> { Ok(sec.f64(k, &vars)?.unwrap_or(1.0)) };
    Ok(
        ParamSchedule::new(need("a")?, need("b")?, need("c")?, horizon).with_regime_constants(
            opt("zeta")?,
            opt("theta1")?,
            opt("theta2")?,
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
seed = 7
T = 1e4
a = "pow(log(T), -2)"
b = 0.1
c = 0.4

[thinstrip]
n = 100
T = "1e3, 1e4"
"#;

    #[test]
    fn schedule_with_expression() {
        let cfg = Config::parse(TEXT).unwrap();
        let s = schedule_from(&cfg.root()).unwrap();
        assert_eq!(s.horizon, 1e4);
        assert_eq!(s.a, 1e4f64.ln().powi(-2));
        assert_eq!(s.zeta, 1.0);
    }

    #[test]
    fn sections_inherit_root_scalars() {
        let cfg = Config::parse(TEXT).unwrap();
        let sec = cfg.section("thinstrip");
        assert_eq!(sec.u64("n").unwrap(), Some(100));
        assert_eq!(sec.u64("seed").unwrap(), Some(7));
        assert_eq!(sec.f64_list("T", &[]).unwrap(), Some(vec![1e3, 1e4]));
        assert!(sec.check_known(&["n", "seed", "T", "a", "b", "c"]).is_ok());
        assert!(sec.check_known(&["n"]).is_err());
    }

    #[test]
    fn env_overrides() {
        let mut cfg = Config::parse(TEXT).unwrap();
        cfg.apply_env(
            ENV_PREFIX,
            vec![
                ("MDAP_B".to_string(), "0.2".to_string()),
                ("MDAP_THINSTRIP__N".to_string(), "5".to_string()),
                ("MDAP_T".to_string(), "100".to_string()),
                ("OTHER".to_string(), "1".to_string()),
            ],
        );
        let s = schedule_from(&cfg.root()).unwrap();
        assert_eq!(s.b, 0.2);
        assert_eq!(s.horizon, 100.0);
        assert_eq!(cfg.section("thinstrip").u64("n").unwrap(), Some(5));
    }

    #[test]
    fn bad_input_is_config_error() {
        assert!(matches!(Config::parse("a = ="), Err(Error::Config(_))));
        let cfg = Config::parse("T = 10\na = \"q + 1\"\nb = 1\nc = 0.1").unwrap();
        assert!(matches!(schedule_from(&cfg.root()), Err(Error::Config(_))));
    }

    #[test]
    fn canonical_is_order_independent() {
        let x = Config::parse("b = 1\na = 2\n[s]\nz = 1\ny = 2").unwrap();
        let y = Config::parse("a = 2\nb = 1\n[s]\ny = 2\nz = 1").unwrap();
        assert_eq!(x.canonical(), y.canonical());
    }
}
