//! `key = value` experiment configs with `[section]` headers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use exterior_core::expr::Expr;
use exterior_core::{Coefficient, OperatorSpec, SourceTerm};
use ini::Ini;

use crate::CliError;

const KEYS: &[(&str, &[&str])] = &[
    ("experiment", &["command", "name", "seed"]),
    ("operator", &["coefficient", "p", "n", "delta", "L", "l_up"]),
    ("source", &["name", "c_f", "eps", "inner_radius"]),
    ("geometry", &["r_in", "r_out", "u_in", "u_out", "points"]),
    ("barrier", &["family", "a", "radius", "f_sup", "points", "r_min", "r_max"]),
    ("solver", &["method", "tol", "max_iter", "mesh", "cells", "per_doubling", "angles", "initial", "panels"]),
    ("boundary", &["inner", "outer"]),
    ("exhaust", &["inner_radius", "r0", "m_max", "per_doubling", "h_min", "angles", "rho", "method", "tol"]),
    ("rearrange", &["r_exp", "s_exp"]),
    ("asymptotics", &["input", "r_start", "doublings", "theta"]),
    ("counterexample", &["points", "r_max", "extremes"]),
    ("suite", &["experiments"]),
];

/// A parsed config. Values stay as strings until a command asks for them,
/// so each command validates only what it uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| config_err(format!("{e}")))?;
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (sec, props) in &ini {
            let sec = match sec {
                Some(s) => s.to_string(),
                None if props.is_empty() => continue,
                None => return Err(config_err("keys outside a [section]")),
            };
            let allowed = KEYS
                .iter()
                .find(|(name, _)| *name == sec)
                .ok_or_else(|| config_err(format!("unknown section [{sec}]")))?
                .1;
            let entry = sections.entry(sec.clone()).or_default();
            for (k, v) in props.iter() {
                if !allowed.contains(&k) {
                    return Err(config_err(format!("unknown key '{k}' in [{sec}]")));
                }
                entry.insert(k.to_string(), v.trim().to_string());
            }
        }
        Ok(ExperimentConfig { sections, base_dir: base_dir.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn empty() -> Self {
        ExperimentConfig { sections: BTreeMap::new(), base_dir: PathBuf::from(".") }
    }

    pub fn get(&self, sec: &str, key: &str) -> Option<&str> {
        self.sections.get(sec).and_then(|s| s.get(key)).map(|s| s.as_str())
    }

    pub fn set(&mut self, sec: &str, key: &str, value: impl Into<String>) {
        self.sections.entry(sec.into()).or_default().insert(key.into(), value.into());
    }

    pub fn f64_opt(&self, sec: &str, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(sec, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| !x.is_nan())
                .map(Some)
                .ok_or_else(|| config_err(format!("[{sec}] {key} = '{v}' is not a number"))),
        }
    }

    pub fn f64_or(&self, sec: &str, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(sec, key)?.unwrap_or(default))
    }

    pub fn f64_req(&self, sec: &str, key: &str) -> Result<f64, CliError> {
        self.f64_opt(sec, key)?.ok_or_else(|| config_err(format!("missing [{sec}] {key}")))
    }

    pub fn usize_or(&self, sec: &str, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| config_err(format!("[{sec}] {key} = '{v}' is not a nonnegative integer"))),
        }
    }

    pub fn str_or<'a>(&'a self, sec: &str, key: &str, default: &'a str) -> &'a str {
        self.get(sec, key).unwrap_or(default)
    }

    pub fn command(&self) -> Option<&str> {
        self.get("experiment", "command")
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        match self.get("experiment", "seed") {
            None => Ok(0),
            Some(v) => v.parse().map_err(|_| config_err(format!("seed '{v}' is not an unsigned integer"))),
        }
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn operator(&self) -> Result<OperatorSpec, CliError> {
        let p = self.f64_req("operator", "p")?;
        let n = self.usize_or("operator", "n", 2)?;
        let coeff = Coefficient::parse(self.str_or("operator", "coefficient", "plap"))?;
        let delta = self.f64_opt("operator", "delta")?;
        let l_up = match self.f64_opt("operator", "L")? {
            Some(l) => Some(l),
            None => self.f64_opt("operator", "l_up")?,
        };
        let spec = match (delta, l_up) {
            (Some(d), Some(l)) => OperatorSpec::new(p, n, coeff, d, l)?,
            (None, None) => OperatorSpec::with_natural_bounds(p, n, coeff)?,
            _ => return Err(config_err("give both [operator] delta and L, or neither")),
        };
        Ok(spec)
    }

    pub fn source(&self, spec: &OperatorSpec) -> Result<SourceTerm, CliError> {
        let mut f = SourceTerm::parse(self.str_or("source", "name", "zero"), spec.p, spec.n)?;
        match (self.f64_opt("source", "c_f")?, self.f64_opt("source", "eps")?) {
            (Some(c), Some(e)) => f = f.with_decay(c, e),
            (None, None) => {}
            _ => return Err(config_err("give both [source] c_f and eps, or neither")),
        }
        if let Some(r) = self.f64_opt("source", "inner_radius")? {
            f = f.with_inner_radius(r);
        }
        Ok(f)
    }

    /// Canonical text form: sorted sections and keys.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (sec, props) in &self.sections {
            out.push_str(&format!("[{sec}]\n"));
            for (k, v) in props {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// A boundary datum given as a number or an expression in `theta`.
pub fn angle_function(text: &str) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>, CliError> {
    let text = text.trim();
    if let Ok(c) = text.parse::<f64>() {
        return Ok(Box::new(move |_| c));
    }
    let e = Expr::parse(text.strip_prefix("expr:").unwrap_or(text), "theta")?;
    Ok(Box::new(move |t| e.eval(t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_echoes_sorted() {
        let c = ExperimentConfig::parse("[operator]\np = 3\nn = 2\n[experiment]\ncommand = barrier\n", Path::new(".")).unwrap();
        assert_eq!(c.command(), Some("barrier"));
        assert_eq!(c.echo(), "[experiment]\ncommand = barrier\n[operator]\nn = 2\np = 3\n");
        assert_eq!(c.operator().unwrap().p, 3.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_numbers() {
        assert!(ExperimentConfig::parse("[operator]\nq = 1\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("[nope]\nq = 1\n", Path::new(".")).is_err());
        let c = ExperimentConfig::parse("[operator]\np = x\n", Path::new(".")).unwrap();
        assert!(c.operator().is_err());
    }

    #[test]
    fn angle_functions() {
        assert_eq!(angle_function("2.5").unwrap()(1.0), 2.5);
        assert!((angle_function("cos(theta)").unwrap()(0.0) - 1.0).abs() < 1e-15);
    }
}
