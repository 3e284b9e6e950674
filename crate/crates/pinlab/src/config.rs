//! Flat key=value run configuration with a one-level law grammar:
//! `law = heavy(c=1.5, phi=const(1.0), p_inf=0.0)` | `geometric(0.5)` |
//! `deterministic(1)`. Command-line flags override file values.

use crate::law::LawKind;
use crate::sv::SlowlyVarying;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required field `{0}`")]
    Missing(String),
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("both `delta` and `u` given; exactly one is allowed")]
    DeltaAndU,
    #[error("cannot read config file: {0}")]
    Io(String),
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Parse the law grammar.
pub fn parse_law(s: &str) -> Result<LawKind, ConfigError> {
    let s = s.trim();
    let (name, args) = split_call(s).ok_or_else(|| invalid("law", format!("cannot parse `{s}`")))?;
    match name {
        "heavy" => {
            let mut c = None;
            let mut phi = SlowlyVarying::Constant(1.0);
            let mut p_inf = 0.0f64;
            for part in split_args(args) {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| invalid("law", format!("expected key=value in `{part}`")))?;
                match k.trim() {
                    "c" => c = Some(parse_f64("law.c", v)?),
                    "p_inf" => p_inf = parse_f64("law.p_inf", v)?,
                    "phi" => {
                        let (pn, pa) = split_call(v.trim())
                            .ok_or_else(|| invalid("law.phi", format!("cannot parse `{v}`")))?;
                        let a = parse_f64("law.phi", pa)?;
                        phi = match pn {
                            "const" => SlowlyVarying::Constant(a),
                            "logpower" => SlowlyVarying::LogPower(a),
                            other => return Err(invalid("law.phi", format!("unknown phi kind `{other}`"))),
                        };
                    }
                    other => return Err(invalid("law", format!("unknown heavy() key `{other}`"))),
                }
            }
            Ok(LawKind::Heavy {
                c: c.ok_or_else(|| ConfigError::Missing("law.c".into()))?,
                phi,
                p_inf,
            })
        }
        "geometric" => Ok(LawKind::Geometric {
            p: parse_f64("law", args)?,
        }),
        "deterministic" => Ok(LawKind::Deterministic {
            k: args
                .trim()
                .parse()
                .map_err(|_| invalid("law", format!("bad deterministic length `{args}`")))?,
        }),
        other => Err(invalid("law", format!("unknown law kind `{other}`"))),
    }
}

pub fn law_to_string(law: &LawKind) -> String {
    match law {
        LawKind::Heavy { c, phi, p_inf } => {
            let phis = match phi {
                SlowlyVarying::Constant(a) => format!("const({a})"),
                SlowlyVarying::LogPower(a) => format!("logpower({a})"),
            };
            format!("heavy(c={c}, phi={phis}, p_inf={p_inf})")
        }
        LawKind::Geometric { p } => format!("geometric({p})"),
        LawKind::Deterministic { k } => format!("deterministic({k})"),
    }
}

fn split_call(s: &str) -> Option<(&str, &str)> {
    let open = s.find('(')?;
    if !s.ends_with(')') {
        return None;
    }
    Some((s[..open].trim(), &s[open + 1..s.len() - 1]))
}

/// Split on top-level commas (the law grammar nests at most one level of parens).
fn split_args(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(ch);
            }
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
            }
            _ => cur.push(ch),
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.trim()
        .parse()
        .map_err(|_| invalid(key, format!("not a number: `{v}`")))
}

const KNOWN_KEYS: &[&str] = &[
    "law", "beta", "delta", "u", "n", "n_grid", "replicas", "seed", "out_dir", "threads",
    "delta_grid", "beta_grid", "theta_frac", "a_const", "m_cap", "k_max", "n_pairs", "n_table",
];

/// Resolved run configuration; optional fields are checked per subcommand.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub law: Option<LawKind>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub u: Option<f64>,
    pub n: Option<usize>,
    pub n_grid: Vec<usize>,
    pub n_replicas: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub delta_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub theta_frac: f64,
    pub a_const: f64,
    pub m_cap: u64,
    pub k_max: u64,
    pub n_pairs: usize,
    pub n_table: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            law: None,
            beta: None,
            delta: None,
            u: None,
            n: None,
            n_grid: Vec::new(),
            n_replicas: 16,
            seed: 1,
            out_dir: None,
            threads: None,
            delta_grid: Vec::new(),
            beta_grid: Vec::new(),
            theta_frac: 0.5,
            a_const: 1.0,
            m_cap: 10_000_000,
            k_max: 2000,
            n_pairs: 10_000,
            n_table: 100_000,
        }
    }
}

impl RunConfig {
    /// Parse a flat key=value file ('#' comments, blank lines allowed).
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut saw_delta = false;
        let mut saw_u = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(line, "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "delta" {
                saw_delta = true;
            }
            if k == "u" {
                saw_u = true;
            }
            self.set(k, v)?;
        }
        if saw_delta && saw_u {
            return Err(ConfigError::DeltaAndU);
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        match key {
            "law" => self.law = Some(parse_law(value)?),
            "beta" => self.beta = Some(parse_f64(key, value)?),
            "delta" => {
                self.delta = Some(parse_f64(key, value)?);
                self.u = None;
            }
            "u" => {
                self.u = Some(parse_f64(key, value)?);
                self.delta = None;
            }
            "n" => self.n = Some(parse_usize(key, value)?),
            "n_grid" => self.n_grid = parse_list(key, value, parse_usize)?,
            "replicas" => self.n_replicas = parse_usize(key, value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| invalid(key, format!("not an integer: `{value}`")))?
            }
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "threads" => self.threads = Some(parse_usize(key, value)?),
            "delta_grid" => self.delta_grid = parse_list(key, value, parse_f64)?,
            "beta_grid" => self.beta_grid = parse_list(key, value, parse_f64)?,
            "theta_frac" => self.theta_frac = parse_f64(key, value)?,
            "a_const" => self.a_const = parse_f64(key, value)?,
            "m_cap" => {
                self.m_cap = value
                    .parse()
                    .map_err(|_| invalid(key, format!("not an integer: `{value}`")))?
            }
            "k_max" => {
                self.k_max = value
                    .parse()
                    .map_err(|_| invalid(key, format!("not an integer: `{value}`")))?
            }
            "n_pairs" => self.n_pairs = parse_usize(key, value)?,
            "n_table" => self.n_table = parse_usize(key, value)?,
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn require_law(&self) -> Result<&LawKind, ConfigError> {
        self.law.as_ref().ok_or_else(|| ConfigError::Missing("law".into()))
    }

    pub fn require_beta(&self) -> Result<f64, ConfigError> {
        let b = self.beta.ok_or_else(|| ConfigError::Missing("beta".into()))?;
        if b <= 0.0 {
            return Err(invalid("beta", "must be positive"));
        }
        Ok(b)
    }

    /// Resolve (delta, u) through Δ = u + β/2; exactly one must be present.
    pub fn resolve_potential(&self) -> Result<(f64, f64), ConfigError> {
        let beta = self.require_beta()?;
        match (self.delta, self.u) {
            (Some(_), Some(_)) => Err(ConfigError::DeltaAndU),
            (Some(d), None) => Ok((d, d - beta / 2.0)),
            (None, Some(u)) => Ok((u + beta / 2.0, u)),
            (None, None) => Err(ConfigError::Missing("delta (or u)".into())),
        }
    }

    pub fn require_n(&self) -> Result<usize, ConfigError> {
        self.n.ok_or_else(|| ConfigError::Missing("n".into()))
    }

    /// Canonical sorted key=value rendering (hashed into the manifest).
    pub fn canonical_string(&self, experiment: &str) -> String {
        let mut map = BTreeMap::new();
        map.insert("experiment", experiment.to_string());
        if let Some(law) = &self.law {
            map.insert("law", law_to_string(law));
        }
        if let Some(v) = self.beta {
            map.insert("beta", v.to_string());
        }
        if let Some(v) = self.delta {
            map.insert("delta", v.to_string());
        }
        if let Some(v) = self.u {
            map.insert("u", v.to_string());
        }
        if let Some(v) = self.n {
            map.insert("n", v.to_string());
        }
        if !self.n_grid.is_empty() {
            map.insert("n_grid", join(&self.n_grid));
        }
        map.insert("replicas", self.n_replicas.to_string());
        map.insert("seed", self.seed.to_string());
        if !self.delta_grid.is_empty() {
            map.insert("delta_grid", join(&self.delta_grid));
        }
        if !self.beta_grid.is_empty() {
            map.insert("beta_grid", join(&self.beta_grid));
        }
        map.insert("theta_frac", self.theta_frac.to_string());
        map.insert("a_const", self.a_const.to_string());
        map.insert("m_cap", self.m_cap.to_string());
        map.insert("k_max", self.k_max.to_string());
        map.insert("n_pairs", self.n_pairs.to_string());
        map.insert("n_table", self.n_table.to_string());
        let mut out = String::new();
        for (k, v) in map {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim()
        .parse()
        .map_err(|_| invalid(key, format!("not an integer: `{v}`")))
}

fn parse_list<T>(
    key: &str,
    v: &str,
    item: impl Fn(&str, &str) -> Result<T, ConfigError>,
) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| item(key, s))
        .collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
