//! Run configuration: a flat key-value document plus command-line overrides.
//!
//! Documents are TOML (`chi.a.b = 0.3` style dotted keys) or the JSON run
//! manifest written by a previous run, whose `config` table is read back.
//! Every key is optional; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cpt::cpt_solution;
use crate::dynamics::{time_grid, IntegratorOptions, ResonanceRule};
use crate::ensemble::{SeedRule, SeedSpec};
use crate::error::{Error, Result};
use crate::model::{initial_state, ModeAmplitudes, PulseSchedule, PulseShape, ReactionVariant, SystemParams};

/// A scalar configuration value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl Value {
    fn as_f64(&self, key: &str) -> Result<f64> {
        match *self {
            Value::Int(i) => Ok(i as f64),
            Value::Float(x) => Ok(x),
            Value::Str(ref s) => Err(Error::config(key, format!("expected a number, got `{s}`"))),
        }
    }

    fn as_count(&self, key: &str) -> Result<u64> {
        match *self {
            Value::Int(i) if i >= 0 => Ok(i as u64),
            _ => Err(Error::config(key, format!("expected a non-negative integer, got `{self}`"))),
        }
    }

    fn as_str(&self, key: &str) -> Result<&str> {
        match self {
            Value::Str(s) => Ok(s),
            other => Err(Error::config(key, format!("expected a string, got `{other}`"))),
        }
    }

    fn from_toml(key: &str, v: toml::Value) -> Result<Self> {
        match v {
            toml::Value::Integer(i) => Ok(Value::Int(i)),
            toml::Value::Float(x) => Ok(Value::Float(x)),
            toml::Value::String(s) => Ok(Value::Str(s)),
            other => Err(Error::config(key, format!("unsupported value `{other}`"))),
        }
    }

    fn from_json(key: &str, v: &serde_json::Value) -> Result<Self> {
        match v {
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Ok(Value::Int(i)),
                None => n
                    .as_f64()
                    .map(Value::Float)
                    .ok_or_else(|| Error::config(key, format!("unsupported number `{n}`"))),
            },
            serde_json::Value::String(s) => Ok(Value::Str(s.clone())),
            other => Err(Error::config(key, format!("unsupported value `{other}`"))),
        }
    }
}

/// Flattens a TOML document into dotted keys.
pub fn parse_toml(text: &str) -> Result<Vec<(String, Value)>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("document", e.message().to_string()))?;
    let mut out = Vec::new();
    flatten("", toml::Value::Table(table), &mut out)?;
    Ok(out)
}

fn flatten(prefix: &str, v: toml::Value, out: &mut Vec<(String, Value)>) -> Result<()> {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
            Ok(())
        }
        other => {
            out.push((prefix.to_string(), Value::from_toml(prefix, other)?));
            Ok(())
        }
    }
}

/// Parses one `key=value` override; the value is read as a TOML scalar and
/// falls back to a bare string.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::config(text, "override must have the form key=value"))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => Value::from_toml(&key, t.remove("v").unwrap())?,
        Err(_) => Value::Str(raw.to_string()),
    };
    Ok((key, value))
}

/// Reads a TOML document or the `config` table of a JSON run manifest.
pub fn read_document(path: &Path) -> Result<Vec<(String, Value)>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let doc: serde_json::Value = serde_json::from_str(&text)?;
        let table = doc
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| Error::config("config", "JSON document has no `config` table"))?;
        table
            .iter()
            .map(|(k, v)| Ok((k.clone(), Value::from_json(k, v)?)))
            .collect()
    } else {
        parse_toml(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMode {
    /// `Δ` from the two-photon resonance of the dark state at `R`.
    #[default]
    Auto,
    /// `Δ` taken from the `Delta` key.
    Explicit,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    /// Imbalance `N_a(0) / (2 N_b2(0))`.
    pub r: f64,
    pub delta_mode: DeltaMode,
    pub resonance_rule: ResonanceRule,
    /// `Ω/λ` of the dark state used for automatic `Δ`; defaults to `Ω(t_start)`.
    pub delta_ratio: Option<f64>,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub seed: SeedSpec,
    pub trajectories: usize,
    pub integrator: IntegratorOptions,
}

pub const DEFAULT_SAMPLES: usize = 161;
pub const DEFAULT_TRAJECTORIES: usize = 300;

const SCALAR_KEYS: [&str; 25] = [
    "variant",
    "R",
    "delta",
    "Delta_mode",
    "Delta",
    "Delta_ratio",
    "resonance_rule",
    "gamma",
    "omega0",
    "tau",
    "pulse",
    "t_start",
    "t_end",
    "samples",
    "A_b",
    "A_ab",
    "lambda_si",
    "seed",
    "n_total",
    "seed_rule",
    "t_seed",
    "trajectories",
    "tol_rel",
    "tol_abs",
    "max_steps",
];

impl RunConfig {
    /// Default settings of a variant.
    pub fn preset(variant: ReactionVariant) -> Self {
        Self::from_entries(&[("variant".into(), Value::Str(variant.name().into()))])
            .expect("presets are valid")
    }

    /// Builds a configuration from key-value entries; later entries win.
    pub fn from_entries(entries: &[(String, Value)]) -> Result<Self> {
        let mut map: BTreeMap<&str, &Value> = BTreeMap::new();
        let mut chi_entries: Vec<(&str, &Value)> = Vec::new();
        for (k, v) in entries {
            if k.starts_with("chi.") {
                chi_entries.push((k, v));
            } else if SCALAR_KEYS.contains(&k.as_str()) {
                map.insert(k, v);
            } else {
                return Err(Error::config(k.clone(), "unknown key"));
            }
        }
        let num = |key: &str| map.get(key).map(|v| v.as_f64(key)).transpose();

        let variant = match map.get("variant") {
            Some(v) => v.as_str("variant")?.parse()?,
            None => ReactionVariant::BosonicAbstraction,
        };
        let mut params = SystemParams::preset(variant);
        if let Some(d) = num("delta")? {
            params.delta = d;
        }
        if let Some(g) = num("gamma")? {
            params.gamma = g;
        }
        let shape = match map.get("pulse") {
            Some(v) => v.as_str("pulse")?.parse::<PulseShape>()?,
            None => PulseShape::Sech,
        };
        params.pulse = PulseSchedule {
            shape,
            omega0: num("omega0")?.unwrap_or(params.pulse.omega0),
            tau: num("tau")?.unwrap_or(params.pulse.tau),
        };
        if let Some(a) = num("A_b")? {
            params.kinetic.a_b = a;
        }
        if let Some(a) = num("A_ab")? {
            params.kinetic.a_ab = a;
        }
        if let Some(l) = num("lambda_si")? {
            params.lambda_si = Some(l);
        }

        let mut seen: BTreeMap<(usize, usize), (f64, &str)> = BTreeMap::new();
        for (key, v) in chi_entries {
            let (i, j) = chi_indices(variant, key)?;
            let x = v.as_f64(key)?;
            let pair = (i.min(j), i.max(j));
            if let Some(&(prev, prev_key)) = seen.get(&pair) {
                if prev != x && prev_key != key {
                    return Err(Error::config(
                        key,
                        format!("asymmetric collision matrix: {prev_key} = {prev} but {key} = {x}"),
                    ));
                }
            }
            seen.insert(pair, (x, key));
            params.chi.set(i, j, x);
        }

        let delta_mode = match map.get("Delta_mode") {
            Some(v) => match v.as_str("Delta_mode")? {
                "auto" => DeltaMode::Auto,
                "explicit" => DeltaMode::Explicit,
                other => {
                    return Err(Error::config(
                        "Delta_mode",
                        format!("expected auto or explicit, got `{other}`"),
                    ))
                }
            },
            None if map.contains_key("Delta") => DeltaMode::Explicit,
            None => DeltaMode::Auto,
        };
        let resonance_rule = match map.get("resonance_rule") {
            Some(v) => v.as_str("resonance_rule")?.parse()?,
            None => ResonanceRule::default(),
        };
        let tau = params.pulse.tau;
        let t_start = num("t_start")?.unwrap_or(-3.0 * tau);
        let t_end = num("t_end")?.unwrap_or(5.0 * tau);
        let samples = match map.get("samples") {
            Some(v) => v.as_count("samples")? as usize,
            None => DEFAULT_SAMPLES,
        };
        let seed = SeedSpec {
            n_total: num("n_total")?.unwrap_or(SeedSpec::default().n_total),
            rule: match map.get("seed_rule") {
                Some(v) => v.as_str("seed_rule")?.parse::<SeedRule>()?,
                None => SeedRule::default(),
            },
            t_seed: num("t_seed")?.unwrap_or(SeedSpec::default().t_seed),
            master_seed: match map.get("seed") {
                Some(v) => v.as_count("seed")?,
                None => 0,
            },
        };
        let trajectories = match map.get("trajectories") {
            Some(v) => v.as_count("trajectories")? as usize,
            None => DEFAULT_TRAJECTORIES,
        };
        let defaults = IntegratorOptions::default();
        let mut integrator = IntegratorOptions::with_tolerances(
            num("tol_rel")?.unwrap_or(defaults.tol_rel),
            num("tol_abs")?.unwrap_or(defaults.tol_abs),
        );
        if let Some(v) = map.get("max_steps") {
            integrator.max_steps = v.as_count("max_steps")? as usize;
            if integrator.max_steps == 0 {
                return Err(Error::config("max_steps", "step budget must be positive"));
            }
        }

        let mut cfg = RunConfig {
            params,
            r: num("R")?.unwrap_or(0.5),
            delta_mode,
            resonance_rule,
            delta_ratio: num("Delta_ratio")?,
            t_start,
            t_end,
            samples,
            seed,
            trajectories,
            integrator,
        };
        match delta_mode {
            DeltaMode::Explicit => {
                cfg.params.laser_detuning = num("Delta")?
                    .ok_or_else(|| Error::config("Delta", "explicit mode needs a Delta value"))?;
            }
            DeltaMode::Auto => cfg.params.laser_detuning = cfg.auto_delta()?,
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads an optional document and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut entries = match path {
            Some(p) => read_document(p)?,
            None => Vec::new(),
        };
        for o in overrides {
            entries.push(parse_override(o)?);
        }
        Self::from_entries(&entries)
    }

    /// `Ω/λ` at which the dark state fixing automatic `Δ` is evaluated.
    pub fn reference_ratio(&self) -> f64 {
        self.delta_ratio
            .unwrap_or_else(|| self.params.omega(self.t_start) / self.params.lambda)
    }

    fn auto_delta(&self) -> Result<f64> {
        if !(self.r > 0.0) && self.params.variant != ReactionVariant::TrimerFormation {
            return Err(Error::config("R", "imbalance ratio must be positive"));
        }
        Ok(cpt_solution(self.r, self.reference_ratio(), &self.params, self.resonance_rule)
            .map_err(|e| Error::config("Delta", e.to_string()))?
            .delta)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.integrator.validate()?;
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::config("R", "imbalance ratio must be positive and finite"));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::config("t_end", "must exceed t_start"));
        }
        if self.samples < 2 {
            return Err(Error::config("samples", "need at least 2 sample times"));
        }
        if let Some(x) = self.delta_ratio {
            if !(x >= 0.0) {
                return Err(Error::config("Delta_ratio", "must be non-negative"));
            }
        }
        self.seed.validate()?;
        Ok(())
    }

    pub fn time_grid(&self) -> Result<Vec<f64>> {
        time_grid(self.t_start, self.t_end, self.samples)
    }

    pub fn initial_state(&self) -> Result<ModeAmplitudes> {
        initial_state(self.r, self.params.variant)
    }

    /// Every key with its resolved value, sorted by key.
    pub fn entries(&self) -> BTreeMap<String, Value> {
        let p = &self.params;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        put("variant", Value::Str(p.variant.name().into()));
        put("R", Value::Float(self.r));
        put("delta", Value::Float(p.delta));
        put(
            "Delta_mode",
            Value::Str(match self.delta_mode {
                DeltaMode::Auto => "auto".into(),
                DeltaMode::Explicit => "explicit".into(),
            }),
        );
        put("Delta", Value::Float(p.laser_detuning));
        if let Some(x) = self.delta_ratio {
            put("Delta_ratio", Value::Float(x));
        }
        put("resonance_rule", Value::Str(self.resonance_rule.to_string()));
        put("gamma", Value::Float(p.gamma));
        put("omega0", Value::Float(p.pulse.omega0));
        put("tau", Value::Float(p.pulse.tau));
        put("pulse", Value::Str(p.pulse.shape.to_string()));
        put("t_start", Value::Float(self.t_start));
        put("t_end", Value::Float(self.t_end));
        put("samples", Value::Int(self.samples as i64));
        put("A_b", Value::Float(p.kinetic.a_b));
        put("A_ab", Value::Float(p.kinetic.a_ab));
        if let Some(l) = p.lambda_si {
            put("lambda_si", Value::Float(l));
        }
        put("seed", Value::Int(self.seed.master_seed as i64));
        put("n_total", Value::Float(self.seed.n_total));
        put("seed_rule", Value::Str(self.seed.rule.to_string()));
        put("t_seed", Value::Float(self.seed.t_seed));
        put("trajectories", Value::Int(self.trajectories as i64));
        put("tol_rel", Value::Float(self.integrator.tol_rel));
        put("tol_abs", Value::Float(self.integrator.tol_abs));
        put("max_steps", Value::Int(self.integrator.max_steps as i64));
        let labels = p.variant.mode_labels();
        for i in 0..labels.len() {
            for j in i..labels.len() {
                put(
                    &format!("chi.{}.{}", labels[i], labels[j]),
                    Value::Float(p.chi.get(i, j)),
                );
            }
        }
        m
    }

    /// Entries as `(key, value)` pairs ready for [`RunConfig::from_entries`].
    pub fn entry_list(&self) -> Vec<(String, Value)> {
        self.entries().into_iter().collect()
    }

    /// SHA-256 over the canonical `key=value` lines of [`RunConfig::entries`].
    pub fn params_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn chi_indices(variant: ReactionVariant, key: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.len() != 3 {
        return Err(Error::config(key, "collision keys have the form chi.<mode>.<mode>"));
    }
    let idx = |label: &str| {
        variant.mode_index(label).ok_or_else(|| {
            Error::config(
                key,
                format!("unknown mode `{label}` for {variant} (modes: {})", variant.mode_labels().join(", ")),
            )
        })
    };
    Ok((idx(parts[1])?, idx(parts[2])?))
}
