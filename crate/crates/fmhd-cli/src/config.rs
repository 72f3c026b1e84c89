//! Plain-text run configuration.
//!
//! Syntax: one `key = value` per line, `#` comments, blank lines ignored.
//! The schema is closed per scenario — unknown keys are rejected — and every
//! omitted optional key is filled with its default so the persisted record
//! echoes the complete configuration. In sweep mode a value may be a
//! comma-separated list; the cartesian product over all list-valued keys is
//! executed.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub enum ConfigError {
    Parse { line: usize, msg: String },
    Validation(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            ConfigError::Validation(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Bootstrap,
    SemigroupDecay,
    Simulate,
    Verify,
}

impl Scenario {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bootstrap" => Some(Self::Bootstrap),
            "semigroup-decay" => Some(Self::SemigroupDecay),
            "simulate" => Some(Self::Simulate),
            "verify" => Some(Self::Verify),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bootstrap => "bootstrap",
            Self::SemigroupDecay => "semigroup-decay",
            Self::Simulate => "simulate",
            Self::Verify => "verify",
        }
    }

    /// Closed key schema: `(key, default)`, `None` meaning required.
    fn schema(self) -> &'static [(&'static str, Option<&'static str>)] {
        match self {
            Self::Bootstrap => &[
                ("alpha", None),
                ("beta", None),
                ("gamma", None),
                ("max_steps", Some("200")),
            ],
            Self::SemigroupDecay => &[
                ("kappa", None),
                ("density_exponent", None),
                ("density_scale", Some("1.0")),
                ("lambda_max", Some("1.0")),
                ("t_lo", Some("100.0")),
                ("t_hi", Some("10000.0")),
                ("t_points", Some("40")),
            ],
            Self::Simulate => &[
                ("n_modes", None),
                ("box_length", None),
                ("alpha", None),
                ("beta", None),
                ("mollifier", Some("4")),
                ("dt", None),
                ("horizon", None),
                ("seed", Some("0")),
                ("spectral_slope", Some("-1.0")),
                ("k_cutoff", None),
                ("amplitude", Some("1.0")),
                ("record_stride", Some("1")),
            ],
            Self::Verify => &[("seed", Some("7")), ("n_modes", Some("16"))],
        }
    }
}

/// Fully resolved, validated configuration with defaults echoed.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub params: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn get(&self, key: &str) -> &str {
        self.params
            .get(key)
            .unwrap_or_else(|| panic!("validated config is missing '{key}'"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.get(key).parse().expect("validated numeric value")
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.get(key).parse().expect("validated integer value")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.get(key).parse().expect("validated integer value")
    }

    /// Canonical serialization used for the content-hash run id.
    pub fn canonical(&self) -> String {
        let mut out = format!(
            "schema={}\nscenario={}\n",
            self.schema_version,
            self.scenario.name()
        );
        for (k, v) in &self.params {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}

/// Raw parse: ordered `(key, value, line)` triples.
fn parse_lines(text: &str) -> Result<Vec<(String, String, usize)>, ConfigError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let stripped = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or(ConfigError::Parse {
            line,
            msg: format!("expected 'key = value', got '{stripped}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                msg: "empty key or value".into(),
            });
        }
        if entries.iter().any(|(k, _, _)| k == key) {
            return Err(ConfigError::Parse {
                line,
                msg: format!("duplicate key '{key}'"),
            });
        }
        entries.push((key.to_string(), value.to_string(), line));
    }
    Ok(entries)
}

/// Parse and validate a single-run configuration for the given subcommand.
pub fn parse_config(text: &str, expected: Scenario) -> Result<RunConfig, ConfigError> {
    let configs = parse_config_multi(text, expected, false)?;
    Ok(configs
        .into_iter()
        .next()
        .expect("non-sweep yields one config"))
}

/// Parse a configuration, optionally expanding comma-separated list values
/// into the cartesian product (sweep mode). Every expanded member is
/// validated independently.
pub fn parse_config_multi(
    text: &str,
    expected: Scenario,
    allow_lists: bool,
) -> Result<Vec<RunConfig>, ConfigError> {
    let entries = parse_lines(text)?;
    let mut schema_version = 1u32;
    let mut scenario: Option<(Scenario, usize)> = None;
    let mut assigned: Vec<(String, Vec<String>, usize)> = Vec::new();

    for (key, value, line) in entries {
        match key.as_str() {
            "schema" => {
                schema_version = value.parse().map_err(|_| ConfigError::Parse {
                    line,
                    msg: format!("bad schema version '{value}'"),
                })?;
                if schema_version != 1 {
                    return Err(ConfigError::Validation(format!(
                        "unsupported schema version {schema_version} (this build understands 1)"
                    )));
                }
            }
            "scenario" => {
                let sc = Scenario::parse(&value).ok_or(ConfigError::Parse {
                    line,
                    msg: format!(
                        "unknown scenario '{value}' (expected bootstrap, semigroup-decay, \
                         simulate or verify)"
                    ),
                })?;
                scenario = Some((sc, line));
            }
            _ => {
                let values: Vec<String> = if allow_lists {
                    value.split(',').map(|v| v.trim().to_string()).collect()
                } else {
                    if value.contains(',') {
                        return Err(ConfigError::Parse {
                            line,
                            msg: format!(
                                "list value '{value}' for '{key}' is only allowed in sweep mode"
                            ),
                        });
                    }
                    vec![value]
                };
                if values.iter().any(|v| v.is_empty()) {
                    return Err(ConfigError::Parse {
                        line,
                        msg: format!("empty list element in '{key}'"),
                    });
                }
                assigned.push((key, values, line));
            }
        }
    }

    let (scenario, _) = scenario.ok_or(ConfigError::Validation(
        "missing required key 'scenario'".into(),
    ))?;
    if scenario != expected {
        return Err(ConfigError::Validation(format!(
            "config declares scenario '{}' but the subcommand expects '{}'",
            scenario.name(),
            expected.name()
        )));
    }

    let schema = scenario.schema();
    for (key, _, line) in &assigned {
        if !schema.iter().any(|(k, _)| k == key) {
            return Err(ConfigError::Parse {
                line: *line,
                msg: format!("unknown key '{key}' for scenario '{}'", scenario.name()),
            });
        }
    }

    // Cartesian expansion in declaration order, rightmost fastest.
    let mut combos: Vec<BTreeMap<String, String>> = vec![BTreeMap::new()];
    for (key, values, _) in &assigned {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for base in &combos {
            for v in values {
                let mut m = base.clone();
                m.insert(key.clone(), v.clone());
                next.push(m);
            }
        }
        combos = next;
    }

    let mut configs = Vec::with_capacity(combos.len());
    for mut params in combos {
        for (key, default) in schema {
            if !params.contains_key(*key) {
                match default {
                    Some(d) => {
                        params.insert((*key).to_string(), (*d).to_string());
                    }
                    None => {
                        return Err(ConfigError::Validation(format!(
                            "missing required key '{key}' for scenario '{}'",
                            scenario.name()
                        )))
                    }
                }
            }
        }
        let cfg = RunConfig {
            schema_version,
            scenario,
            params,
        };
        validate_semantics(&cfg)?;
        configs.push(cfg);
    }
    Ok(configs)
}

fn parse_f64(cfg: &RunConfig, key: &str) -> Result<f64, ConfigError> {
    cfg.get(key)
        .parse::<f64>()
        .map_err(|_| ConfigError::Validation(format!("{key} = '{}' is not a number", cfg.get(key))))
}

fn parse_usize(cfg: &RunConfig, key: &str) -> Result<usize, ConfigError> {
    cfg.get(key).parse::<usize>().map_err(|_| {
        ConfigError::Validation(format!(
            "{key} = '{}' is not a nonnegative integer",
            cfg.get(key)
        ))
    })
}

/// Module preconditions checked up front so dispatch cannot hit them.
fn validate_semantics(cfg: &RunConfig) -> Result<(), ConfigError> {
    match cfg.scenario {
        Scenario::Bootstrap => {
            for key in ["alpha", "beta"] {
                let v = parse_f64(cfg, key)?;
                if !(v > 0.75 && v <= 1.0) {
                    return Err(ConfigError::Validation(format!(
                        "{key} = {v} violates 3/4 < {key} <= 1"
                    )));
                }
                fmhd_core::bootstrap::rat_from_decimal(cfg.get(key))
                    .map_err(|e| ConfigError::Validation(format!("{key}: {e}")))?;
            }
            let gamma = parse_f64(cfg, "gamma")?;
            if !(gamma > 0.0 && gamma <= 0.5) {
                return Err(ConfigError::Validation(format!(
                    "gamma = {gamma} violates 0 < gamma <= 1/2"
                )));
            }
            fmhd_core::bootstrap::rat_from_decimal(cfg.get("gamma"))
                .map_err(|e| ConfigError::Validation(format!("gamma: {e}")))?;
            if parse_usize(cfg, "max_steps")? == 0 {
                return Err(ConfigError::Validation("max_steps must be positive".into()));
            }
        }
        Scenario::SemigroupDecay => {
            let kappa = parse_f64(cfg, "kappa")?;
            if !(kappa > 0.0 && kappa <= 1.0) {
                return Err(ConfigError::Validation(format!(
                    "kappa = {kappa} violates 0 < kappa <= 1"
                )));
            }
            let a = parse_f64(cfg, "density_exponent")?;
            if !(a > -1.0) {
                return Err(ConfigError::Validation(format!(
                    "density_exponent = {a} is not integrable near lambda = 0 (needs > -1)"
                )));
            }
            for key in ["density_scale", "lambda_max", "t_lo", "t_hi"] {
                if parse_f64(cfg, key)? <= 0.0 {
                    return Err(ConfigError::Validation(format!("{key} must be positive")));
                }
            }
            if parse_f64(cfg, "t_hi")? <= parse_f64(cfg, "t_lo")? {
                return Err(ConfigError::Validation("t_hi must exceed t_lo".into()));
            }
            if parse_usize(cfg, "t_points")? < 5 {
                return Err(ConfigError::Validation(
                    "t_points must be at least 5 for a slope fit".into(),
                ));
            }
        }
        Scenario::Simulate => {
            let n = parse_usize(cfg, "n_modes")?;
            if n < 4 || n % 2 != 0 {
                return Err(ConfigError::Validation(format!(
                    "n_modes = {n} must be even and at least 4"
                )));
            }
            for key in ["alpha", "beta"] {
                let v = parse_f64(cfg, key)?;
                if !(v > 0.75 && v <= 1.0) {
                    return Err(ConfigError::Validation(format!(
                        "{key} = {v} violates 3/4 < {key} <= 1"
                    )));
                }
            }
            let dt = parse_f64(cfg, "dt")?;
            let horizon = parse_f64(cfg, "horizon")?;
            if !(dt > 0.0 && horizon > dt) {
                return Err(ConfigError::Validation(format!(
                    "need 0 < dt < horizon, got dt = {dt}, horizon = {horizon}"
                )));
            }
            for key in ["box_length", "k_cutoff", "amplitude"] {
                if parse_f64(cfg, key)? <= 0.0 {
                    return Err(ConfigError::Validation(format!("{key} must be positive")));
                }
            }
            if parse_usize(cfg, "mollifier")? == 0 {
                return Err(ConfigError::Validation(
                    "mollifier index must be at least 1".into(),
                ));
            }
            if parse_usize(cfg, "record_stride")? == 0 {
                return Err(ConfigError::Validation(
                    "record_stride must be positive".into(),
                ));
            }
            parse_usize(cfg, "seed")?;
            parse_f64(cfg, "spectral_slope")?;
        }
        Scenario::Verify => {
            parse_usize(cfg, "seed")?;
            let n = parse_usize(cfg, "n_modes")?;
            if n < 4 || n % 2 != 0 {
                return Err(ConfigError::Validation(format!(
                    "n_modes = {n} must be even and at least 4"
                )));
            }
        }
    }
    Ok(())
}
