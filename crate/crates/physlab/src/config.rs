//! Flat `key = value` configuration, typed against a per-preset schema.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tier {
    Smoke,
    Desk,
    Full,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Smoke, Tier::Desk, Tier::Full];

    pub fn name(self) -> &'static str {
        match self {
            Tier::Smoke => "smoke",
            Tier::Desk => "desk",
            Tier::Full => "full",
        }
    }

    /// Wall-clock budget on one core, if the tier has one.
    pub fn budget_seconds(self) -> Option<f64> {
        match self {
            Tier::Smoke => Some(600.0),
            Tier::Desk => Some(7200.0),
            Tier::Full => None,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Tier::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("expected one of smoke, desk, full, got `{s}`"))
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    Int {
        min: i64,
    },
    Float {
        positive: bool,
    },
    Ints {
        min: i64,
    },
    Floats,
    Choice(&'static [&'static str]),
    /// `auto` or a positive number.
    Width,
    Bool,
    /// Layer widths joined by dashes, e.g. `128-64-128`.
    Topology,
}

/// Extra range rule on top of the type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rule {
    None,
    Snr,
    Alpha,
    PowerOfTwo,
    Ascending,
}

#[derive(Clone, Debug)]
pub struct Param {
    pub key: &'static str,
    pub doc: &'static str,
    pub kind: Kind,
    pub rule: Rule,
    /// Default per tier: smoke, desk, full.
    pub defaults: [&'static str; 3],
}

impl Param {
    fn new(key: &'static str, kind: Kind, defaults: [&'static str; 3], doc: &'static str) -> Self {
        Param { key, doc, kind, rule: Rule::None, defaults }
    }

    pub fn int(key: &'static str, defaults: [&'static str; 3], doc: &'static str) -> Self {
        Param::new(key, Kind::Int { min: 1 }, defaults, doc)
    }

    pub fn float(key: &'static str, defaults: [&'static str; 3], doc: &'static str) -> Self {
        Param::new(key, Kind::Float { positive: true }, defaults, doc)
    }

    pub fn ints(key: &'static str, defaults: [&'static str; 3], doc: &'static str) -> Self {
        Param::new(key, Kind::Ints { min: 1 }, defaults, doc)
    }

    pub fn snr(defaults: [&'static str; 3]) -> Self {
        Param { rule: Rule::Snr, ..Param::new("snr_db", Kind::Float { positive: false }, defaults, "SNR in dB") }
    }

    pub fn snrs(defaults: [&'static str; 3]) -> Self {
        Param { rule: Rule::Snr, ..Param::new("snr_db", Kind::Floats, defaults, "comma-separated SNRs in dB") }
    }

    pub fn choice(
        key: &'static str,
        options: &'static [&'static str],
        default: &'static str,
        doc: &'static str,
    ) -> Self {
        Param::new(key, Kind::Choice(options), [default; 3], doc)
    }

    pub fn width(default: &'static str) -> Self {
        Param::new("kernel_width", Kind::Width, [default; 3], "Gaussian kernel width, `auto` for the rule of thumb")
    }

    pub fn alpha() -> Self {
        Param { rule: Rule::Alpha, ..Param::float("alpha", ["1.01"; 3], "Rényi entropy order") }
    }

    pub fn boolean(key: &'static str, default: &'static str, doc: &'static str) -> Self {
        Param::new(key, Kind::Bool, [default; 3], doc)
    }

    pub fn topology(defaults: [&'static str; 3], doc: &'static str) -> Self {
        Param::new("topology", Kind::Topology, defaults, doc)
    }

    pub fn with_min(mut self, min: i64) -> Self {
        match &mut self.kind {
            Kind::Int { min: m } | Kind::Ints { min: m } => *m = min,
            _ => panic!("with_min on non-integer parameter {}", self.key),
        }
        self
    }

    pub fn rule(mut self, rule: Rule) -> Self {
        self.rule = rule;
        self
    }

    pub fn default_for(&self, tier: Tier) -> &'static str {
        self.defaults[tier.index()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Ints(Vec<i64>),
    Floats(Vec<f64>),
    Text(String),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |xs: Vec<String>, sep: &str| xs.join(sep);
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => f.write_str(&crate::output::num(*v)),
            Value::Ints(v) => f.write_str(&join(v.iter().map(|x| x.to_string()).collect(), ",")),
            Value::Floats(v) => f.write_str(&join(v.iter().map(|x| crate::output::num(*x)).collect(), ",")),
            Value::Text(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub key: Option<String>,
    pub message: String,
    pub severity: Severity,
}

impl Violation {
    pub fn error(key: Option<&str>, message: impl Into<String>) -> Self {
        Violation { key: key.map(String::from), message: message.into(), severity: Severity::Error }
    }

    pub fn warning(key: Option<&str>, message: impl Into<String>) -> Self {
        Violation { key: key.map(String::from), message: message.into(), severity: Severity::Warning }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.key {
            Some(k) => write!(f, "{tag}: {k}: {}", self.message),
            None => write!(f, "{tag}: {}", self.message),
        }
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, Violation> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Violation::error(None, format!("line {}: expected `key = value`, got `{line}`", no + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Violation::error(None, format!("line {}: empty key", no + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Splits a `--set key=value` argument.
pub fn parse_set(arg: &str) -> Result<(String, String), Violation> {
    match arg.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Violation::error(None, format!("`--set {arg}` is not of the form key=value"))),
    }
}

fn parse_value(p: &Param, raw: &str) -> Result<Value, String> {
    let int = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.fract() == 0.0 && v.abs() < 9e15).map(|v| v as i64);
    let list = |s: &str| s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect::<Vec<_>>();
    match p.kind {
        Kind::Int { min } => {
            let v = int(raw).ok_or_else(|| format!("expected an integer, got `{raw}`"))?;
            if v < min {
                return Err(format!("must be at least {min}, got {v}"));
            }
            Ok(Value::Int(v))
        }
        Kind::Float { positive } => {
            let v: f64 = raw.parse().map_err(|_| format!("expected a number, got `{raw}`"))?;
            if !v.is_finite() || (positive && v <= 0.0) {
                return Err(format!("must be a {}finite number, got {raw}", if positive { "positive " } else { "" }));
            }
            Ok(Value::Float(v))
        }
        Kind::Ints { min } => {
            let items = list(raw);
            if items.is_empty() {
                return Err("expected a comma-separated list of integers".into());
            }
            let mut out = Vec::new();
            for s in items {
                let v = int(&s).ok_or_else(|| format!("expected an integer, got `{s}`"))?;
                if v < min {
                    return Err(format!("entries must be at least {min}, got {v}"));
                }
                out.push(v);
            }
            Ok(Value::Ints(out))
        }
        Kind::Floats => {
            let items = list(raw);
            if items.is_empty() {
                return Err("expected a comma-separated list of numbers".into());
            }
            let mut out = Vec::new();
            for s in items {
                let v: f64 = s.parse().map_err(|_| format!("expected a number, got `{s}`"))?;
                if !v.is_finite() {
                    return Err(format!("entries must be finite, got {s}"));
                }
                out.push(v);
            }
            Ok(Value::Floats(out))
        }
        Kind::Choice(opts) => {
            if opts.contains(&raw) {
                Ok(Value::Text(raw.to_string()))
            } else {
                Err(format!("expected one of {}, got `{raw}`", opts.join(", ")))
            }
        }
        Kind::Width => {
            if raw == "auto" {
                return Ok(Value::Text(raw.into()));
            }
            match raw.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(Value::Float(v)),
                _ => Err(format!("expected `auto` or a positive number, got `{raw}`")),
            }
        }
        Kind::Bool => match raw {
            "true" | "yes" | "1" => Ok(Value::Bool(true)),
            "false" | "no" | "0" => Ok(Value::Bool(false)),
            _ => Err(format!("expected true or false, got `{raw}`")),
        },
        Kind::Topology => {
            let mut out = Vec::new();
            for s in raw.split('-') {
                match s.trim().parse::<i64>() {
                    Ok(v) if v >= 1 => out.push(v),
                    _ => return Err(format!("expected widths joined by `-`, e.g. 128-128-128, got `{raw}`")),
                }
            }
            if out.len() < 2 {
                return Err("a topology needs at least an input and an output width".into());
            }
            Ok(Value::Ints(out))
        }
    }
}

fn check_rule(p: &Param, v: &Value) -> Option<String> {
    let nums: Vec<f64> = match v {
        Value::Int(x) => vec![*x as f64],
        Value::Float(x) => vec![*x],
        Value::Ints(xs) => xs.iter().map(|&x| x as f64).collect(),
        Value::Floats(xs) => xs.clone(),
        _ => Vec::new(),
    };
    match p.rule {
        Rule::None => None,
        Rule::Snr => {
            nums.iter().find(|x| !(-10.0..=40.0).contains(*x)).map(|x| format!("snr_db must lie in [-10, 40], got {x}"))
        }
        Rule::Alpha => nums.iter().find(|&&a| !(a > 0.0) || a == 1.0).map(|a| {
            format!("alpha must be positive and α ≠ 1 (the entropy is undefined at 1; use e.g. 1.01), got {a}")
        }),
        Rule::PowerOfTwo => nums
            .iter()
            .find(|&&m| !(m as u64).is_power_of_two() || m < 2.0)
            .map(|m| format!("M must be a power of 2 for one-hot presets, got {m}")),
        Rule::Ascending => {
            if nums.windows(2).any(|w| w[0] >= w[1]) {
                Some(format!("entries must be strictly ascending, got {v}"))
            } else {
                None
            }
        }
    }
}

/// Schema-checked configuration with every key resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub tier: Tier,
    pub values: BTreeMap<String, Value>,
    /// Keys whose value came from an override rather than the tier default.
    pub overridden: Vec<String>,
}

impl Resolved {
    fn get(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or_else(|| panic!("preset reads undeclared key `{key}`"))
    }

    pub fn int(&self, key: &str) -> i64 {
        match self.get(key) {
            Value::Int(v) => *v,
            v => panic!("`{key}` is not an integer: {v:?}"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        self.int(key) as usize
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.int(key) as u64
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            Value::Int(v) => *v as f64,
            v => panic!("`{key}` is not a number: {v:?}"),
        }
    }

    pub fn floats(&self, key: &str) -> Vec<f64> {
        match self.get(key) {
            Value::Floats(v) => v.clone(),
            Value::Float(v) => vec![*v],
            v => panic!("`{key}` is not a number list: {v:?}"),
        }
    }

    pub fn usizes(&self, key: &str) -> Vec<usize> {
        match self.get(key) {
            Value::Ints(v) => v.iter().map(|&x| x as usize).collect(),
            Value::Int(v) => vec![*v as usize],
            v => panic!("`{key}` is not an integer list: {v:?}"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Text(s) => s,
            v => panic!("`{key}` is not text: {v:?}"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Bool(b) => *b,
            v => panic!("`{key}` is not a flag: {v:?}"),
        }
    }

    /// `None` for `auto`.
    pub fn width(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    /// Every key with its canonical text, for the manifest.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m: BTreeMap<String, String> = self.values.iter().map(|(k, v)| (k.clone(), v.to_string())).collect();
        m.insert("tier".into(), self.tier.to_string());
        m
    }
}

/// Applies overrides on top of the tier defaults. The `tier` key selects the
/// default column and may appear anywhere among the overrides; later
/// occurrences of a key win.
pub fn resolve(schema: &[Param], overrides: &[(String, String)]) -> Result<Resolved, Vec<Violation>> {
    let mut errs = Vec::new();
    let mut tier = Tier::Smoke;
    for (k, v) in overrides.iter().filter(|(k, _)| k == "tier") {
        match v.parse() {
            Ok(t) => tier = t,
            Err(e) => errs.push(Violation::error(Some(k), e)),
        }
    }
    let mut raw: BTreeMap<&str, (&str, bool)> = schema.iter().map(|p| (p.key, (p.default_for(tier), false))).collect();
    for (k, v) in overrides.iter().filter(|(k, _)| k != "tier") {
        match raw.get_mut(k.as_str()) {
            Some(slot) => *slot = (v.as_str(), true),
            None => {
                let keys: Vec<&str> = schema.iter().map(|p| p.key).collect();
                errs.push(Violation::error(
                    Some(k),
                    format!("not a key of this preset; valid keys: tier, {}", keys.join(", ")),
                ));
            }
        }
    }
    let mut values = BTreeMap::new();
    let mut overridden = Vec::new();
    for p in schema {
        let (text, over) = raw[p.key];
        match parse_value(p, text) {
            Ok(v) => {
                if let Some(msg) = check_rule(p, &v) {
                    errs.push(Violation::error(Some(p.key), msg));
                }
                if over {
                    overridden.push(p.key.to_string());
                }
                values.insert(p.key.to_string(), v);
            }
            Err(msg) => errs.push(Violation::error(Some(p.key), msg)),
        }
    }
    if errs.is_empty() {
        Ok(Resolved { tier, values, overridden })
    } else {
        Err(errs)
    }
}
