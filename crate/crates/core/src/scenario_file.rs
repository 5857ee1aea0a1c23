//! The `pdq-scenario v1` text format.
//!
//! ```text
//! pdq-scenario v1
//! # comments start with '#'
//! [system]
//! demand = 1
//! servers = 2
//!
//! [modes]
//! count = 2
//! rates = 0 1          # one line per mode (row of λ)
//! rates = 1 0
//! saturation = 1.2 0.7 # one line per mode (u^i)
//! saturation = 0.2 0.7
//!
//! [policy]
//! family = mode-responsive   # or piecewise-affine, logit
//! psi = 0.9 0.1              # mode-responsive: one line per mode
//! psi = 0.1 0.9
//! # piecewise-affine: theta = <n values>, alpha = <n values> (n lines)
//! # logit: gamma = <n values>, beta = <n values>
//!
//! [simulation]               # optional
//! horizon = 10000
//! sample_dt = 1
//! seeds = 0..20              # integers and half-open ranges a..b
//! initial_mode = 1
//! initial_queue = 0 0
//!
//! [scan]                     # optional; y_* keys optional as a group
//! x = split:1
//! x_range = 0 1
//! x_points = 101
//! y = split:2 split:3
//! y_range = 0 1
//! y_points = 101
//! ```
//!
//! Modes and servers are 1-based in the file. Unknown sections and keys are
//! rejected, and every matrix is checked against `count` and `servers`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::dynamics::{Scenario, ScenarioError};
use crate::mode_chain::{ChainError, ModeChain};
use crate::routing::{PolicyError, PolicySpec};
use crate::stability::{ParamTarget, ScanAxis, ScanSpec};

pub const HEADER: &str = "pdq-scenario v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileErrorKind {
    Parse,
    DimensionMismatch,
    Validation,
}

impl fmt::Display for FileErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FileErrorKind::Parse => "parse error",
            FileErrorKind::DimensionMismatch => "dimension mismatch",
            FileErrorKind::Validation => "validation error",
        })
    }
}

/// An error at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {kind}: {message}")]
pub struct LocatedError {
    pub line: usize,
    pub column: usize,
    pub kind: FileErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ScenarioFileError(pub Vec<LocatedError>);

impl fmt::Display for ScenarioFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl ScenarioFileError {
    pub fn errors(&self) -> &[LocatedError] {
        &self.0
    }

    pub fn first_kind(&self) -> FileErrorKind {
        self.0[0].kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub sample_dt: f64,
    pub seeds: Vec<u64>,
    /// 0-based.
    pub initial_mode: usize,
    pub initial_queue: Vec<f64>,
}

impl SimulationConfig {
    pub fn defaults(servers: usize) -> Self {
        Self {
            horizon: 1e4,
            sample_dt: 1.0,
            seeds: vec![0],
            initial_mode: 0,
            initial_queue: vec![0.0; servers],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub simulation: Option<SimulationConfig>,
    pub scan: Option<ScanSpec>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("system", &["demand", "servers"]),
    ("modes", &["count", "rates", "saturation"]),
    ("policy", &["family", "psi", "theta", "alpha", "gamma", "beta"]),
    (
        "simulation",
        &["horizon", "sample_dt", "seeds", "initial_mode", "initial_queue"],
    ),
    ("scan", &["x", "x_range", "x_points", "y", "y_range", "y_points"]),
];

const REPEATED: &[&str] = &["rates", "saturation", "psi", "alpha"];

#[derive(Debug, Clone)]
struct Token<'a> {
    col: usize,
    text: &'a str,
}

#[derive(Debug, Clone)]
struct Entry<'a> {
    line: usize,
    key_col: usize,
    tokens: Vec<Token<'a>>,
}

#[derive(Debug, Default)]
struct Section<'a> {
    line: usize,
    entries: BTreeMap<&'static str, Vec<Entry<'a>>>,
}

fn err(line: usize, column: usize, kind: FileErrorKind, message: impl Into<String>) -> LocatedError {
    LocatedError {
        line,
        column,
        kind,
        message: message.into(),
    }
}

fn tokenize(value: &str, offset: usize) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in value.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    col: offset + s,
                    text: &value[s..i],
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            col: offset + s,
            text: &value[s..],
        });
    }
    out
}

/// Splits the document into sections and `key = value` entries, rejecting
/// unknown names and duplicates.
fn lex(text: &str) -> Result<BTreeMap<&'static str, Section<'_>>, Vec<LocatedError>> {
    use FileErrorKind::Parse;
    let mut errors = Vec::new();
    let mut sections: BTreeMap<&'static str, Section<'_>> = BTreeMap::new();
    let mut current: Option<&'static str> = None;
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if !saw_header {
            saw_header = true;
            if trimmed != HEADER {
                errors.push(err(line, indent + 1, Parse, format!("expected header `{HEADER}`")));
                return Err(errors);
            }
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                errors.push(err(line, indent + 1, Parse, "unterminated section header"));
                continue;
            };
            let name = name.trim();
            match SECTIONS.iter().find(|(s, _)| *s == name) {
                Some((s, _)) if sections.contains_key(s) => {
                    errors.push(err(line, indent + 1, Parse, format!("duplicate section [{s}]")));
                    current = None;
                }
                Some((s, _)) => {
                    sections.insert(
                        s,
                        Section {
                            line,
                            ..Section::default()
                        },
                    );
                    current = Some(s);
                }
                None => {
                    errors.push(err(line, indent + 1, Parse, format!("unknown section [{name}]")));
                    current = None;
                }
            }
            continue;
        }
        let Some(eq) = content.find('=') else {
            errors.push(err(line, indent + 1, Parse, "expected `key = value`"));
            continue;
        };
        let key = content[..eq].trim();
        let Some(sec_name) = current else {
            errors.push(err(line, indent + 1, Parse, format!("key `{key}` outside a known section")));
            continue;
        };
        let allowed = SECTIONS.iter().find(|(s, _)| *s == sec_name).unwrap().1;
        let Some(&key) = allowed.iter().find(|k| **k == key) else {
            errors.push(err(
                line,
                indent + 1,
                Parse,
                format!("unknown key `{key}` in [{sec_name}]"),
            ));
            continue;
        };
        let tokens = tokenize(&content[eq + 1..], eq + 2);
        if tokens.is_empty() {
            errors.push(err(line, eq + 2, Parse, format!("`{key}` has no value")));
            continue;
        }
        let section = sections.get_mut(sec_name).unwrap();
        let list = section.entries.entry(key).or_default();
        if !list.is_empty() && !REPEATED.contains(&key) {
            errors.push(err(line, indent + 1, Parse, format!("duplicate key `{key}`")));
            continue;
        }
        list.push(Entry {
            line,
            key_col: indent + 1,
            tokens,
        });
    }
    if !saw_header {
        errors.push(err(1, 1, Parse, format!("expected header `{HEADER}`")));
    }
    if errors.is_empty() {
        Ok(sections)
    } else {
        Err(errors)
    }
}

struct Builder<'a> {
    sections: BTreeMap<&'static str, Section<'a>>,
    errors: Vec<LocatedError>,
}

impl<'a> Builder<'a> {
    fn section(&self, name: &str) -> Option<&Section<'a>> {
        self.sections.get(name)
    }

    fn require_section(&mut self, name: &str) -> Option<usize> {
        match self.sections.get(name) {
            Some(s) => Some(s.line),
            None => {
                self.errors
                    .push(err(1, 1, FileErrorKind::Parse, format!("missing section [{name}]")));
                None
            }
        }
    }

    fn entries(&self, sec: &str, key: &str) -> Vec<Entry<'a>> {
        self.section(sec)
            .and_then(|s| s.entries.get(key))
            .cloned()
            .unwrap_or_default()
    }

    fn single(&mut self, sec: &str, key: &str, required: bool) -> Option<Entry<'a>> {
        let e = self.entries(sec, key).into_iter().next();
        if e.is_none() && required {
            let line = self.section(sec).map_or(1, |s| s.line);
            self.errors.push(err(
                line,
                1,
                FileErrorKind::Parse,
                format!("missing key `{key}` in [{sec}]"),
            ));
        }
        e
    }

    fn number(&mut self, tok: &Token<'_>) -> Option<f64> {
        match tok.text.parse::<f64>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(err(
                    0,
                    tok.col,
                    FileErrorKind::Parse,
                    format!("`{}` is not a number", tok.text),
                ));
                None
            }
        }
    }

    fn numbers(&mut self, e: &Entry<'_>) -> Option<Vec<f64>> {
        let before = self.errors.len();
        let vals: Vec<f64> = e.tokens.iter().filter_map(|t| self.number(t)).collect();
        for x in &mut self.errors[before..] {
            x.line = e.line;
        }
        (self.errors.len() == before).then_some(vals)
    }

    fn scalar(&mut self, e: &Entry<'_>) -> Option<f64> {
        if e.tokens.len() != 1 {
            self.errors.push(err(e.line, e.tokens[1].col, FileErrorKind::Parse, "expected one value"));
            return None;
        }
        self.numbers(e).map(|v| v[0])
    }

    fn integer(&mut self, e: &Entry<'_>) -> Option<usize> {
        if e.tokens.len() != 1 {
            self.errors.push(err(e.line, e.tokens[1].col, FileErrorKind::Parse, "expected one value"));
            return None;
        }
        match e.tokens[0].text.parse::<usize>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(err(
                    e.line,
                    e.tokens[0].col,
                    FileErrorKind::Parse,
                    format!("`{}` is not a non-negative integer", e.tokens[0].text),
                ));
                None
            }
        }
    }

    /// A vector of exactly `len` numbers.
    fn vector(&mut self, e: &Entry<'_>, len: usize, what: &str) -> Option<Vec<f64>> {
        let v = self.numbers(e)?;
        if v.len() != len {
            self.errors.push(err(
                e.line,
                e.key_col,
                FileErrorKind::DimensionMismatch,
                format!("{what} has {} entries, expected {len}", v.len()),
            ));
            return None;
        }
        Some(v)
    }

    /// `rows` lines of `cols` numbers each.
    fn matrix(&mut self, sec: &str, key: &str, rows: usize, cols: usize) -> Option<(Vec<Vec<f64>>, Vec<Entry<'a>>)> {
        let entries = self.entries(sec, key);
        if entries.len() != rows {
            let line = entries
                .get(rows)
                .or(entries.last())
                .map_or_else(|| self.section(sec).map_or(1, |s| s.line), |e| e.line);
            self.errors.push(err(
                line,
                1,
                FileErrorKind::DimensionMismatch,
                format!("[{sec}] has {} `{key}` rows, expected {rows}", entries.len()),
            ));
            return None;
        }
        let mut out = Vec::with_capacity(rows);
        let mut ok = true;
        for (i, e) in entries.iter().enumerate() {
            match self.vector(e, cols, &format!("{key} row {}", i + 1)) {
                Some(v) => out.push(v),
                None => ok = false,
            }
        }
        ok.then_some((out, entries))
    }

    fn reject_keys(&mut self, sec: &str, keys: &[&str], family: &str) {
        for key in keys {
            if let Some(e) = self.entries(sec, key).first() {
                self.errors.push(err(
                    e.line,
                    e.key_col,
                    FileErrorKind::Parse,
                    format!("key `{key}` is not used by family {family}"),
                ));
            }
        }
    }

    fn policy(&mut self, m: usize, n: usize) -> Option<PolicySpec> {
        let family = self.single("policy", "family", true)?;
        if family.tokens.len() != 1 {
            self.errors.push(err(family.line, family.tokens[1].col, FileErrorKind::Parse, "expected one family name"));
            return None;
        }
        match family.tokens[0].text {
            "mode-responsive" => {
                self.reject_keys("policy", &["theta", "alpha", "gamma", "beta"], "mode-responsive");
                let (psi, _) = self.matrix("policy", "psi", m, n)?;
                Some(PolicySpec::ModeResponsive { psi })
            }
            "piecewise-affine" => {
                self.reject_keys("policy", &["psi", "gamma", "beta"], "piecewise-affine");
                let theta = self.single("policy", "theta", true)?;
                let theta = self.vector(&theta, n, "theta")?;
                let (alpha, _) = self.matrix("policy", "alpha", n, n)?;
                Some(PolicySpec::PiecewiseAffine { theta, alpha })
            }
            "logit" => {
                self.reject_keys("policy", &["psi", "theta", "alpha"], "logit");
                let gamma = self.single("policy", "gamma", true);
                let beta = self.single("policy", "beta", true);
                let gamma = self.vector(&gamma?, n, "gamma");
                let beta = self.vector(&beta?, n, "beta");
                Some(PolicySpec::Logit {
                    gamma: gamma?,
                    beta: beta?,
                })
            }
            other => {
                self.errors.push(err(
                    family.line,
                    family.tokens[0].col,
                    FileErrorKind::Parse,
                    format!("unknown policy family `{other}`"),
                ));
                None
            }
        }
    }

    fn seeds(&mut self, e: &Entry<'_>) -> Option<Vec<u64>> {
        let mut seeds = Vec::new();
        for t in &e.tokens {
            let bad = |this: &mut Self| {
                this.errors.push(err(
                    e.line,
                    t.col,
                    FileErrorKind::Parse,
                    format!("`{}` is not a seed or seed range a..b", t.text),
                ));
            };
            if let Some((a, b)) = t.text.split_once("..") {
                match (a.parse::<u64>(), b.parse::<u64>()) {
                    (Ok(a), Ok(b)) if a < b => seeds.extend(a..b),
                    _ => {
                        bad(self);
                        return None;
                    }
                }
            } else if let Ok(s) = t.text.parse::<u64>() {
                seeds.push(s);
            } else {
                bad(self);
                return None;
            }
        }
        Some(seeds)
    }

    fn simulation(&mut self, m: usize, n: usize) -> Option<SimulationConfig> {
        let mut cfg = SimulationConfig::defaults(n);
        let before = self.errors.len();
        let invalid = |e: &Entry<'_>, msg: String| err(e.line, e.tokens[0].col, FileErrorKind::Validation, msg);
        if let Some(e) = self.single("simulation", "horizon", false) {
            if let Some(h) = self.scalar(&e) {
                if !(h > 0.0 && h.is_finite()) {
                    self.errors.push(invalid(&e, format!("horizon must be positive, got {h}")));
                }
                cfg.horizon = h;
            }
        }
        if let Some(e) = self.single("simulation", "sample_dt", false) {
            if let Some(h) = self.scalar(&e) {
                if !(h > 0.0 && h.is_finite()) {
                    self.errors.push(invalid(&e, format!("sample_dt must be positive, got {h}")));
                }
                cfg.sample_dt = h;
            }
        }
        if let Some(e) = self.single("simulation", "seeds", false) {
            if let Some(s) = self.seeds(&e) {
                cfg.seeds = s;
            }
        }
        if let Some(e) = self.single("simulation", "initial_mode", false) {
            if let Some(i) = self.integer(&e) {
                if i == 0 || i > m {
                    self.errors.push(invalid(&e, format!("initial_mode must be in 1..={m}, got {i}")));
                }
                cfg.initial_mode = i.saturating_sub(1);
            }
        }
        if let Some(e) = self.single("simulation", "initial_queue", false) {
            if let Some(q) = self.vector(&e, n, "initial_queue") {
                if let Some(x) = q.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                    self.errors.push(invalid(&e, format!("initial_queue entry {x} is not a finite non-negative number")));
                }
                cfg.initial_queue = q;
            }
        }
        (self.errors.len() == before).then_some(cfg)
    }

    fn axis(&mut self, prefix: &str, policy: &PolicySpec, demand: f64) -> Option<ScanAxis> {
        let key = |s: &str| format!("{prefix}{s}");
        let targets = self.single("scan", &key(""), true);
        let range = self.single("scan", &key("_range"), true);
        let points = self.single("scan", &key("_points"), true);
        let (targets_e, range_e, points_e) = (targets?, range?, points?);
        let mut targets = Vec::new();
        for t in &targets_e.tokens {
            match t.text.parse::<ParamTarget>() {
                Ok(p) => {
                    let mut probe = policy.clone();
                    if let Err(e) = p.apply(&mut probe, demand, 0.0) {
                        self.errors.push(err(targets_e.line, t.col, FileErrorKind::Validation, e.to_string()));
                    }
                    targets.push(p);
                }
                Err(e) => self.errors.push(err(targets_e.line, t.col, FileErrorKind::Parse, e.to_string())),
            }
        }
        let range = self.vector(&range_e, 2, &key("_range"))?;
        let points = self.integer(&points_e)?;
        match ScanAxis::new(targets, range[0], range[1], points) {
            Ok(axis) => Some(axis),
            Err(e) => {
                self.errors.push(err(range_e.line, range_e.key_col, FileErrorKind::Validation, e.to_string()));
                None
            }
        }
    }

    fn scan(&mut self, policy: &PolicySpec, demand: f64) -> Option<ScanSpec> {
        let x = self.axis("x", policy, demand);
        let has_y = ["y", "y_range", "y_points"]
            .iter()
            .any(|k| !self.entries("scan", k).is_empty());
        let y = if has_y {
            Some(self.axis("y", policy, demand)?)
        } else {
            None
        };
        Some(ScanSpec { x: x?, y })
    }
}

fn chain_error_location(e: &ChainError, rows: &[Entry<'_>]) -> (usize, usize) {
    let at = |row: usize, col: usize| {
        rows.get(row)
            .map_or((rows[0].line, 1), |e| (e.line, e.tokens.get(col).map_or(e.key_col, |t| t.col)))
    };
    match *e {
        ChainError::NegativeRate { from, to, .. } => at(from, to),
        ChainError::SelfLoop { mode, .. } => at(mode, mode),
        _ => (rows[0].line, rows[0].key_col),
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioFileError> {
    let sections = lex(text).map_err(ScenarioFileError)?;
    let mut b = Builder {
        sections,
        errors: Vec::new(),
    };
    let fail = |b: Builder<'_>| ScenarioFileError(b.errors);

    let sys_line = b.require_section("system");
    let modes_line = b.require_section("modes");
    let policy_line = b.require_section("policy");
    let (Some(_), Some(_), Some(policy_line)) = (sys_line, modes_line, policy_line) else {
        return Err(fail(b));
    };

    let demand_e = b.single("system", "demand", true);
    let servers_e = b.single("system", "servers", true);
    let count_e = b.single("modes", "count", true);
    let demand = demand_e.as_ref().and_then(|e| b.scalar(e));
    let n = servers_e.as_ref().and_then(|e| b.integer(e));
    let m = count_e.as_ref().and_then(|e| b.integer(e));
    let (Some(demand), Some(n), Some(m)) = (demand, n, m) else {
        return Err(fail(b));
    };
    if n == 0 || m == 0 {
        let e = if n == 0 { servers_e.unwrap() } else { count_e.unwrap() };
        b.errors.push(err(e.line, e.tokens[0].col, FileErrorKind::Validation, "must be at least 1"));
        return Err(fail(b));
    }

    let rates = b.matrix("modes", "rates", m, m);
    let saturation = b.matrix("modes", "saturation", m, n);
    let policy = b.policy(m, n);
    let (Some((rates, rate_rows)), Some((saturation, sat_rows)), Some(policy)) = (rates, saturation, policy) else {
        return Err(fail(b));
    };

    let chain = match ModeChain::from_rows(&rates) {
        Ok(c) => c,
        Err(e) => {
            let (line, column) = chain_error_location(&e, &rate_rows);
            b.errors.push(err(line, column, FileErrorKind::Validation, e.to_string()));
            return Err(fail(b));
        }
    };
    let scenario = match Scenario::new(demand, saturation, chain, policy) {
        Ok(s) => s,
        Err(e) => {
            let (line, column) = match &e {
                ScenarioError::InvalidDemand(_) => {
                    let d = demand_e.unwrap();
                    (d.line, d.tokens[0].col)
                }
                ScenarioError::NonPositiveSaturation { mode, server, .. } => {
                    let row = &sat_rows[*mode];
                    (row.line, row.tokens[*server].col)
                }
                ScenarioError::DuplicateSaturation { second, .. } => {
                    (sat_rows[*second].line, sat_rows[*second].key_col)
                }
                _ => (policy_line, 1),
            };
            b.errors.push(err(line, column, FileErrorKind::Validation, e.to_string()));
            return Err(fail(b));
        }
    };

    let simulation = if b.section("simulation").is_some() {
        b.simulation(m, n)
    } else {
        None
    };
    let scan = if b.section("scan").is_some() {
        b.scan(scenario.policy(), demand)
    } else {
        None
    };
    if !b.errors.is_empty() {
        return Err(fail(b));
    }
    Ok(ScenarioFile {
        scenario,
        simulation,
        scan,
    })
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn seeds_text(seeds: &[u64]) -> String {
    let contiguous = seeds.len() > 2 && seeds.windows(2).all(|w| w[1] == w[0] + 1);
    if contiguous {
        format!("{}..{}", seeds[0], seeds[seeds.len() - 1] + 1)
    } else {
        seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    }
}

fn axis_text(out: &mut String, prefix: &str, axis: &ScanAxis) {
    let targets: Vec<String> = axis.targets.iter().map(|t| t.to_string()).collect();
    let _ = writeln!(out, "{prefix} = {}", targets.join(" "));
    let _ = writeln!(out, "{prefix}_range = {} {}", axis.lo, axis.hi);
    let _ = writeln!(out, "{prefix}_points = {}", axis.points);
}

/// Canonical text for `file`. Custom policies have no textual form.
pub fn serialize_scenario(file: &ScenarioFile) -> Result<String, PolicyError> {
    let scn = &file.scenario;
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "\n[system]");
    let _ = writeln!(out, "demand = {}", scn.demand());
    let _ = writeln!(out, "servers = {}", scn.servers());
    let _ = writeln!(out, "\n[modes]");
    let _ = writeln!(out, "count = {}", scn.modes());
    for row in scn.chain().rows() {
        let _ = writeln!(out, "rates = {}", join(&row));
    }
    for row in scn.saturation_rows() {
        let _ = writeln!(out, "saturation = {}", join(row));
    }
    let _ = writeln!(out, "\n[policy]");
    let _ = writeln!(out, "family = {}", scn.policy().family());
    match scn.policy() {
        PolicySpec::ModeResponsive { psi } => {
            for row in psi {
                let _ = writeln!(out, "psi = {}", join(row));
            }
        }
        PolicySpec::PiecewiseAffine { theta, alpha } => {
            let _ = writeln!(out, "theta = {}", join(theta));
            for row in alpha {
                let _ = writeln!(out, "alpha = {}", join(row));
            }
        }
        PolicySpec::Logit { gamma, beta } => {
            let _ = writeln!(out, "gamma = {}", join(gamma));
            let _ = writeln!(out, "beta = {}", join(beta));
        }
        PolicySpec::Custom(c) => return Err(PolicyError::UnsupportedPolicy(c.name().to_string())),
    }
    if let Some(sim) = &file.simulation {
        let _ = writeln!(out, "\n[simulation]");
        let _ = writeln!(out, "horizon = {}", sim.horizon);
        let _ = writeln!(out, "sample_dt = {}", sim.sample_dt);
        let _ = writeln!(out, "seeds = {}", seeds_text(&sim.seeds));
        let _ = writeln!(out, "initial_mode = {}", sim.initial_mode + 1);
        let _ = writeln!(out, "initial_queue = {}", join(&sim.initial_queue));
    }
    if let Some(scan) = &file.scan {
        let _ = writeln!(out, "\n[scan]");
        axis_text(&mut out, "x", &scan.x);
        if let Some(y) = &scan.y {
            axis_text(&mut out, "y", y);
        }
    }
    Ok(out)
}
