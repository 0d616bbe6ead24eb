//! Configuration, orchestration and JSON reports for the `factorlab` binary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use factorlab_core::coinvariants::{
    factorization_report, general_factorization_smoke, reduce_trig, weyl_tensor, CoinvReport, SmokeReport,
};
use factorlab_core::cyclofield::{parse_cyc, CycNum, Rational, MAX_ORDER};
use factorlab_core::error::Error;
use factorlab_core::liealg::{Representation, SlN, Weight};
use factorlab_core::modules::ModVector;
use factorlab_core::properties::{run_suites, SuiteResult};
use factorlab_core::sections::{Geometry, DEFAULT_POLE_LIMIT};

pub const DEFAULT_MAX_DEPTH: u32 = 6;
pub const DEFAULT_SEED: u64 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Factorize,
    Properties,
    Smoke,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RunMode::Factorize => "factorize",
            RunMode::Properties => "properties",
            RunMode::Smoke => "smoke",
        };
        f.write_str(s)
    }
}

#[derive(Parser, Debug, Clone)]
#[command(name = "factorlab", version, about = "Exact factorization checks for twisted WZW coinvariants")]
pub struct Cli {
    pub mode: RunMode,
    #[arg(long)]
    pub n: Option<usize>,
    /// Level k, as `p/q`.
    #[arg(long)]
    pub level: Option<String>,
    /// Comma-separated marked points, e.g. `1,2` or `e(1),1/2`.
    #[arg(long)]
    pub points: Option<String>,
    /// Comma-separated modules per point: `def`, `dual`, `triv`, joined by `*` for tensors.
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit timings so that reports are byte-identical across runs.
    #[arg(long)]
    pub deterministic: bool,
    /// Seed for the randomized property suites.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat JSON file with the same fields; its values override flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Raw configuration fields as they appear on the command line or in a file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub mode: Option<RunMode>,
    pub n: Option<usize>,
    pub level: Option<String>,
    pub points: Option<ListField>,
    pub reps: Option<ListField>,
    pub max_depth: Option<u32>,
    pub out: Option<PathBuf>,
    pub deterministic: Option<bool>,
    pub seed: Option<u64>,
}

/// A list given either as a JSON array or as one comma-separated string.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ListField {
    Items(Vec<String>),
    Joined(String),
}

impl ListField {
    fn items(&self) -> Vec<String> {
        match self {
            ListField::Items(v) => v.clone(),
            ListField::Joined(s) => split_list(s),
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()
}

impl RawConfig {
    pub fn from_cli(cli: &Cli) -> Self {
        RawConfig {
            mode: Some(cli.mode),
            n: cli.n,
            level: cli.level.clone(),
            points: cli.points.clone().map(ListField::Joined),
            reps: cli.reps.clone().map(ListField::Joined),
            max_depth: cli.max_depth,
            out: cli.out.clone(),
            deterministic: Some(cli.deterministic).filter(|d| *d),
            seed: cli.seed,
        }
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overridden_by(mut self, other: RawConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$( if other.$f.is_some() { self.$f = other.$f; } )*};
        }
        take!(mode, n, level, points, reps, max_depth, out, deterministic, seed);
        self
    }
}

/// A validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: RunMode,
    pub n: usize,
    pub level: Rational,
    pub points: Vec<CycNum>,
    pub point_text: Vec<String>,
    pub reps: Vec<Representation>,
    pub rep_text: Vec<String>,
    pub max_depth: u32,
    pub out: Option<PathBuf>,
    pub deterministic: bool,
    pub seed: u64,
}

/// Every violated requirement of a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn parse_rep(sl: SlN, text: &str) -> Result<Representation, String> {
    let mut acc: Option<Representation> = None;
    for factor in text.split('*') {
        let r = match factor.trim() {
            "def" => Representation::defining(sl),
            "dual" => Representation::defining(sl).dual(),
            "triv" => Representation::trivial(sl),
            other => return Err(format!("unknown module {other:?} in {text:?} (expected def, dual or triv)")),
        };
        acc = Some(match acc {
            None => r,
            Some(a) => a.tensor(&r),
        });
    }
    acc.ok_or_else(|| format!("empty module expression {text:?}"))
}

/// Validates a raw configuration, collecting every violation.
pub fn parse_config(raw: &RawConfig) -> Result<RunConfig, ConfigErrors> {
    let mut errs = Vec::new();
    let mode = raw.mode.unwrap_or_else(|| {
        errs.push("mode is missing".into());
        RunMode::Factorize
    });
    let n = match raw.n {
        None => {
            errs.push("--n is missing".into());
            None
        }
        Some(n) if !(2..=MAX_ORDER).contains(&n) => {
            errs.push(format!("N = {n} is outside 2..={MAX_ORDER}"));
            None
        }
        Some(n) => Some(n),
    };
    let level = match Rational::from_str(raw.level.as_deref().unwrap_or("1").trim()) {
        Ok(q) => Some(q),
        Err(_) => {
            errs.push(format!("level {:?} is not a rational p/q", raw.level.as_deref().unwrap_or("")));
            None
        }
    };
    let max_depth = raw.max_depth.unwrap_or(DEFAULT_MAX_DEPTH);
    if max_depth == 0 {
        errs.push("max_depth must be at least 1".into());
    }
    let point_text = raw.points.as_ref().map(ListField::items).unwrap_or_default();
    let rep_text = raw.reps.as_ref().map(ListField::items).unwrap_or_default();
    let needs_points = mode != RunMode::Properties;
    if needs_points && point_text.is_empty() {
        errs.push("--points is missing or empty".into());
    }
    if needs_points && rep_text.len() != point_text.len() {
        errs.push(format!(
            "{} module(s) given for {} point(s); --reps must list one per point",
            rep_text.len(),
            point_text.len()
        ));
    }
    let mut points = Vec::new();
    let mut reps = Vec::new();
    if let Some(n) = n {
        let sl = SlN::new(n).expect("N validated");
        let field = sl.field();
        let mut parsed: Vec<Option<CycNum>> = Vec::new();
        for (i, t) in point_text.iter().enumerate() {
            match parse_cyc(field, t) {
                Ok(c) if c.is_zero() => {
                    errs.push(format!("point {} ({t}) is zero", i + 1));
                    parsed.push(None);
                }
                Ok(c) => parsed.push(Some(c)),
                Err(e) => {
                    errs.push(format!("point {} ({t}): {e}", i + 1));
                    parsed.push(None);
                }
            }
        }
        let powers: Vec<Option<CycNum>> = parsed
            .iter()
            .map(|p| p.as_ref().map(|c| c.pow(n as i64).expect("nonzero power")))
            .collect();
        for i in 0..powers.len() {
            for j in i + 1..powers.len() {
                if let (Some(a), Some(b)) = (&powers[i], &powers[j]) {
                    if a == b {
                        errs.push(format!(
                            "points {} and {} ({} and {}) lie in the same C_{n}-orbit",
                            i + 1,
                            j + 1,
                            point_text[i],
                            point_text[j]
                        ));
                    }
                }
            }
        }
        points = parsed.into_iter().flatten().collect();
        for t in &rep_text {
            match parse_rep(sl, t) {
                Ok(r) => reps.push(r),
                Err(e) => errs.push(e),
            }
        }
    }
    if !errs.is_empty() {
        return Err(ConfigErrors(errs));
    }
    Ok(RunConfig {
        mode,
        n: n.expect("validated"),
        level: level.expect("validated"),
        points,
        point_text,
        reps,
        rep_text,
        max_depth,
        out: raw.out.clone(),
        deterministic: raw.deterministic.unwrap_or(false),
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
    })
}

/// Merges flags with an optional config file and validates the result.
pub fn load_config(cli: &Cli) -> Result<RunConfig, ConfigErrors> {
    let mut raw = RawConfig::from_cli(cli);
    if let Some(path) = &cli.config {
        raw = raw.overridden_by(read_config_file(path)?);
    }
    parse_config(&raw)
}

pub fn read_config_file(path: &Path) -> Result<RawConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
    serde_json::from_str(&text).map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))
}

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success = 0,
    VerdictFalse = 1,
    InvalidConfig = 2,
    FuelExhausted = 3,
}

impl Outcome {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::FuelExhausted(_) => Outcome::FuelExhausted,
            _ => Outcome::InvalidConfig,
        }
    }
}

/// A finished run: the JSON report, the exit outcome and an optional text table.
#[derive(Clone, Debug)]
pub struct Report {
    pub json: Value,
    pub outcome: Outcome,
    pub table: Option<String>,
}

fn weight_json(w: &Weight) -> Value {
    Value::Array(w.values.iter().map(|c| Value::String(c.to_string())).collect())
}

fn config_json(cfg: &RunConfig) -> Value {
    json!({
        "mode": cfg.mode.to_string(),
        "n": cfg.n,
        "level": cfg.level.to_string(),
        "points": cfg.point_text,
        "reps": cfg.rep_text,
        "max_depth": cfg.max_depth,
        "seed": cfg.seed,
    })
}

fn geometry(cfg: &RunConfig) -> Result<Arc<Geometry>, Error> {
    let sl = SlN::new(cfg.n)?;
    Geometry::with_pole_limit(sl, cfg.points.clone(), cfg.max_depth.max(DEFAULT_POLE_LIMIT))
}

/// Reduction traces for the depth-one states on the first generator.
fn trace_digest(cfg: &RunConfig, geom: &Arc<Geometry>) -> Result<Value, Error> {
    let module = weyl_tensor(geom, &cfg.reps, &cfg.level, cfg.max_depth)?;
    let one = geom.field().one();
    let mut samples = Vec::new();
    let mut all_decrease = true;
    let mut steps = 0;
    let mut fuel = 0;
    for st in module.states_of_depth(1).into_iter().filter(|s| s.gen == 0) {
        let v = ModVector::from_state(st, one.clone());
        let t = reduce_trig(&module, &v)?;
        all_decrease &= t.depth_decreases();
        steps += t.steps.len();
        fuel += t.fuel;
        samples.push(json!({
            "input": v.to_string(),
            "steps": t.steps.iter().map(|s| json!({
                "site": s.site.to_string(),
                "section": s.section,
                "depth_before": s.depth_before,
                "depth_after": s.depth_after,
            })).collect::<Vec<_>>(),
            "representative": t.output.iter().map(ToString::to_string).collect::<Vec<_>>(),
        }));
    }
    Ok(json!({
        "count": samples.len(),
        "steps": steps,
        "fuel": fuel,
        "depth_decreasing": all_decrease,
        "samples": samples,
    }))
}

fn factorize_json(r: &CoinvReport) -> Value {
    json!({
        "dim_trig": r.dim_trig,
        "trig": {
            "rank": r.trig.rank,
            "relations": r.trig.relations,
            "window": r.trig.window,
            "basis": r.trig.basis,
        },
        "components": r.components.iter().map(|c| json!({
            "weight": weight_json(&c.weight),
            "dim": c.dim,
            "raw_dim": c.raw_dim,
            "multiplicity": c.multiplicity,
        })).collect::<Vec<_>>(),
        "component_sum": r.components.iter().map(|c| c.dim).sum::<usize>(),
        "verdict": r.verdict,
        "multiplicities_match": r.multiplicities_match,
        "fuel": { "trig": r.trig.fuel, "total": r.fuel },
    })
}

fn smoke_json(r: &SmokeReport) -> Value {
    json!({
        "dim_trig": r.dim_trig,
        "weights": r.weights.iter().map(weight_json).collect::<Vec<_>>(),
        "blocks": r.blocks,
        "raw_blocks": r.raw_blocks,
        "total": r.total,
        "off_diagonal_killed": r.off_diagonal_killed,
        "verdict": r.verdict,
    })
}

/// Fixed-width per-suite table.
pub fn suite_table(results: &[SuiteResult]) -> String {
    let mut out = format!("{:<20} {:>9} {:>10}  status\n", "suite", "checks", "violations");
    for r in results {
        out.push_str(&format!(
            "{:<20} {:>9} {:>10}  {}\n",
            r.name,
            r.checks,
            r.violations.len(),
            if r.passed() { "PASS" } else { "FAIL" }
        ));
    }
    out
}

/// Runs the configured mode.
pub fn run_check(cfg: &RunConfig) -> Result<Report, Error> {
    let start = Instant::now();
    let mut json = json!({ "config": config_json(cfg) });
    let mut table = None;
    let verdict = match cfg.mode {
        RunMode::Factorize => {
            let geom = geometry(cfg)?;
            let r = factorization_report(&geom, &cfg.reps, &cfg.level, cfg.max_depth)?;
            merge(&mut json, factorize_json(&r));
            json["traces"] = trace_digest(cfg, &geom)?;
            r.verdict && r.multiplicities_match && json["traces"]["depth_decreasing"] == Value::Bool(true)
        }
        RunMode::Smoke => {
            let geom = geometry(cfg)?;
            let r = general_factorization_smoke(&geom, &cfg.reps, &cfg.level, cfg.max_depth, None)?;
            merge(&mut json, smoke_json(&r));
            r.verdict
        }
        RunMode::Properties => {
            let results = run_suites(cfg.n, cfg.seed)?;
            let ok = results.iter().all(SuiteResult::passed);
            json["suites"] = results
                .iter()
                .map(|r| {
                    json!({
                        "name": r.name,
                        "checks": r.checks,
                        "violations": r.violations.len(),
                        "passed": r.passed(),
                        "first_violations": r.violations.iter().take(5).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json["verdict"] = Value::Bool(ok);
            table = Some(suite_table(&results));
            ok
        }
    };
    json["timing_ms"] = if cfg.deterministic {
        Value::Null
    } else {
        json!(start.elapsed().as_millis() as u64)
    };
    Ok(Report {
        json,
        outcome: if verdict { Outcome::Success } else { Outcome::VerdictFalse },
        table,
    })
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}
