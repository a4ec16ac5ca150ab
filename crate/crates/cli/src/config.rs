//! Scenario documents: TOML text plus `--set` overrides, resolved into a
//! fully specified [`RunConfig`] with every applied default recorded.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use superphonon_core::analytic::superradiance_scales;
use superphonon_core::lindblad::{HilbertSpec, DEFAULT_DIM_CAP};
use superphonon_core::moments::{default_dt_out, default_t_end};
use superphonon_core::{ClosureScheme, IntegratorConfig, SystemParams};
use toml::{Table, Value};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Analytic,
    Moments,
    Lindblad,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Analytic => "analytic",
            Solver::Moments => "moments",
            Solver::Lindblad => "lindblad",
        })
    }
}

/// How the Fock cutoff of a density-matrix run is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Cutoff {
    Fixed { n_max: u32 },
    /// Doubling search run up to `horizon`.
    Auto { horizon: f64 },
}

/// The document as written; every field optional so that defaults can be
/// told apart from explicit values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    params: Option<SystemParams>,
    solver: Option<Solver>,
    scheme: Option<ClosureScheme>,
    t_end: Option<f64>,
    dt_out: Option<f64>,
    integrator: Option<IntegratorConfig>,
    n_max: Option<u32>,
    auto_cutoff: Option<bool>,
    cutoff_horizon: Option<f64>,
    dim_cap: Option<usize>,
    phonons: Option<bool>,
    output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: SystemParams,
    pub solver: Solver,
    /// Moment closure; `None` for the other solvers.
    pub scheme: Option<ClosureScheme>,
    pub t_end: f64,
    pub dt_out: f64,
    pub integrator: IntegratorConfig,
    /// Density-matrix runs only.
    pub cutoff: Option<Cutoff>,
    pub dim_cap: usize,
    /// Whether the analytic solver emits `<b†b>`.
    pub phonons: bool,
    /// Output stem, relative to the output directory unless absolute.
    pub output: PathBuf,
    /// Keys that were filled in, with the value used.
    pub applied_defaults: BTreeMap<String, Json>,
}

/// Parses `key.path=value`; the value is read as a TOML literal and falls
/// back to a bare string.
pub fn parse_override(s: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{s}`")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("--set: malformed key `{key}`")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

pub fn apply_override(doc: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut table = doc;
    let mut path = String::new();
    for part in parts {
        path = if path.is_empty() { part.to_string() } else { format!("{path}.{part}") };
        let entry = table.entry(part).or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{path}: not a table, cannot set `{key}`")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

pub fn parse_document(text: &str) -> Result<Table, CliError> {
    text.parse::<Table>().map_err(|e| CliError::Config(format!("malformed document: {e}")))
}

/// Parses a document, applies overrides in order and resolves defaults.
pub fn parse_config(text: &str, overrides: &[(String, Value)]) -> Result<RunConfig, CliError> {
    let mut doc = parse_document(text)?;
    for (k, v) in overrides {
        apply_override(&mut doc, k, v.clone())?;
    }
    resolve(doc)
}

pub fn resolve(doc: Table) -> Result<RunConfig, CliError> {
    let raw: RawConfig = serde_path_to_error::deserialize(Value::Table(doc)).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Config(e.into_inner().to_string())
        } else {
            CliError::Config(format!("{path}: {}", e.into_inner()))
        }
    })?;
    build(raw)
}

fn cfg_err(key: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn scheme_label(s: ClosureScheme) -> &'static str {
    match s {
        ClosureScheme::Exact1 => "Exact1",
        ClosureScheme::Exact2 => "Exact2",
        ClosureScheme::MeanFieldA => "MeanFieldA",
        ClosureScheme::MeanFieldB => "MeanFieldB",
    }
}

fn build(raw: RawConfig) -> Result<RunConfig, CliError> {
    let params = raw.params.ok_or_else(|| cfg_err("params", "missing table"))?;
    let params = params.validate().map_err(|e| cfg_err("params", e))?;
    let solver = raw.solver.ok_or_else(|| cfg_err("solver", "missing (analytic, moments or lindblad)"))?;
    let n = params.n_dots;
    let mut defaults = BTreeMap::new();

    if solver != Solver::Moments && raw.scheme.is_some() {
        return Err(cfg_err("scheme", format!("only valid with solver = \"moments\", not \"{solver}\"")));
    }
    if solver != Solver::Lindblad {
        for (key, set) in [
            ("n_max", raw.n_max.is_some()),
            ("auto_cutoff", raw.auto_cutoff.is_some()),
            ("cutoff_horizon", raw.cutoff_horizon.is_some()),
            ("dim_cap", raw.dim_cap.is_some()),
        ] {
            if set {
                return Err(cfg_err(key, "only valid with solver = \"lindblad\""));
            }
        }
    }
    if solver != Solver::Analytic && raw.phonons.is_some() {
        return Err(cfg_err("phonons", "only valid with solver = \"analytic\""));
    }

    let scheme = match (solver, raw.scheme) {
        (Solver::Moments, Some(s)) => {
            if let Some(req) = s.required_n_dots() {
                if req != n {
                    return Err(cfg_err(
                        "scheme",
                        format!("{} requires N={req} (params.n_dots = {n})", scheme_label(s)),
                    ));
                }
            } else if n < 2 {
                return Err(cfg_err("scheme", format!("{} requires N ≥ 2 (params.n_dots = {n})", scheme_label(s))));
            }
            Some(s)
        }
        (Solver::Moments, None) => {
            let s = match n {
                1 => ClosureScheme::Exact1,
                2 => ClosureScheme::Exact2,
                _ => ClosureScheme::MeanFieldA,
            };
            defaults.insert("scheme".into(), json!(s.name()));
            Some(s)
        }
        _ => None,
    };

    let phonons = match (solver, raw.phonons) {
        (Solver::Analytic, Some(true)) if n != 1 => {
            return Err(cfg_err(
                "phonons",
                format!("the analytic phonon law requires N=1 (params.n_dots = {n}); for N ≥ 2 only inversion and intensity exist"),
            ))
        }
        (Solver::Analytic, Some(p)) => p,
        (Solver::Analytic, None) => {
            defaults.insert("phonons".into(), json!(n == 1));
            n == 1
        }
        _ => true,
    };

    let t_end = match raw.t_end {
        Some(t) => t,
        None => {
            let t = match (solver, scheme) {
                (Solver::Moments, Some(s)) => default_t_end(&params, s),
                (Solver::Analytic, _) if n > 1 => 12.0 * superradiance_scales(n, params.gamma).t0,
                _ => 4.0 / params.gamma,
            };
            defaults.insert("t_end".into(), json!(t));
            t
        }
    };
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(cfg_err("t_end", format!("must be a positive number, got {t_end}")));
    }
    let dt_out = match raw.dt_out {
        Some(d) => d,
        None => {
            let d = default_dt_out(&params);
            defaults.insert("dt_out".into(), json!(d));
            d
        }
    };
    if !(dt_out > 0.0 && dt_out <= t_end) {
        return Err(cfg_err("dt_out", format!("must lie in (0, t_end = {t_end}], got {dt_out}")));
    }

    let integrator = match raw.integrator {
        Some(i) => i,
        None => {
            let i = IntegratorConfig::default();
            defaults.insert("integrator".into(), serde_json::to_value(i).expect("plain struct"));
            i
        }
    };
    integrator.validate().map_err(|e| cfg_err("integrator", e))?;

    let dim_cap = raw.dim_cap.unwrap_or(DEFAULT_DIM_CAP);
    let cutoff = if solver == Solver::Lindblad {
        if raw.dim_cap.is_none() {
            defaults.insert("dim_cap".into(), json!(dim_cap));
        }
        let cutoff = match (raw.n_max, raw.auto_cutoff) {
            (Some(_), Some(true)) => return Err(cfg_err("auto_cutoff", "cannot be combined with n_max")),
            (None, Some(false)) => return Err(cfg_err("n_max", "required when auto_cutoff = false")),
            (Some(n_max), _) => {
                if raw.cutoff_horizon.is_some() {
                    return Err(cfg_err("cutoff_horizon", "only valid with auto_cutoff"));
                }
                HilbertSpec::with_cap(n, n_max, dim_cap).map_err(|e| cfg_err("n_max", e))?;
                Cutoff::Fixed { n_max }
            }
            (None, auto) => {
                if auto.is_none() {
                    defaults.insert("auto_cutoff".into(), json!(true));
                }
                let horizon = match raw.cutoff_horizon {
                    Some(h) if h > 0.0 && h <= t_end => h,
                    Some(h) => return Err(cfg_err("cutoff_horizon", format!("must lie in (0, t_end = {t_end}], got {h}"))),
                    None => {
                        defaults.insert("cutoff_horizon".into(), json!(t_end));
                        t_end
                    }
                };
                Cutoff::Auto { horizon }
            }
        };
        Some(cutoff)
    } else {
        None
    };

    let output = match raw.output {
        Some(o) if o.as_os_str().is_empty() => return Err(cfg_err("output", "empty path")),
        Some(o) => o,
        None => {
            defaults.insert("output".into(), json!("run"));
            PathBuf::from("run")
        }
    };

    Ok(RunConfig {
        params,
        solver,
        scheme,
        t_end,
        dt_out,
        integrator,
        cutoff,
        dim_cap,
        phonons,
        output,
        applied_defaults: defaults,
    })
}

/// Parameters a sweep may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Kappa,
    Eta,
    Nbar,
    NDots,
}

impl SweepParam {
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::Kappa => "kappa",
            SweepParam::Eta => "eta",
            SweepParam::Nbar => "nbar",
            SweepParam::NDots => "n_dots",
        }
    }

    /// TOML value for one sweep point.
    pub fn value(self, x: f64) -> Result<Value, CliError> {
        match self {
            SweepParam::NDots if x.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&x) => {
                Err(CliError::Config(format!("n_dots sweep values must be positive integers, got {x}")))
            }
            SweepParam::NDots => Ok(Value::Integer(x as i64)),
            _ => Ok(Value::Float(x)),
        }
    }
}

impl FromStr for SweepParam {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "kappa" => Ok(SweepParam::Kappa),
            "eta" => Ok(SweepParam::Eta),
            "nbar" => Ok(SweepParam::Nbar),
            "n_dots" => Ok(SweepParam::NDots),
            _ => Err(CliError::Config(format!(
                "unknown sweep parameter `{s}` (expected kappa, eta, nbar or n_dots)"
            ))),
        }
    }
}
