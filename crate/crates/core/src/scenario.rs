//! The five `svir` commands as library calls. Each writes its files into an
//! output directory and returns the [`RunReport`] it also saved as JSON.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calibration::{self, BaselineWindow, ObservedSeries};
use crate::cost::{CostBreakdown, CostShares};
use crate::error::{Result, SvirError};
use crate::fbs::{self, SolutionPath};
use crate::io::config::{ConfigFile, ScenarioConfig, Strategy};
use crate::io::trajectory::{write_costates, write_trajectory};
use crate::io::{fmt_num, round_sig, write_file};
use crate::model::reproduction_number;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub j_social: f64,
    pub j_infection: f64,
    pub j_vaccination: f64,
    pub j_total: f64,
    pub shares: CostShares,
}

impl From<&CostBreakdown> for CostReport {
    fn from(c: &CostBreakdown) -> Self {
        CostReport {
            j_social: c.j_social,
            j_infection: c.j_infection,
            j_vaccination: c.j_vaccination,
            j_total: c.j_total,
            shares: c.shares(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub final_rel_change: f64,
    pub final_relaxation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ConfigFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reproduction_number: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
    /// Command-specific results (sweep diagnostics, estimates, ...).
    #[serde(skip_serializing_if = "Value::is_null", default)]
    pub details: Value,
    /// Files written to the output directory, by name.
    pub files: Vec<String>,
}

impl RunReport {
    fn new(command: &str) -> Self {
        RunReport {
            command: command.to_string(),
            scenario: None,
            strategy: None,
            reproduction_number: None,
            cost: None,
            convergence: None,
            details: Value::Null,
            files: Vec::new(),
        }
    }

    /// 0, or 4 when an optimal solve ran out of iterations.
    pub fn exit_code(&self) -> i32 {
        match &self.convergence {
            Some(c) if !c.converged => 4,
            _ => 0,
        }
    }
}

/// Rounds every float in a JSON tree to 10 significant digits.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round_sig(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v)
        .map(round_json)
        .map_err(|e| SvirError::Numerical(format!("serialising report: {e}")))
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Output<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| SvirError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Output { dir, files: Vec::new() })
    }

    fn put(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        write_file(&self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, name: &str, mut report: RunReport) -> Result<RunReport> {
        self.files.push(name.to_string());
        report.files = self.files.clone();
        let mut text = serde_json::to_string_pretty(&to_json(&report)?)
            .map_err(|e| SvirError::Numerical(format!("serialising report: {e}")))?;
        text.push('\n');
        write_file(&self.dir.join(name), text.as_bytes())?;
        // The report carries the rounded numbers that were written.
        serde_json::from_str(&text).map_err(|e| SvirError::Numerical(format!("re-reading report: {e}")))
    }
}

fn path_report(command: &str, cfg: &ScenarioConfig, sol: &SolutionPath) -> Result<RunReport> {
    let mut r = RunReport::new(command);
    r.scenario = Some(cfg.file.clone());
    r.strategy = Some(cfg.strategy);
    r.reproduction_number = reproduction_number(&cfg.params).ok();
    r.cost = Some(CostReport::from(&sol.cost));
    Ok(r)
}

/// Forward run under a constant strategy.
pub fn cmd_simulate(cfg: &ScenarioConfig, out: &Path) -> Result<RunReport> {
    let u = match cfg.strategy {
        Strategy::None => 0.0,
        Strategy::Full => cfg.params.u_bar,
        Strategy::Constant { u } => u,
        Strategy::Optimal => {
            return Err(SvirError::validation(
                "strategy.kind",
                "simulate runs none, full or constant strategies; use optimize for optimal",
            ))
        }
    };
    let sol = fbs::evaluate_constant_policy(&cfg.params, &cfg.initial, &cfg.cost, &cfg.grid, u)?;
    let mut o = Output::new(out)?;
    o.put(
        "trajectory.csv",
        write_trajectory(&sol.grid, &sol.states, &sol.control).as_bytes(),
    )?;
    let report = path_report("simulate", cfg, &sol)?;
    o.finish("costs.json", report)
}

/// Optimal solve. A run that exhausts the iteration cap still writes its
/// files; the report then has `converged = false` and exit code 4.
pub fn cmd_optimize(cfg: &ScenarioConfig, out: &Path) -> Result<RunReport> {
    if cfg.strategy != Strategy::Optimal {
        return Err(SvirError::validation(
            "strategy.kind",
            "optimize needs kind = \"optimal\"; use simulate for fixed strategies",
        ));
    }
    let sol = match fbs::solve(&cfg.params, &cfg.initial, &cfg.cost, &cfg.solver) {
        Ok(s) => s,
        Err(SvirError::NonConvergence { path, .. }) => *path,
        Err(e) => return Err(e),
    };
    let mut o = Output::new(out)?;
    o.put(
        "trajectory.csv",
        write_trajectory(&sol.grid, &sol.states, &sol.control).as_bytes(),
    )?;
    if let Some(l) = &sol.costates {
        o.put("costates.csv", write_costates(&sol.grid, l).as_bytes())?;
    }
    let mut report = path_report("optimize", cfg, &sol)?;
    report.convergence = Some(Convergence {
        converged: sol.converged,
        iterations: sol.iterations,
        final_rel_change: sol.final_rel_change,
        final_relaxation: sol.final_relaxation,
    });
    o.finish("costs.json", report)
}

fn cell<T>(r: &std::result::Result<T, String>, f: impl Fn(&T) -> f64) -> String {
    r.as_ref().map_or_else(|_| "NaN".to_string(), |v| fmt_num(f(v)))
}

/// Parameter sweep over the cost family. Values come from `values` when
/// given, else from the `[sweep]` section. Fails only when no row
/// succeeded (after writing the files).
pub fn cmd_sweep(cfg: &ScenarioConfig, values: Option<&[f64]>, out: &Path) -> Result<RunReport> {
    let values: Vec<f64> = match (values, &cfg.sweep_values) {
        (Some(v), _) => v.to_vec(),
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(SvirError::validation("sweep.values", "no sweep values given")),
    };
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(SvirError::validation("sweep.values", format!("must be > 0, got {bad}")));
    }
    let table = fbs::sweep_parameter(&cfg.params, &cfg.initial, &cfg.cost, &cfg.solver, &values)?;

    let mut wide = String::from("param,J_none,J_full,J_opt\n");
    let mut long = String::from("param,strategy,j_social,j_infection,j_vaccination,j_total,status\n");
    let mut failures = Vec::new();
    for row in &table.rows {
        let p = fmt_num(row.param);
        let total = |c: &CostBreakdown| c.j_total;
        wide.push_str(&format!(
            "{p},{},{},{}\n",
            cell(&row.none, total),
            cell(&row.full, total),
            cell(&row.optimal, |o| o.cost.j_total)
        ));
        let entries = [
            ("none", row.none.as_ref().map(|c| (*c, "ok"))),
            ("full", row.full.as_ref().map(|c| (*c, "ok"))),
            (
                "optimal",
                row.optimal
                    .as_ref()
                    .map(|o| (o.cost, if o.converged { "ok" } else { "not_converged" })),
            ),
        ];
        for (name, e) in entries {
            match e {
                Ok((c, status)) => long.push_str(&format!(
                    "{p},{name},{},{},{},{},{status}\n",
                    fmt_num(c.j_social),
                    fmt_num(c.j_infection),
                    fmt_num(c.j_vaccination),
                    fmt_num(c.j_total)
                )),
                Err(msg) => {
                    long.push_str(&format!("{p},{name},NaN,NaN,NaN,NaN,failed\n"));
                    failures.push(serde_json::json!({ "param": row.param, "strategy": name, "error": msg }));
                }
            }
        }
    }
    let mut o = Output::new(out)?;
    o.put("sweep.csv", wide.as_bytes())?;
    o.put("sweep_long.csv", long.as_bytes())?;
    let succeeded = table.rows.iter().filter(|r| r.succeeded()).count();
    let mut report = RunReport::new("sweep");
    report.scenario = Some(cfg.file.clone());
    report.details = serde_json::json!({
        "family": table.family,
        "parameter": cfg.cost.social.parameter_symbol(),
        "rows": table.rows.len(),
        "succeeded": succeeded,
        "diagnostics": table.diagnostics,
        "failures": failures,
    });
    let report = o.finish("sweep.json", report)?;
    if succeeded == 0 {
        return Err(SvirError::Numerical("every sweep row failed".to_string()));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMode {
    Constant,
    Daily,
}

impl std::str::FromStr for CalibrationMode {
    type Err = SvirError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(CalibrationMode::Constant),
            "daily" => Ok(CalibrationMode::Daily),
            other => Err(SvirError::validation(
                "mode",
                format!("unknown mode {other:?} (expected constant or daily)"),
            )),
        }
    }
}

fn opt_cell(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_num)
}

/// Rate estimation from a series: constrained least squares over all days,
/// or the closed-form SIR rates day by day.
pub fn cmd_calibrate(
    series: &ObservedSeries,
    mu: f64,
    eps: f64,
    mode: CalibrationMode,
    out: &Path,
) -> Result<RunReport> {
    let mut report = RunReport::new("calibrate");
    let mut o = Output::new(out)?;
    match mode {
        CalibrationMode::Constant => {
            let est = calibration::estimate_constant_params(series, mu, eps)?;
            report.details = serde_json::json!({
                "mode": mode,
                "mu": mu,
                "eps": eps,
                "days": series.len(),
                "estimate": est,
            });
        }
        CalibrationMode::Daily => {
            let daily = calibration::estimate_time_varying_sir(series, mu)?;
            let mut csv = String::from("date,beta_hat,gamma_hat\n");
            for (label, d) in series.labels.iter().zip(&daily) {
                csv.push_str(&format!("{label},{},{}\n", opt_cell(d.beta), opt_cell(d.gamma)));
            }
            o.put("daily.csv", csv.as_bytes())?;
            let days: Vec<Value> = series
                .labels
                .iter()
                .zip(&daily)
                .map(|(label, d)| serde_json::json!({ "date": label, "beta_hat": d.beta, "gamma_hat": d.gamma }))
                .collect();
            report.details = serde_json::json!({
                "mode": mode,
                "mu": mu,
                "missing_days": daily.iter().filter(|d| d.beta.is_none()).count(),
                "days": days,
            });
        }
    }
    o.finish("calibration.json", report)
}

/// Ex-post reconstruction of the realised control from daily transmission
/// estimates, relative to the mean estimate inside `window`. `annotations`
/// maps date labels to phase names and adds a `phase` column.
pub fn cmd_expost(
    series: &ObservedSeries,
    mu: f64,
    window: BaselineWindow,
    annotations: Option<&HashMap<String, String>>,
    out: &Path,
) -> Result<RunReport> {
    if window.end > series.len() {
        return Err(SvirError::validation(
            "baseline_window",
            format!(
                "{}:{} is outside the {} rows of the series",
                window.start,
                window.end,
                series.len()
            ),
        ));
    }
    let daily = calibration::estimate_time_varying_sir(series, mu)?;
    let beta0 = calibration::baseline_beta(&daily, window)?;
    let betas: Vec<Option<f64>> = daily.iter().map(|d| d.beta).collect();
    let points = calibration::expost_control(&betas, beta0)?;

    let mut csv = String::from("date,beta_hat,u_hat,clamped_flag");
    if annotations.is_some() {
        csv.push_str(",phase");
    }
    csv.push('\n');
    for (label, p) in series.labels.iter().zip(&points) {
        csv.push_str(&format!(
            "{label},{},{},{}",
            opt_cell(p.beta_hat),
            opt_cell(p.u_hat),
            u8::from(p.clamped)
        ));
        if let Some(a) = annotations {
            csv.push(',');
            csv.push_str(a.get(label).map_or("", String::as_str));
        }
        csv.push('\n');
    }
    let mut o = Output::new(out)?;
    o.put("expost.csv", csv.as_bytes())?;
    let mut report = RunReport::new("expost");
    report.details = serde_json::json!({
        "mu": mu,
        "beta0": beta0,
        "baseline_window": window,
        "days": points.len(),
        "missing_days": points.iter().filter(|p| p.u_hat.is_none()).count(),
        "clamped_days": points.iter().filter(|p| p.clamped).count(),
    });
    o.finish("expost.json", report)
}
