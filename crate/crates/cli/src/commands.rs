//! Subcommand implementations.

use std::process::ExitCode;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use bpswitch_core::sensitivity::{fit_report, k_grid, sweep_to_csv, OptimalInterval, SweepPoint, Sweeper};
use bpswitch_core::simulate::{self, SimConfig};
use bpswitch_core::traffic::{build_histogram, estimate_profile, fit_exponential, Service};
use bpswitch_core::{BillingMode, Catalog, CostReport, TrafficProfile};

use crate::output::{csv_string, emit, money, Table};
use crate::{inputs, Cli, Command, Format, GridArgs, TrafficArgs};

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// Bins shown in the duration histogram; the last one collects longer calls.
const HISTOGRAM_BINS: u32 = 15;

/// A broken invariant inside the tool rather than bad input.
#[derive(Debug)]
pub struct Internal(pub String);

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "internal error: {}", self.0)
    }
}

impl std::error::Error for Internal {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<Internal>()) {
        EXIT_INTERNAL
    } else if err.chain().any(|e| e.is::<std::io::Error>()) {
        EXIT_IO
    } else {
        EXIT_VALIDATION
    }
}

/// The error chain joined by `: `, skipping causes a message already quotes.
pub fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let message = cause.to_string();
        if text.ends_with(&message) {
            continue;
        }
        if !text.is_empty() {
            text.push_str(": ");
        }
        text.push_str(&message);
    }
    text
}

pub fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let mode = BillingMode::from(cli.billing_mode);
    let text = match &cli.command {
        Command::Validate { cdr, strict } => return validate(cli, cdr.as_deref(), *strict),
        Command::Analyze { traffic } => analyze(cli, traffic)?,
        Command::Rank { traffic } => {
            let (catalog, profile) = load(cli, traffic)?;
            rank(cli.format, &CostReport::evaluate(&catalog, &profile, mode)?)
        }
        Command::Sweep { traffic, grid } => {
            let (catalog, profile) = load(cli, traffic)?;
            sweep(cli.format, &catalog, &profile, mode, grid)?
        }
        Command::Fit { traffic, grid } => {
            let (catalog, profile) = load(cli, traffic)?;
            fit(cli.format, &catalog, &profile, mode, grid)?
        }
        Command::Simulate { traffic, seed, runs } => {
            let (catalog, profile) = load(cli, traffic)?;
            simulate(cli.format, &catalog, &profile, mode, *seed, *runs)?
        }
    };
    emit(&text, cli.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn load(cli: &Cli, traffic: &TrafficArgs) -> Result<(Catalog, TrafficProfile)> {
    let catalog = inputs::catalog(cli.catalog.as_ref())?;
    let profile = inputs::profile(&catalog, traffic)?;
    Ok((catalog, profile))
}

fn pretty(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("json value serializes")
}

fn validate(cli: &Cli, cdr: Option<&std::path::Path>, strict: bool) -> Result<ExitCode> {
    let catalog = inputs::catalog(cli.catalog.as_ref())?;
    let plans = catalog.plans().len();
    let inactive = catalog.inactive_count();
    let mut summary = json!({
        "plans": plans,
        "inactive": inactive,
        "current_plan_id": catalog.context().current_plan_id,
    });
    let mut lines = vec![format!("{plans} plans, {inactive} inactive"), format!("current plan: {}", catalog.current_plan().id)];
    if let Some(path) = cdr {
        let parsed = inputs::printout(path, strict)?;
        let calls = parsed.records.iter().filter(|r| r.service == Service::Tel).count();
        lines.push(format!("{} records, {calls} calls, {} skipped rows", parsed.records.len(), parsed.warnings.len()));
        for w in &parsed.warnings {
            lines.push(format!("  line {}: {}", w.line, w.message));
        }
        let warnings: Vec<Value> = parsed.warnings.iter().map(|w| json!({"line": w.line, "message": w.message})).collect();
        summary["cdr"] = json!({"records": parsed.records.len(), "calls": calls, "warnings": warnings});
    }
    let text = match cli.format {
        Format::Json => pretty(&summary),
        Format::Table | Format::Csv => lines.join("\n"),
    };
    emit(&text, cli.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn analyze(cli: &Cli, traffic: &TrafficArgs) -> Result<String> {
    let catalog = inputs::catalog(cli.catalog.as_ref())?;
    let cdr = traffic.cdr.as_deref().context("analyze needs --cdr")?;
    let calls = inputs::calls(cdr, traffic)?;
    let classified = &calls.classification.calls;
    let profile = estimate_profile(classified, &catalog, calls.months, inputs::estimate_options(traffic))?;
    let minutes: Vec<f64> = classified.iter().map(|c| c.duration_minutes()).collect();
    let fit = fit_exponential(&minutes).context("no call durations to fit")?;
    let bins = build_histogram(classified, HISTOGRAM_BINS)?;
    let histogram: Vec<f64> = (1..=HISTOGRAM_BINS).map(|m| bins.mass(m)).collect();

    let forces: Vec<Vec<String>> = profile
        .plans()
        .flat_map(|(id, row)| row.iter().map(move |s| vec![id.to_string(), s.name.clone(), s.calls_per_month.to_string()]))
        .collect();
    Ok(match cli.format {
        Format::Json => {
            let profile_json: Value = serde_json::from_str(&profile.to_json_string()).expect("profile json");
            pretty(&json!({
                "observation_months": calls.months,
                "calls": classified.len(),
                "non_call_records": calls.classification.non_call_records,
                "dropped_zero_duration": calls.classification.dropped_zero_duration,
                "unmapped_numbers": calls.classification.unmapped_prefixes,
                "skipped_rows": calls.parsed.warnings.len(),
                "total_calls_per_month": profile.total_calls_per_month(),
                "duration": fit,
                "histogram": histogram,
                "profile": profile_json,
            }))
        }
        Format::Csv => csv_string(&["plan", "subgroup", "calls_per_month"], &forces),
        Format::Table => {
            let mut out = format!(
                "observation: {:.2} months, {} calls ({} non-call records, {} zero-length, {} unmapped numbers, {} skipped rows)\n\n",
                calls.months,
                classified.len(),
                calls.classification.non_call_records,
                calls.classification.dropped_zero_duration,
                calls.classification.unmapped_prefixes,
                calls.parsed.warnings.len(),
            );
            let mut table = Table::new(["plan", "subgroup", "calls/month"]);
            for (id, row) in profile.plans() {
                for s in row {
                    table.row(vec![id.to_string(), s.name.clone(), money(s.calls_per_month)]);
                }
            }
            table.row(vec!["total".into(), String::new(), money(profile.total_calls_per_month())]);
            out.push_str(&table.render());
            out.push_str(&format!(
                "\nduration: mean {:.2} min, rmsd {:.2} min, mu = {:.2} 1/min\n\n",
                fit.mean, fit.rmsd, fit.mu
            ));
            let mut hist = Table::new(["minute", "share"]);
            for (i, share) in histogram.iter().enumerate() {
                let label = if i + 1 == histogram.len() { format!("{}+", i + 1) } else { (i + 1).to_string() };
                hist.row(vec![label, format!("{share:.3}")]);
            }
            out.push_str(&hist.render());
            out
        }
    })
}

fn rank(format: Format, report: &CostReport) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
        Format::Table => {
            let columns = report.subgroup_columns();
            let mut header = vec!["plan".to_string(), "name".to_string()];
            header.extend(columns.iter().map(|c| format!("s:{c}")));
            header.extend(["variable", "fixed", "full", "rank"].map(String::from));
            let mut table = Table::new(header);
            for b in &report.breakdowns {
                let mut row = vec![b.plan_id.to_string(), b.plan_name.clone()];
                for column in &columns {
                    row.push(b.subgroups.iter().find(|s| &s.name == column).map_or_else(String::new, |s| money(s.call_cost)));
                }
                row.extend([money(b.variable), money(b.fixed), money(b.full)]);
                row.push(report.rank_of(b.plan_id).map_or_else(String::new, |r| r.to_string()));
                table.row(row);
            }
            let order: Vec<String> = report.ranking.order.iter().map(ToString::to_string).collect();
            let mut out = table.render();
            out.push_str(&format!("\nranking: {}\n", order.join(", ")));
            out.push_str(&recommendation(report));
            out
        }
    }
}

fn recommendation(report: &CostReport) -> String {
    let optimal = report.optimal();
    let current = report.current_plan_id;
    if optimal.plan_id == current {
        return format!("optimal: plan {current} (stay)\n");
    }
    let stay = report.breakdown(current).map_or(f64::NAN, |b| b.full);
    format!(
        "optimal: plan {} (switch from plan {current}, saves {} per month)\n",
        optimal.plan_id,
        money(stay - optimal.full)
    )
}

fn run_sweep(catalog: &Catalog, profile: &TrafficProfile, mode: BillingMode, grid: &GridArgs) -> Result<(Vec<SweepPoint>, Vec<OptimalInterval>)> {
    let sweeper = Sweeper::new(catalog, profile, mode);
    let points = sweeper.sweep(&k_grid(grid.k_from, grid.k_to, grid.k_step)?)?;
    let intervals = sweeper.switch_points(&points)?;
    if intervals.is_empty() {
        return Err(Internal("sweep produced no optimal intervals".into()).into());
    }
    Ok((points, intervals))
}

fn sweep(format: Format, catalog: &Catalog, profile: &TrafficProfile, mode: BillingMode, grid: &GridArgs) -> Result<String> {
    let (points, intervals) = run_sweep(catalog, profile, mode, grid)?;
    Ok(match format {
        Format::Json => pretty(&json!({ "points": points, "intervals": intervals })),
        Format::Csv => sweep_to_csv(&points),
        Format::Table => {
            let mut table = Table::new(["k", "optimal plan", "optimal cost", "stay cost"]);
            for p in &points {
                table.row(vec![money(p.k), p.optimal_plan_id.to_string(), money(p.optimal_full_cost), money(p.stay_cost)]);
            }
            let mut out = table.render();
            let sequence: Vec<String> = intervals.iter().map(|i| i.plan_id.to_string()).collect();
            out.push_str(&format!("\nplan sequence: {}\n", sequence.join(", ")));
            for i in &intervals {
                out.push_str(&format!("plan {}: k from {:.4} to {:.4}\n", i.plan_id, i.k_from, i.k_to));
            }
            out
        }
    })
}

fn fit(format: Format, catalog: &Catalog, profile: &TrafficProfile, mode: BillingMode, grid: &GridArgs) -> Result<String> {
    let (points, _) = run_sweep(catalog, profile, mode, grid)?;
    let report = fit_report(&points)?;
    let coefficients = |f: &bpswitch_core::sensitivity::NamedFit| -> Vec<String> {
        (0..=3).map(|p| if p == 0 && !f.fit.intercept || p > f.fit.degree { String::new() } else { f.fit.coefficient(p).to_string() }).collect()
    };
    Ok(match format {
        Format::Json => report.to_json(),
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .fits()
                .iter()
                .map(|f| {
                    let mut row = vec![f.model.clone(), f.fit.r_squared.to_string()];
                    row.extend(coefficients(f));
                    row
                })
                .collect();
            csv_string(&["model", "r_squared", "c0", "c1", "c2", "c3"], &rows)
        }
        Format::Table => {
            let mut table = Table::new(["model", "R^2", "c0", "c1", "c2", "c3"]);
            for f in report.fits() {
                let mut row = vec![f.model.clone(), format!("{:.4}", f.fit.r_squared)];
                row.extend(coefficients(f).iter().map(|c| c.parse::<f64>().map_or_else(|_| String::new(), |v| format!("{v:.4}"))));
                table.row(row);
            }
            table.render()
        }
    })
}

fn simulate(format: Format, catalog: &Catalog, profile: &TrafficProfile, mode: BillingMode, seed: u64, runs: u32) -> Result<String> {
    let (config, mapping) = SimConfig::from_profile(profile, seed, runs, mode)?;
    let result = simulate::run(&config, catalog, &mapping)?;
    let analytic = CostReport::evaluate(catalog, profile, mode)?;
    let expected = |id| analytic.breakdown(id).map(|b| b.variable).unwrap_or(f64::NAN);
    Ok(match format {
        Format::Json => result.to_json(),
        Format::Csv => {
            let rows: Vec<Vec<String>> = result
                .plans
                .iter()
                .map(|s| {
                    [s.plan_id.0 as f64, s.mean, s.std_dev, s.std_error, s.percentiles.p5, s.percentiles.p50, s.percentiles.p95, expected(s.plan_id)]
                        .map(|v| v.to_string())
                        .to_vec()
                })
                .collect();
            csv_string(&["plan", "mean", "std_dev", "std_error", "p5", "p50", "p95", "analytic"], &rows)
        }
        Format::Table => {
            let mut table = Table::new(["plan", "mean", "std dev", "std error", "p5", "p50", "p95", "analytic"]);
            for s in &result.plans {
                let mut row = vec![s.plan_id.to_string()];
                row.extend([s.mean, s.std_dev, s.std_error, s.percentiles.p5, s.percentiles.p50, s.percentiles.p95, expected(s.plan_id)].map(money));
                table.row(row);
            }
            format!("seed {seed}, {runs} simulated months of variable cost\n\n{}", table.render())
        }
    })
}
