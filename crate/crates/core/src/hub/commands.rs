use std::collections::BTreeMap;
use std::path::Path;

use chrono::Duration;
use serde::Serialize;

use super::forecast::{run_forecast, ForecastInputs};
use super::io::{format_time, json_bytes, parse_time, read_nwp_csv, read_panel_csv, read_series_csv, table_csv};
use super::{CollabSection, EvaluateSection, FlexSection, ForecastSection, OutputSet, RunOutput, ScheduleSection};
use crate::data::{crps_rows, mae, rmse, uniform_quantile_grid, MetricReport, TimeSeries};
use crate::error::{Error, Result};
use crate::flex::{
    build_test_sets, contains_series, epso_sample_with, evaluate_surrogates, svdd_fit, vbattery_fit, FeasibilityContext,
    SigmoidKernel, Surrogate, SvddParams,
};
use crate::scheduler::{baseline_schedule, optimize_schedule, replay_violations, savings_percent, Schedule};
use crate::synth::{flex_instance, pv_nwp_dataset, schedule_instance, simulate_var, FlexInstance, ScheduleInstance};
use crate::var::{
    build_var_design, fit_centralized, fit_consensus_predictors, fit_sharing_examples, lambda_max, node_blocks,
    time_blocks, AdmmParams, LogPolicy, VarModel,
};
use crate::var::privacy::{consensus_report, sharing_report};

/// One request served by the in-process hub.
#[derive(Clone, Debug, Serialize)]
struct HubMessage {
    seq: usize,
    phase: &'static str,
    detail: String,
}

#[derive(Default)]
struct HubLog(Vec<HubMessage>);

impl HubLog {
    fn push(&mut self, phase: &'static str, detail: impl Into<String>) {
        let seq = self.0.len();
        self.0.push(HubMessage { seq, phase, detail: detail.into() });
    }

    fn jsonl(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for m in &self.0 {
            serde_json::to_writer(&mut out, m)?;
            out.push(b'\n');
        }
        Ok(out)
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

pub(super) fn forecast(cfg: &ForecastSection, seed: u64) -> Result<RunOutput> {
    let mut log = HubLog::default();
    let inputs = match (&cfg.nwp_path, &cfg.pv_path) {
        (Some(nwp_path), Some(pv_path)) => {
            let grid = read_nwp_csv(nwp_path)?;
            let pv = read_series_csv(pv_path)?;
            log.push("retrieve", format!("grid from {}, observations from {}", nwp_path.display(), pv_path.display()));
            ForecastInputs { grid, pv }
        }
        (None, None) => {
            let ds = pv_nwp_dataset(seed, cfg.synthetic_days)?;
            log.push("retrieve", format!("synthetic grid, {} days, seed {seed}", cfg.synthetic_days));
            ForecastInputs { grid: ds.grid, pv: ds.pv }
        }
        _ => return Err(Error::invalid("forecast needs both nwp_path and pv_path, or neither")),
    };
    let p = &cfg.pipeline;
    log.push(
        "features",
        format!("{} runs, {} grid points, models {:?}", inputs.grid.runs().len(), inputs.grid.n_points(), p.models),
    );
    let outcome = run_forecast(&inputs, p)?;
    for m in &outcome.models {
        log.push("train", format!("{}: {} features, {} rows", m.model, m.n_features, m.n_train));
    }
    let n_issues = outcome.models.first().map_or(0, |m| m.forecasts.len());
    log.push("operate", format!("{n_issues} issues of {} h", p.horizon_hours));

    let levels = uniform_quantile_grid(p.quantiles);
    let mut header = vec!["model".to_string(), "issue_time".into(), "horizon".into(), "valid_time".into(), "point".into()];
    header.extend(levels.iter().map(|q| format!("q{q:.4}")));
    header.extend(["observed".into(), "daylight".into()]);
    let mut rows = Vec::new();
    for m in &outcome.models {
        for (fc, obs) in m.forecasts.iter().zip(&outcome.observations) {
            for (h, &lead) in fc.horizons.iter().enumerate() {
                let valid = fc.issue_time + Duration::hours(lead as i64);
                let mut r = vec![m.model.clone(), format_time(fc.issue_time), lead.to_string(), format_time(valid), fmt(fc.point[h])];
                r.extend(fc.values[h].iter().map(|v| fmt(*v)));
                let day = obs[h] > 0.0 || daylight_from_grid(&inputs, p.site, valid, fc.issue_time);
                r.extend([fmt(obs[h]), if day { "1".into() } else { "0".into() }]);
                rows.push(r);
            }
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let improvement_rows: Vec<Vec<String>> = outcome
        .improvements
        .iter()
        .map(|r| vec![r.model.clone(), fmt(r.mae), fmt(r.rmse), fmt(r.crps)])
        .collect();

    let mut summary = Vec::new();
    for m in &outcome.models {
        summary.push(format!(
            "{}: MAE {:.4} RMSE {:.4} CRPS {:.4} ({} samples)",
            m.model, m.report.mae, m.report.rmse, m.report.crps, m.report.n_samples
        ));
    }
    for r in &outcome.improvements {
        summary.push(format!("{} vs base: MAE {:+.1}% RMSE {:+.1}% CRPS {:+.1}%", r.model, r.mae, r.rmse, r.crps));
    }

    let mut files = OutputSet::new();
    files.add("forecasts.csv", table_csv(&header_refs, &rows)?);
    files.add("metrics.json", json_bytes(&outcome)?);
    files.add("improvements.csv", table_csv(&["model", "mae_pct", "rmse_pct", "crps_pct"], &improvement_rows)?);
    files.add("hub_log.jsonl", log.jsonl()?);
    Ok(RunOutput { files, summary })
}

fn daylight_from_grid(inputs: &ForecastInputs, site: (f64, f64), valid: chrono::NaiveDateTime, issue: chrono::NaiveDateTime) -> bool {
    use crate::features::NwpVariable;
    let grid = &inputs.grid;
    match (grid.variable_index(NwpVariable::Swflx), grid.locate_issued_by(valid, Some(issue), 0)) {
        (Some(v), Some((run, lead))) => grid.get(run, lead, grid.nearest_point(site), v) > 0.0,
        _ => false,
    }
}

#[derive(Serialize)]
struct CollabModels<'a> {
    centralized: &'a VarModel,
    consensus: &'a VarModel,
    sharing: &'a VarModel,
    /// Largest absolute coefficient difference to the centralized fit.
    consensus_max_diff: f64,
    sharing_max_diff: f64,
}

pub(super) fn collab(cfg: &CollabSection, seed: u64) -> Result<RunOutput> {
    let panel = match &cfg.panel_path {
        Some(path) => read_panel_csv(path)?,
        None => simulate_var(cfg.n_series, cfg.p, cfg.length, seed)?,
    };
    let design = build_var_design(&panel, cfg.p)?;
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => cfg.lambda_fraction * lambda_max(&design),
    };
    let params = AdmmParams { lambda, rho: cfg.rho, tol: cfg.tol, max_iter: cfg.max_iter };
    let policy = LogPolicy::LastRounds(cfg.log_rounds);

    let central = fit_centralized(&design, &params)?;
    let node = node_blocks(&design, design.n)?;
    let consensus = fit_consensus_predictors(&design, &node, &params, policy)?;
    let time = time_blocks(&design, cfg.workers)?;
    let sharing = fit_sharing_examples(&design, &time, &params, policy)?;
    for (name, m) in [("centralized", &central), ("consensus", &consensus.model), ("sharing", &sharing.model)] {
        if !m.converged {
            return Err(Error::NotConverged {
                iterations: m.iterations,
                detail: format!("{name} ADMM, primal {:.3e}, dual {:.3e}", m.primal_residual, m.dual_residual),
            });
        }
    }
    let diff = |m: &VarModel| (&m.b - &central.b).amax();
    let models = CollabModels {
        centralized: &central,
        consensus: &consensus.model,
        sharing: &sharing.model,
        consensus_max_diff: diff(&consensus.model),
        sharing_max_diff: diff(&sharing.model),
    };

    let mut privacy = BTreeMap::new();
    privacy.insert("consensus", consensus_report(&consensus.log, &design, &node)?);
    privacy.insert("sharing", sharing_report(&design, &time));

    let mut round_log = Vec::new();
    consensus.log.write_jsonl(&mut round_log)?;
    sharing.log.write_jsonl(&mut round_log)?;

    let mut trace_rows = Vec::new();
    for (name, m) in [("centralized", &central), ("consensus", &consensus.model), ("sharing", &sharing.model)] {
        for tp in &m.trace {
            trace_rows.push(vec![name.to_string(), tp.k.to_string(), fmt(tp.primal), fmt(tp.dual), fmt(tp.objective)]);
        }
    }

    let mut summary = vec![format!(
        "lambda {:.4}: centralized {} iterations, {} non-zeros",
        lambda,
        central.iterations,
        central.nonzeros()
    )];
    summary.push(format!("consensus max |diff| {:.3e}, sharing max |diff| {:.3e}", models.consensus_max_diff, models.sharing_max_diff));
    for (scheme, r) in &privacy {
        let recon = r.reconstruction_max_error.map_or(String::new(), |e| format!(", reconstruction error {e:.3e}"));
        summary.push(format!("{scheme}: {}{recon}, {} raw exposures", r.verdict, r.raw_exposures.len()));
    }

    let mut files = OutputSet::new();
    files.add("models.json", json_bytes(&models)?);
    files.add("round_log.jsonl", round_log);
    files.add("privacy.json", json_bytes(&privacy)?);
    files.add("traces.csv", table_csv(&["method", "k", "primal", "dual", "objective"], &trace_rows)?);
    Ok(RunOutput { files, summary })
}

#[derive(Serialize)]
struct FlexReport<'a> {
    horizon: usize,
    k: usize,
    collapsed: bool,
    alpha: f64,
    accuracy: &'a crate::flex::AccuracyTable,
    vbattery_size: f64,
    svdd_support_vectors: usize,
    privacy_scan: String,
}

pub(super) fn flex(cfg: &FlexSection, seed: u64) -> Result<RunOutput> {
    let inst: FlexInstance = match &cfg.instance_path {
        Some(path) => read_json(path)?,
        None => flex_instance(seed, cfg.horizon, cfg.scenarios)?,
    };
    let ctx = FeasibilityContext::new(&inst.fleet, &inst.baseline, &inst.pv_scenarios, cfg.alpha)?;
    let set = epso_sample_with(&inst.fleet, &inst.baseline, &inst.pv_scenarios, cfg.alpha, cfg.k, seed, &cfg.epso)?;
    let horizon = set.horizon();
    let kernel = SigmoidKernel { gamma: cfg.gamma.unwrap_or(1.0 / horizon as f64), coef0: cfg.coef0 };
    let svdd = svdd_fit(&set, &SvddParams::new(cfg.nu, kernel))?;
    let soc_ini = inst.fleet.battery.as_ref().map_or(0.0, |b| b.soc_init);
    let vb = vbattery_fit(&set, soc_ini, inst.fleet.dt_h)?;
    let tests = build_test_sets(&set, &ctx, cfg.test_k, seed, cfg.unfeasible_scale, &cfg.epso)?;
    let accuracy = evaluate_surrogates(&svdd, &vb, &tests.feasible, &tests.unfeasible)?;

    let svdd_json = Surrogate::Svdd(svdd.clone()).to_json()?.into_bytes();
    let vb_json = Surrogate::VirtualBattery(vb.clone()).to_json()?.into_bytes();
    let leaked = contains_series(&svdd_json, &inst.baseline) || contains_series(&vb_json, &inst.baseline);
    if leaked {
        return Err(Error::invalid("surrogate output embeds the baseline vector"));
    }
    let report = FlexReport {
        horizon,
        k: set.len(),
        collapsed: set.collapsed,
        alpha: cfg.alpha,
        accuracy: &accuracy,
        vbattery_size: crate::flex::vbattery_size(&vb),
        svdd_support_vectors: svdd.support_vectors.len(),
        privacy_scan: format!("no baseline data embedded: {}", "pass"),
    };

    let mut traj_rows = Vec::new();
    for (i, t) in set.trajectories.iter().enumerate() {
        for (p, d) in t.deltas.iter().enumerate() {
            traj_rows.push(vec![i.to_string(), p.to_string(), fmt(*d)]);
        }
    }
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.1}"));
    let table_rows: Vec<Vec<String>> = accuracy
        .rows
        .iter()
        .map(|r| vec![r.model.clone(), pct(r.feasible_pct), pct(r.unfeasible_pct)])
        .collect();

    let mut summary = vec![format!("{} trajectories over {horizon} periods{}", set.len(), if set.collapsed { " (collapsed)" } else { "" })];
    for r in &table_rows {
        summary.push(format!("{}: feasible {}%, unfeasible {}%", r[0], r[1], r[2]));
    }
    summary.push(report.privacy_scan.clone());

    let mut files = OutputSet::new();
    files.add("trajectories.csv", table_csv(&["trajectory", "period", "delta_kw"], &traj_rows)?);
    files.add("svdd.json", svdd_json);
    files.add("virtual_battery.json", vb_json);
    files.add("accuracy.csv", table_csv(&["model", "feasible_pct", "unfeasible_pct"], &table_rows)?);
    files.add("report.json", json_bytes(&report)?);
    Ok(RunOutput { files, summary })
}

#[derive(Serialize)]
struct ScheduleReport<'a> {
    optimized: &'a Schedule,
    baseline: &'a Schedule,
    savings_percent: f64,
    violations: usize,
}

pub(super) fn schedule(cfg: &ScheduleSection, seed: u64) -> Result<RunOutput> {
    let inst: ScheduleInstance = match &cfg.instance_path {
        Some(path) => read_json(path)?,
        None => schedule_instance(seed, cfg.horizon)?,
    };
    let opt = optimize_schedule(&inst.fleet, &inst.tariff, &inst.pv, &inst.base_load)?;
    let base = baseline_schedule(&inst.fleet, &inst.tariff, &inst.pv, &inst.base_load)?;
    let savings = savings_percent(&base, &opt);
    let violations = replay_violations(&inst.fleet, &opt)?;
    if violations > 0 {
        return Err(Error::Infeasible(format!("optimized schedule has {violations} constraint violations")));
    }
    let report = ScheduleReport { optimized: &opt, baseline: &base, savings_percent: savings, violations };
    let rows = vec![
        vec!["baseline".to_string(), fmt(base.cost), fmt(0.0)],
        vec!["optimized".to_string(), fmt(opt.cost), fmt(savings)],
    ];
    let mut summary = vec![format!("baseline cost {:.4}, optimized cost {:.4}", base.cost, opt.cost)];
    for (s, start) in inst.fleet.shiftables.iter().zip(&opt.starts) {
        summary.push(format!("{} starts at period {start} (baseline {})", s.name, s.baseline_start));
    }
    summary.push(format!("savings vs baseline: {savings:.2}%"));

    let mut files = OutputSet::new();
    files.add("schedule.json", json_bytes(&report)?);
    files.add("cost_comparison.csv", table_csv(&["plan", "cost", "savings_pct"], &rows)?);
    Ok(RunOutput { files, summary })
}

/// Forecast rows of one model, as read back from a forecast CSV.
#[derive(Default)]
struct ModelRows {
    point: Vec<f64>,
    quantiles: Vec<Vec<f64>>,
    observed: Vec<f64>,
}

pub(super) fn evaluate(cfg: &EvaluateSection) -> Result<RunOutput> {
    let fpath = cfg.forecast_path.as_deref().ok_or_else(|| Error::invalid("evaluate needs forecast_path"))?;
    let opath = cfg.observations_path.as_deref().ok_or_else(|| Error::invalid("evaluate needs observations_path"))?;
    let obs = read_series_csv(opath)?;
    let file = std::fs::File::open(fpath)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", fpath.display()))))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let schema = |row: usize, msg: &str| Error::Schema(format!("{}: row {row}: {msg}", fpath.display()));
    let (Some(c_model), Some(c_valid), Some(c_point)) = (col("model"), col("valid_time"), col("point")) else {
        return Err(schema(1, "header needs model, valid_time and point columns"));
    };
    let q_cols: Vec<usize> = (0..headers.len()).filter(|&i| headers[i].starts_with('q')).collect();
    let levels: Vec<f64> = q_cols
        .iter()
        .map(|&i| headers[i][1..].parse::<f64>().map_err(|_| schema(1, "bad quantile column name")))
        .collect::<Result<_>>()?;
    if levels.is_empty() {
        return Err(schema(1, "no quantile columns"));
    }
    let c_day = col("daylight");

    let mut by_model: BTreeMap<String, ModelRows> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        if c_day.is_some_and(|c| &rec[c] == "0") {
            continue;
        }
        let valid = parse_time(&rec[c_valid]).ok_or_else(|| schema(row, "bad valid_time"))?;
        let y = observation(&obs, valid).ok_or_else(|| schema(row, "no observation at valid_time"))?;
        let num = |c: usize| rec[c].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| schema(row, "not a finite number"));
        let entry = by_model.entry(rec[c_model].to_string()).or_default();
        entry.point.push(num(c_point)?);
        entry.quantiles.push(q_cols.iter().map(|&c| num(c)).collect::<Result<_>>()?);
        entry.observed.push(y);
    }
    if by_model.is_empty() {
        return Err(Error::Empty("forecast rows"));
    }
    let mut reports = BTreeMap::new();
    let mut summary = Vec::new();
    for (model, r) in &by_model {
        let report = MetricReport {
            mae: mae(&r.point, &r.observed)?,
            rmse: rmse(&r.point, &r.observed)?,
            crps: crps_rows(&levels, &r.quantiles, &r.observed)?,
            n_samples: r.observed.len(),
        };
        summary.push(format!("{model}: MAE {:.4} RMSE {:.4} CRPS {:.4} ({} samples)", report.mae, report.rmse, report.crps, report.n_samples));
        reports.insert(model.clone(), report);
    }
    let mut files = OutputSet::new();
    files.add("evaluation.json", json_bytes(&reports)?);
    Ok(RunOutput { files, summary })
}

fn observation(obs: &TimeSeries, t: chrono::NaiveDateTime) -> Option<f64> {
    let offset = (t - obs.start()).num_seconds();
    let step = obs.step().num_seconds();
    if offset < 0 || offset % step != 0 {
        return None;
    }
    obs.values().get((offset / step) as usize).copied()
}
