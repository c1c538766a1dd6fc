use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::data::{crps_rows, improvement, mae, metric_report, rmse, uniform_quantile_grid, MetricReport, QuantileForecast, TimeSeries};
use crate::error::{Error, Result};
use crate::features::{assemble_design, fit_grid_pca, DesignInputs, FeatureMatrix, GridPca, ModelKind, NwpGrid, NwpVariable};
use crate::features::TemporalConfig;
use crate::gbt::{fit_quantile_gbt, predict_quantiles, GbtParams, QuantileGbtModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Days of history used for training, starting one day after the first
    /// NWP run so the previous run exists.
    pub train_days: usize,
    /// Days issued operationally at 00:00 after the training period.
    pub test_days: usize,
    pub horizon_hours: u32,
    /// Number of levels in the uniform quantile grid.
    pub quantiles: usize,
    pub n_pc: usize,
    pub gbt: GbtParams,
    pub temporal: TemporalConfig,
    pub models: Vec<ModelKind>,
    pub capacity_kw: f64,
    pub site: (f64, f64),
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            train_days: 40,
            test_days: 10,
            horizon_hours: 48,
            quantiles: 19,
            n_pc: 3,
            gbt: GbtParams::default(),
            temporal: TemporalConfig::default(),
            models: vec![ModelKind::Base, ModelKind::Temporal, ModelKind::Full],
            capacity_kw: 5.0,
            site: (41.15, -8.61),
        }
    }
}

/// Historical NWP plus the matching PV observations: the data the hub
/// serves to a HEMS on request.
#[derive(Clone, Debug)]
pub struct ForecastInputs {
    pub grid: NwpGrid,
    pub pv: TimeSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub level: f64,
    pub empirical: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub model: String,
    pub n_features: usize,
    pub n_train: usize,
    pub report: MetricReport,
    pub coverage: Vec<CoveragePoint>,
    /// Every ensemble's training loss was non-increasing per stage.
    pub train_loss_monotone: bool,
    #[serde(skip)]
    pub forecasts: Vec<QuantileForecast>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub model: String,
    pub mae: f64,
    pub rmse: f64,
    pub crps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastOutcome {
    pub models: Vec<ModelEvaluation>,
    /// Percent improvement over the base model.
    pub improvements: Vec<ImprovementRow>,
    /// Daylight samples scored per model.
    pub n_scored: usize,
    #[serde(skip)]
    pub observations: Vec<Vec<f64>>,
}

fn design_inputs<'a>(grid: &'a NwpGrid, cfg: &ForecastConfig, timestamps: Vec<NaiveDateTime>, cutoff: Option<NaiveDateTime>) -> DesignInputs<'a> {
    DesignInputs { grid, timestamps, target: cfg.site, temporal: cfg.temporal.clone(), cutoff }
}

fn obs_at(pv: &TimeSeries, t: NaiveDateTime) -> Result<f64> {
    let offset = t - pv.start();
    let step = pv.step().num_seconds();
    let idx = offset.num_seconds() / step;
    if offset.num_seconds() % step != 0 || idx < 0 || idx as usize >= pv.len() {
        return Err(Error::Misaligned(format!("no PV observation at {t}")));
    }
    Ok(pv.values()[idx as usize])
}

fn central_swflx(grid: &NwpGrid, site: (f64, f64), t: NaiveDateTime, cutoff: Option<NaiveDateTime>) -> f64 {
    let (Some(v), Some((run, lead))) = (grid.variable_index(NwpVariable::Swflx), grid.locate_issued_by(t, cutoff, 0)) else {
        return 0.0;
    };
    grid.get(run, lead, grid.nearest_point(site), v)
}

struct Trained {
    kind: ModelKind,
    model: QuantileGbtModel,
    pca: Option<GridPca>,
    n_train: usize,
}

fn train(kind: ModelKind, inputs: &ForecastInputs, cfg: &ForecastConfig, levels: &[f64], first: NaiveDateTime) -> Result<Trained> {
    let n = cfg.train_days * 24;
    let ts: Vec<NaiveDateTime> = (0..n as i64).map(|h| first + Duration::hours(h)).collect();
    let di = design_inputs(&inputs.grid, cfg, ts.clone(), None);
    let pca = if kind == ModelKind::Full {
        let rows: Vec<usize> = (0..n).collect();
        Some(fit_grid_pca(&di, &rows, cfg.n_pc)?)
    } else {
        None
    };
    let design = assemble_design(kind, &di, pca.as_ref())?;
    let keep = design.complete_rows();
    if keep.is_empty() {
        return Err(Error::Empty("training rows after feature trimming"));
    }
    let x = design.select_rows(&keep);
    let y = keep.iter().map(|&r| obs_at(&inputs.pv, ts[r])).collect::<Result<Vec<_>>>()?;
    let model = fit_quantile_gbt(&x, &y, levels, &cfg.gbt, cfg.capacity_kw)?;
    Ok(Trained { kind, model, pca, n_train: keep.len() })
}

fn forecast_issue(t: &Trained, inputs: &ForecastInputs, cfg: &ForecastConfig, issue: NaiveDateTime) -> Result<QuantileForecast> {
    // a margin around the horizon so lags, leads and windows exist
    let margin = 6i64;
    let h = cfg.horizon_hours as i64;
    let ts: Vec<NaiveDateTime> = (-margin..=h + margin).map(|k| issue + Duration::hours(k)).collect();
    let di = design_inputs(&inputs.grid, cfg, ts, Some(issue));
    let design = assemble_design(t.kind, &di, t.pca.as_ref())?;
    let rows: Vec<usize> = (1..=h).map(|k| (k + margin) as usize).collect();
    let x: FeatureMatrix = design.select_rows(&rows);
    if x.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Schema(format!(
            "NWP grid cannot supply every {}h feature for the run issued at {issue}",
            cfg.horizon_hours
        )));
    }
    predict_quantiles(&t.model, &x, issue, (1..=cfg.horizon_hours).collect())
}

fn coverage(levels: &[f64], rows: &[Vec<f64>], obs: &[f64]) -> Vec<CoveragePoint> {
    levels
        .iter()
        .enumerate()
        .map(|(j, &q)| CoveragePoint {
            level: q,
            empirical: rows.iter().zip(obs).filter(|(r, &o)| o <= r[j]).count() as f64 / obs.len().max(1) as f64,
        })
        .collect()
}

/// Runs the four hub phases for every configured model: feature retrieval
/// from the historical grid, temporal/spatial feature construction, GBT
/// training, and operational 48 h quantile forecasts issued daily at 00:00
/// during the test period. Scores use daylight hours only.
pub fn run_forecast(inputs: &ForecastInputs, cfg: &ForecastConfig) -> Result<ForecastOutcome> {
    if cfg.train_days == 0 || cfg.test_days == 0 || cfg.horizon_hours == 0 {
        return Err(Error::invalid("train_days, test_days and horizon_hours must be positive"));
    }
    if !cfg.models.contains(&ModelKind::Base) {
        return Err(Error::invalid("the base model is required as the reference"));
    }
    let levels = uniform_quantile_grid(cfg.quantiles);
    let first_run = *inputs.grid.runs().first().ok_or(Error::Empty("NWP runs"))?;
    let first = first_run + Duration::hours(24);
    let issues: Vec<NaiveDateTime> =
        (0..cfg.test_days as i64).map(|d| first + Duration::hours(24 * (cfg.train_days as i64 + d))).collect();

    let mut obs_rows = Vec::new();
    let mut mask = Vec::new();
    for &issue in &issues {
        let obs = (1..=cfg.horizon_hours as i64)
            .map(|k| obs_at(&inputs.pv, issue + Duration::hours(k)))
            .collect::<Result<Vec<_>>>()?;
        mask.extend((1..=cfg.horizon_hours as i64).zip(&obs).map(|(k, &o)| {
            o > 0.0 || central_swflx(&inputs.grid, cfg.site, issue + Duration::hours(k), Some(issue)) > 0.0
        }));
        obs_rows.push(obs);
    }
    let flat_obs: Vec<f64> = obs_rows.iter().flatten().zip(&mask).filter(|(_, &m)| m).map(|(o, _)| *o).collect();

    let mut models = Vec::new();
    for &kind in &cfg.models {
        let trained = train(kind, inputs, cfg, &levels, first)?;
        let forecasts = issues.iter().map(|&i| forecast_issue(&trained, inputs, cfg, i)).collect::<Result<Vec<_>>>()?;
        let mut point = Vec::new();
        let mut rows = Vec::new();
        for (fc, m) in forecasts.iter().flat_map(|f| (0..f.len()).map(move |h| (f, h))).zip(&mask) {
            if *m {
                point.push(fc.0.point[fc.1]);
                rows.push(fc.0.values[fc.1].clone());
            }
        }
        let report = metric_report(&point, &levels, &rows, &flat_obs)?;
        let monotone = std::iter::once(&trained.model.point)
            .chain(&trained.model.ensembles)
            .all(|e| e.train_loss.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        models.push(ModelEvaluation {
            model: kind.label().to_string(),
            n_features: trained.model.columns.len(),
            n_train: trained.n_train,
            report,
            coverage: coverage(&levels, &rows, &flat_obs),
            train_loss_monotone: monotone,
            forecasts,
        });
    }
    let base = models[cfg.models.iter().position(|&k| k == ModelKind::Base).unwrap()].report.clone();
    let improvements = models
        .iter()
        .filter(|m| m.model != ModelKind::Base.label())
        .map(|m| {
            Ok(ImprovementRow {
                model: m.model.clone(),
                mae: improvement(m.report.mae, base.mae)?,
                rmse: improvement(m.report.rmse, base.rmse)?,
                crps: improvement(m.report.crps, base.crps)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForecastOutcome { models, improvements, n_scored: flat_obs.len(), observations: obs_rows })
}

/// MAE, RMSE and CRPS of stored forecasts against observations.
pub fn score_forecasts(forecasts: &[QuantileForecast], obs: &[Vec<f64>]) -> Result<MetricReport> {
    if forecasts.len() != obs.len() {
        return Err(Error::LengthMismatch { expected: forecasts.len(), got: obs.len() });
    }
    let levels = forecasts.first().ok_or(Error::Empty("forecasts"))?.quantile_levels.clone();
    let point: Vec<f64> = forecasts.iter().flat_map(|f| f.point.iter().copied()).collect();
    let rows: Vec<Vec<f64>> = forecasts.iter().flat_map(|f| f.values.iter().cloned()).collect();
    let flat: Vec<f64> = obs.iter().flatten().copied().collect();
    Ok(MetricReport { mae: mae(&point, &flat)?, rmse: rmse(&point, &flat)?, crps: crps_rows(&levels, &rows, &flat)?, n_samples: flat.len() })
}
