//! Seeded synthetic data used by tests, the acceptance suite and the CLI
//! when no input files are given.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::PanelSeries;
use crate::error::{Error, Result};

pub(crate) fn epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2015, 5, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

/// Sparse, stable VAR(p) coefficients: a diagonal first lag plus a few
/// random cross terms, scaled so every row's absolute sum over all lags is
/// at most 0.8.
pub fn sparse_var_coefficients(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n * p);
    for i in 0..n {
        b[(i, i)] = rng.gen_range(0.3..0.6);
        for lag in 0..p {
            for j in 0..n {
                if (lag > 0 || j != i) && rng.gen_bool(0.25) {
                    b[(i, lag * n + j)] = rng.gen_range(-0.3..0.3);
                }
            }
        }
        let s: f64 = b.row(i).iter().map(|v: &f64| v.abs()).sum();
        if s > 0.8 {
            let mut row = b.row_mut(i);
            row *= 0.8 / s;
        }
    }
    b
}

/// Simulates an `n`-series VAR(p) of length `len` with unit Gaussian noise
/// and per-series offsets, after a burn-in of 200 steps.
pub fn simulate_var(n: usize, p: usize, len: usize, seed: u64) -> Result<PanelSeries> {
    if n == 0 || p == 0 || len == 0 {
        return Err(Error::invalid("n, p and length must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = sparse_var_coefficients(n, p, &mut rng);
    simulate_with(&b, p, len, &mut rng)
}

pub fn simulate_with(b: &DMatrix<f64>, p: usize, len: usize, rng: &mut ChaCha8Rng) -> Result<PanelSeries> {
    let n = b.nrows();
    if b.ncols() != n * p {
        return Err(Error::Shape("coefficients must be n × np".into()));
    }
    let offsets: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..3.0)).collect();
    let burn = 200;
    let mut hist: Vec<DVector<f64>> = vec![DVector::zeros(n); p];
    let mut out = DMatrix::zeros(n, len);
    let mut z = DVector::zeros(n * p);
    for t in 0..burn + len {
        for (lag, col) in hist.iter().enumerate() {
            z.rows_mut(lag * n, n).copy_from(col);
        }
        let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let next = b * &z + noise;
        hist.pop();
        hist.insert(0, next.clone());
        if t >= burn {
            for i in 0..n {
                out[(i, t - burn)] = next[i] + offsets[i];
            }
        }
    }
    let ids = (0..n).map(|i| format!("hems{}", i + 1)).collect();
    PanelSeries::from_matrix(ids, epoch(), Duration::hours(1), &out)
}

/// A household flexibility problem: fleet, expected net load and PV
/// scenarios over a short horizon.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlexInstance {
    pub fleet: crate::flex::DeviceFleet,
    pub base_load: Vec<f64>,
    pub baseline: Vec<f64>,
    pub pv_scenarios: Vec<Vec<f64>>,
}

/// Clear-sky shaped PV profile of `capacity_kw` over `horizon` hourly
/// periods starting at `first_hour`.
pub fn pv_profile(capacity_kw: f64, first_hour: usize, horizon: usize) -> Vec<f64> {
    (0..horizon)
        .map(|t| {
            let h = (first_hour + t) as f64 + 0.5;
            let x = (std::f64::consts::PI * (h - 6.0) / 14.0).sin();
            capacity_kw * x.max(0.0).powf(1.5)
        })
        .collect()
}

/// Random fleet with a water heater, a battery and one or two shiftables.
pub fn random_fleet(horizon: usize, rng: &mut ChaCha8Rng) -> crate::flex::DeviceFleet {
    use crate::flex::{BatteryConfig, DeviceFleet, EwhConfig, Shiftable};
    let capacity = rng.gen_range(4.0..10.0);
    let n_shift = rng.gen_range(1..=2);
    let shiftables = (0..n_shift)
        .map(|i| {
            let duration = rng.gen_range(1..=2);
            let earliest = rng.gen_range(0..horizon / 2);
            let latest_end = (earliest + duration + rng.gen_range(2..=horizon)).min(horizon);
            let baseline_start = rng.gen_range(earliest..=latest_end - duration);
            Shiftable {
                name: format!("load{}", i + 1),
                power_kw: (rng.gen_range(0.5..2.0f64) * 10.0).round() / 10.0,
                duration,
                earliest_start: earliest,
                latest_end,
                baseline_start,
            }
        })
        .collect();
    DeviceFleet {
        ewh: Some(EwhConfig {
            volume_l: rng.gen_range(100.0..200.0),
            power_kw: rng.gen_range(1.5..3.0),
            efficiency: 0.95,
            loss_w_per_k: rng.gen_range(1.5..3.0),
            t_min: 45.0,
            t_max: 75.0,
            t_set: 55.0,
            t_init: rng.gen_range(50.0..60.0),
            t_inlet: 15.0,
            t_ambient: 20.0,
            draws_l_per_h: (0..horizon).map(|_| if rng.gen_bool(0.3) { rng.gen_range(5.0..40.0) } else { 0.0 }).collect(),
        }),
        battery: Some(BatteryConfig {
            capacity_kwh: capacity,
            p_charge_kw: capacity / 3.0,
            p_discharge_kw: capacity / 3.0,
            eta_charge: rng.gen_range(0.9..0.98),
            eta_discharge: rng.gen_range(0.9..0.98),
            soc_min: 0.1 * capacity,
            soc_max: capacity,
            soc_init: rng.gen_range(0.3..0.7) * capacity,
        }),
        shiftables,
        pv_capacity_kw: rng.gen_range(3.0..6.0),
        dt_h: 1.0,
    }
}

/// Seeded flexibility instance: 8 hourly periods from 08:00 and `scenarios`
/// PV realisations around a clear-sky profile.
pub fn flex_instance(seed: u64, horizon: usize, scenarios: usize) -> Result<FlexInstance> {
    if horizon < 2 || scenarios == 0 {
        return Err(Error::invalid("need a horizon of at least 2 and one scenario"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fleet = random_fleet(horizon, &mut rng);
    let clear = pv_profile(fleet.pv_capacity_kw, 8, horizon);
    let pv_scenarios: Vec<Vec<f64>> = (0..scenarios)
        .map(|_| {
            let level = rng.gen_range(0.3..1.0);
            clear.iter().map(|c| (c * (level + 0.15 * rng.sample::<f64, _>(StandardNormal))).clamp(0.0, *c)).collect()
        })
        .collect();
    let base_load: Vec<f64> = (0..horizon).map(|_| rng.gen_range(0.3..1.2)).collect();
    let mut device_load = vec![0.0; horizon];
    if let Some(e) = &fleet.ewh {
        let mut temp = e.t_init;
        for (t, load) in device_load.iter_mut().enumerate() {
            let draw = e.draws_l_per_h.get(t).copied().unwrap_or(0.0);
            let u = e.duty_for(temp, e.t_set, draw, fleet.dt_h).clamp(0.0, 1.0);
            temp = e.step(temp, u, draw, fleet.dt_h);
            *load += u * e.power_kw;
        }
    }
    for s in &fleet.shiftables {
        s.add_profile(s.baseline_start, 1.0, &mut device_load);
    }
    let n = scenarios as f64;
    let baseline = (0..horizon)
        .map(|t| base_load[t] + device_load[t] - pv_scenarios.iter().map(|s| s[t]).sum::<f64>() / n)
        .collect();
    Ok(FlexInstance { fleet, base_load, baseline, pv_scenarios })
}

/// Synthetic site with hourly PV observations and a daily-issued NWP grid.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PvDataset {
    pub grid: crate::features::NwpGrid,
    pub site: (f64, f64),
    pub capacity_kw: f64,
    pub pv: crate::data::TimeSeries,
    /// Clear-sky production, kW, aligned with `pv`.
    pub clear_sky: Vec<f64>,
}

/// Longest lead in the synthetic grid: a 48 h forecast from the latest run
/// plus the previous day's run and a ±5 h variance window.
pub const SYNTH_MAX_LEAD: u32 = 78;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Seeded PV plant and 3×3 NWP grid over `days` days. Cloudiness follows a
/// latent AR(1) process; every grid point sees it with its own noise, so
/// the spatial mean is a better predictor than the nearest point alone.
pub fn pv_nwp_dataset(seed: u64, days: usize) -> Result<PvDataset> {
    use crate::features::{NwpGrid, NwpVariable};
    if days < 3 {
        return Err(Error::invalid("need at least three days"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let capacity = 5.0;
    let site = (41.15, -8.61);
    let points: Vec<(f64, f64)> = (0..9).map(|i| (site.0 + 0.1 * (i / 3) as f64 - 0.1, site.1 + 0.1 * (i % 3) as f64 - 0.1)).collect();
    let hours = days * 24 + SYNTH_MAX_LEAD as usize + 1;
    let start = epoch();

    let mut z = 0.0;
    let cloud: Vec<f64> = (0..hours)
        .map(|_| {
            z = 0.92 * z + 0.5 * rng.sample::<f64, _>(StandardNormal);
            sigmoid(1.5 * z - 0.3)
        })
        .collect();
    let irradiance = |h: usize| -> f64 {
        let hod = (h % 24) as f64 + 0.5;
        let x = (std::f64::consts::PI * (hod - 6.0) / 13.0).sin();
        1000.0 * x.max(0.0).powf(1.2)
    };
    let clear_sky: Vec<f64> = (0..hours).map(|h| capacity * irradiance(h) / 1000.0).collect();
    let pv: Vec<f64> = (0..hours)
        .map(|h| {
            if clear_sky[h] == 0.0 {
                return 0.0;
            }
            let noise = 0.03 * capacity * rng.sample::<f64, _>(StandardNormal);
            (clear_sky[h] * (1.0 - 0.8 * cloud[h]) + noise).clamp(0.0, capacity)
        })
        .collect();

    let vars = NwpVariable::ALL.to_vec();
    let leads: Vec<u32> = (0..=SYNTH_MAX_LEAD).collect();
    let mut data = Vec::with_capacity(days * leads.len() * points.len() * vars.len());
    for run in 0..days {
        for &lead in &leads {
            let h = run * 24 + lead as usize;
            let sigma = 0.08 + 0.003 * lead as f64;
            let run_error = sigma * rng.sample::<f64, _>(StandardNormal);
            for _ in &points {
                let local = 0.3 * rng.sample::<f64, _>(StandardNormal);
                let cft = (cloud[h] + run_error + local).clamp(0.0, 1.0);
                for &var in &vars {
                    let v = match var {
                        NwpVariable::Swflx => irradiance(h) * (1.0 - 0.8 * cft),
                        NwpVariable::Temp => {
                            let hod = (h % 24) as f64;
                            288.0 + 5.0 * (std::f64::consts::PI * (hod - 9.0) / 12.0).sin() - 3.0 * cloud[h]
                                + 0.5 * rng.sample::<f64, _>(StandardNormal)
                        }
                        NwpVariable::Cft => cft,
                        _ => (cft * rng.gen_range(0.5..1.0) + 0.05 * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0),
                    };
                    data.push(v);
                }
            }
        }
    }
    let runs = (0..days).map(|d| start + Duration::hours(24 * d as i64)).collect();
    let grid = NwpGrid::new(runs, leads, points, vars, data)?;
    Ok(PvDataset {
        grid,
        site,
        capacity_kw: capacity,
        pv: crate::data::TimeSeries::hourly(start, pv)?,
        clear_sky,
    })
}

/// Scheduling problem for one household day.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScheduleInstance {
    pub fleet: crate::flex::DeviceFleet,
    pub tariff: crate::scheduler::Tariff,
    pub pv: Vec<f64>,
    pub base_load: Vec<f64>,
}

/// Seeded day with a three-level time-of-use tariff, a PV forecast and a
/// random fleet (the battery is dropped: scheduling leaves it idle).
pub fn schedule_instance(seed: u64, horizon: usize) -> Result<ScheduleInstance> {
    if horizon < 4 {
        return Err(Error::invalid("horizon must be at least 4 periods"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fleet = random_fleet(horizon, &mut rng);
    fleet.battery = None;
    let n_extra = rng.gen_range(0..=3);
    for _ in 0..n_extra {
        let duration = rng.gen_range(1..=3);
        let earliest = rng.gen_range(0..horizon - duration);
        let latest_end = rng.gen_range(earliest + duration..=horizon);
        fleet.shiftables.push(crate::flex::Shiftable {
            name: format!("load{}", fleet.shiftables.len() + 1),
            power_kw: (rng.gen_range(0.3..2.5f64) * 10.0).round() / 10.0,
            duration,
            earliest_start: earliest,
            latest_end,
            baseline_start: earliest,
        });
    }
    let prices = (0..horizon)
        .map(|t| match t % 24 {
            0..=6 => 0.10,
            18..=21 => 0.25,
            _ => 0.17,
        })
        .collect();
    let pv = pv_profile(fleet.pv_capacity_kw, 0, horizon);
    let base_load = (0..horizon).map(|_| rng.gen_range(0.2..1.0)).collect();
    Ok(ScheduleInstance { fleet, tariff: crate::scheduler::Tariff { prices, feed_in: 0.0 }, pv, base_load })
}
