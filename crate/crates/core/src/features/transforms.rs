use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};

/// Month-of-year (1–12) and hour-of-day (0–23) columns.
pub fn seasonal_features(timestamps: &[NaiveDateTime]) -> FeatureMatrix {
    let month = timestamps.iter().map(|t| t.month() as f64).collect();
    let hour = timestamps.iter().map(|t| t.hour() as f64).collect();
    FeatureMatrix::from_columns(timestamps.to_vec(), vec![("month".into(), month), ("hour".into(), hour)])
        .expect("two distinct, equally long columns")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalConfig {
    /// Negative offsets are lags, positive are leads (hours).
    pub offsets: Vec<i32>,
    /// Odd window lengths for the centered moving variance.
    pub var_windows: Vec<usize>,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self { offsets: vec![-2, -1, 1, 2], var_windows: vec![3, 7, 11] }
    }
}

/// Sample variance of a centered window, NaN where it would run off the
/// ends of the series.
fn centered_variance(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..x.len())
        .map(|t| {
            if t < half || t + half >= x.len() {
                return f64::NAN;
            }
            let w = &x[t - half..=t + half];
            let mean = w.iter().sum::<f64>() / window as f64;
            w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (window - 1) as f64
        })
        .collect()
}

fn shifted(x: &[f64], offset: i32) -> Vec<f64> {
    (0..x.len() as i64)
        .map(|t| {
            let s = t + offset as i64;
            if s < 0 || s >= x.len() as i64 {
                f64::NAN
            } else {
                x[s as usize]
            }
        })
        .collect()
}

/// Lags/leads, centered moving variances and previous-run copies of NWP
/// series at the HEMS location.
///
/// `series` and `previous_run` hold `(variable name, values)` aligned with
/// `timestamps`. Edge rows that cannot be computed are NaN.
pub fn temporal_features(
    timestamps: &[NaiveDateTime],
    series: &[(String, Vec<f64>)],
    previous_run: &[(String, Vec<f64>)],
    config: &TemporalConfig,
) -> Result<FeatureMatrix> {
    let n = timestamps.len();
    for &w in &config.var_windows {
        if w < 3 || w % 2 == 0 {
            return Err(Error::invalid(format!("variance window {w} must be odd and at least 3")));
        }
        if w > n {
            return Err(Error::invalid(format!("variance window {w} longer than series ({n})")));
        }
    }
    if config.offsets.contains(&0) {
        return Err(Error::invalid("offset 0 duplicates the raw value"));
    }
    let mut cols = Vec::new();
    for (name, x) in series {
        if x.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: x.len() });
        }
        for &o in &config.offsets {
            let label = if o < 0 { format!("{name}_lag{}", -o) } else { format!("{name}_lead{o}") };
            cols.push((label, shifted(x, o)));
        }
        for &w in &config.var_windows {
            cols.push((format!("{name}_var{w}"), centered_variance(x, w)));
        }
    }
    for (name, x) in previous_run {
        if x.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: x.len() });
        }
        cols.push((format!("{name}_prevrun"), x.clone()));
    }
    FeatureMatrix::from_columns(timestamps.to_vec(), cols)
}

/// Sample standard deviation across grid points.
pub fn spatial_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid("spatial statistics need at least two grid points"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

const IDW_POWER: i32 = 2;
const IDW_EPSILON: f64 = 1e-6;

/// Inverse-distance weighted mean centred on `target`; distances are floored
/// at 1e-6 so a coincident point dominates instead of dividing by zero.
pub fn idw_average(values: &[f64], points: &[(f64, f64)], target: (f64, f64)) -> Result<f64> {
    if values.len() != points.len() {
        return Err(Error::LengthMismatch { expected: points.len(), got: values.len() });
    }
    if values.is_empty() {
        return Err(Error::Empty("grid points"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, p) in values.iter().zip(points) {
        let d = ((p.0 - target.0).powi(2) + (p.1 - target.1).powi(2)).sqrt().max(IDW_EPSILON);
        let w = d.powi(-IDW_POWER);
        num += w * v;
        den += w;
    }
    Ok(num / den)
}

/// Per-row spatial standard deviation and IDW average of each field.
///
/// `fields` holds `(variable name, values[time][point])`.
pub fn spatial_features(
    timestamps: &[NaiveDateTime],
    fields: &[(String, Vec<Vec<f64>>)],
    points: &[(f64, f64)],
    target: (f64, f64),
) -> Result<FeatureMatrix> {
    if points.len() < 2 {
        return Err(Error::invalid("spatial features need at least two grid points"));
    }
    let mut cols = Vec::new();
    for (name, rows) in fields {
        if rows.len() != timestamps.len() {
            return Err(Error::LengthMismatch { expected: timestamps.len(), got: rows.len() });
        }
        let mut std = Vec::with_capacity(rows.len());
        let mut avg = Vec::with_capacity(rows.len());
        for r in rows {
            if r.iter().any(|v| !v.is_finite()) {
                std.push(f64::NAN);
                avg.push(f64::NAN);
                continue;
            }
            std.push(spatial_std(r)?);
            avg.push(idw_average(r, points, target)?);
        }
        cols.push((format!("{name}_sstd"), std));
        cols.push((format!("{name}_swavg"), avg));
    }
    FeatureMatrix::from_columns(timestamps.to_vec(), cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hours(n: usize) -> Vec<NaiveDateTime> {
        let t0 = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        (0..n).map(|h| t0 + Duration::hours(h as i64)).collect()
    }

    #[test]
    fn seasonal_calendar_reads() {
        let t = NaiveDate::from_ymd_opt(2015, 6, 15).unwrap().and_hms_opt(12, 0, 0).unwrap();
        let m = seasonal_features(&[t, hours(1)[0]]);
        assert_eq!(m.row(0), &[6.0, 12.0]);
        assert_eq!(m.row(1), &[1.0, 0.0]);
        let two_days = seasonal_features(&hours(48));
        let hour = two_days.column("hour").unwrap();
        for (i, h) in hour.iter().enumerate() {
            assert_eq!(*h, (i % 24) as f64);
        }
    }

    #[test]
    fn centered_variance_hand_value() {
        let v = centered_variance(&[0.0, 1.0, 2.0, 3.0, 4.0], 3);
        assert_eq!(v[2], 1.0);
        assert!(v[0].is_nan() && v[4].is_nan());
    }

    #[test]
    fn constant_series_has_zero_variance() {
        let cfg = TemporalConfig::default();
        let m = temporal_features(&hours(30), &[("swflx".into(), vec![5.0; 30])], &[], &cfg).unwrap();
        for w in [3, 7, 11] {
            let col = m.column(&format!("swflx_var{w}")).unwrap();
            assert!(col.iter().filter(|v| v.is_finite()).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn lag_column_is_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..40).map(|_| rng.gen()).collect();
        let m = temporal_features(&hours(40), &[("temp".into(), x.clone())], &[], &TemporalConfig::default())
            .unwrap();
        let lag1 = m.column("temp_lag1").unwrap();
        let lead2 = m.column("temp_lead2").unwrap();
        assert!(lag1[0].is_nan());
        for t in 1..40 {
            assert_eq!(lag1[t], x[t - 1]);
        }
        for t in 0..38 {
            assert_eq!(lead2[t], x[t + 2]);
        }
    }

    #[test]
    fn variance_window_uses_only_neighbourhood() {
        let mut x = vec![0.0; 30];
        x[10] = 100.0;
        let m = temporal_features(&hours(30), &[("s".into(), x)], &[], &TemporalConfig::default()).unwrap();
        let v3 = m.column("s_var3").unwrap();
        let v7 = m.column("s_var7").unwrap();
        assert_eq!(v3[12], 0.0);
        assert!(v3[11] > 0.0 && v3[9] > 0.0);
        assert_eq!(v7[14], 0.0);
        assert!(v7[13] > 0.0);
    }

    #[test]
    fn temporal_errors() {
        let bad_even = TemporalConfig { offsets: vec![-1], var_windows: vec![4] };
        assert!(temporal_features(&hours(10), &[("s".into(), vec![0.0; 10])], &[], &bad_even).is_err());
        let too_long = TemporalConfig { offsets: vec![-1], var_windows: vec![11] };
        assert!(temporal_features(&hours(5), &[("s".into(), vec![0.0; 5])], &[], &too_long).is_err());
    }

    #[test]
    fn spatial_hand_cases() {
        let pts = [(0.0, 0.0), (0.0, 2.0), (2.0, 0.0), (2.0, 2.0)];
        assert_eq!(spatial_std(&[3.0; 4]).unwrap(), 0.0);
        assert!((idw_average(&[3.0; 4], &pts, (0.7, 1.3)).unwrap() - 3.0).abs() < 1e-12);
        let two = [(0.0, 0.0), (0.0, 2.0)];
        assert!((idw_average(&[1.0, 3.0], &two, (0.0, 1.0)).unwrap() - 2.0).abs() < 1e-12);
        // coincident point dominates through the epsilon floor
        let at = idw_average(&[1.0, 3.0], &two, (0.0, 0.0)).unwrap();
        assert!((at - 1.0).abs() < 1e-9);
        assert!(spatial_std(&[1.0]).is_err());
    }

    #[test]
    fn spatial_std_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..800.0)).collect();
        let mean = v.iter().sum::<f64>() / 4.0;
        let mut ss = 0.0;
        for x in &v {
            ss += (x - mean) * (x - mean);
        }
        let oracle = (ss / 3.0).sqrt();
        assert!((spatial_std(&v).unwrap() - oracle).abs() < 1e-12);
        let shifted: Vec<f64> = v.iter().map(|x| x + 250.0).collect();
        assert!((spatial_std(&shifted).unwrap() - oracle).abs() < 1e-9);
    }
}
