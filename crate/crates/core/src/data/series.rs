use chrono::{Duration, NaiveDateTime};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ensure_finite;
use crate::error::{Error, Result};

/// A fixed-step series of power values (kW).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    start: NaiveDateTime,
    step_secs: i64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start: NaiveDateTime, step: Duration, values: Vec<f64>) -> Result<Self> {
        let step_secs = step.num_seconds();
        if step_secs <= 0 {
            return Err(Error::invalid("time step must be positive"));
        }
        ensure_finite(&values, "time series")?;
        Ok(Self { start, step_secs, values })
    }

    /// Hourly series starting at `start`.
    pub fn hourly(start: NaiveDateTime, values: Vec<f64>) -> Result<Self> {
        Self::new(start, Duration::hours(1), values)
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn step(&self) -> Duration {
        Duration::seconds(self.step_secs)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::seconds(self.step_secs * index as i64)
    }

    pub fn timestamps(&self) -> Vec<NaiveDateTime> {
        (0..self.len()).map(|i| self.timestamp(i)).collect()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    fn aligned_with(&self, other: &TimeSeries) -> bool {
        self.start == other.start && self.step_secs == other.step_secs && self.len() == other.len()
    }
}

/// `n` aligned series, one per HEMS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelSeries {
    ids: Vec<String>,
    series: Vec<TimeSeries>,
}

impl PanelSeries {
    pub fn new(ids: Vec<String>, series: Vec<TimeSeries>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Empty("panel needs at least one series"));
        }
        if ids.len() != series.len() {
            return Err(Error::LengthMismatch { expected: series.len(), got: ids.len() });
        }
        let first = &series[0];
        for (id, s) in ids.iter().zip(&series).skip(1) {
            if !first.aligned_with(s) {
                return Err(Error::Misaligned(format!("series '{id}' differs from '{}'", ids[0])));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::invalid(format!("duplicate series id '{dup}'")));
        }
        Ok(Self { ids, series })
    }

    /// Builds a panel from an `n × T` matrix (one row per node).
    pub fn from_matrix(
        ids: Vec<String>,
        start: NaiveDateTime,
        step: Duration,
        matrix: &DMatrix<f64>,
    ) -> Result<Self> {
        let series = (0..matrix.nrows())
            .map(|i| TimeSeries::new(start, step, matrix.row(i).iter().copied().collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ids, series)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn n(&self) -> usize {
        self.series.len()
    }

    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> NaiveDateTime {
        self.series[0].start()
    }

    pub fn step(&self) -> Duration {
        self.series[0].step()
    }

    pub fn timestamps(&self) -> Vec<NaiveDateTime> {
        self.series[0].timestamps()
    }

    /// `n × T` matrix, row `i` holding series `i`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.len(), |i, t| self.series[i].values()[t])
    }

    /// Sub-panel restricted to the column range `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.len() {
            return Err(Error::invalid(format!("bad slice {from}..{to} of length {}", self.len())));
        }
        let start = self.series[0].timestamp(from);
        let series = self
            .series
            .iter()
            .map(|s| TimeSeries::new(start, s.step(), s.values()[from..to].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.ids.clone(), series)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn t0() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2016, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    #[test]
    fn rejects_non_positive_step_and_nan() {
        assert!(TimeSeries::new(t0(), Duration::zero(), vec![1.0]).is_err());
        assert!(TimeSeries::hourly(t0(), vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn panel_rejects_misaligned_members() {
        let a = TimeSeries::hourly(t0(), vec![1.0, 2.0]).unwrap();
        let b = TimeSeries::hourly(t0() + Duration::hours(1), vec![1.0, 2.0]).unwrap();
        let c = TimeSeries::hourly(t0(), vec![1.0, 2.0, 3.0]).unwrap();
        let d = TimeSeries::new(t0(), Duration::minutes(30), vec![1.0, 2.0]).unwrap();
        for bad in [b, c, d] {
            let err = PanelSeries::new(vec!["a".into(), "b".into()], vec![a.clone(), bad]);
            assert!(matches!(err, Err(Error::Misaligned(_))));
        }
        assert!(PanelSeries::new(vec![], vec![]).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = PanelSeries::from_matrix(vec!["x".into(), "y".into()], t0(), Duration::hours(1), &m)
            .unwrap();
        assert_eq!(p.to_matrix(), m);
        let s = p.slice(1, 3).unwrap();
        assert_eq!(s.start(), t0() + Duration::hours(1));
        assert_eq!(s.series()[1].values(), &[5.0, 6.0]);
    }
}
