use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weather variables taken from the NWP grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NwpVariable {
    /// Shortwave flux, W/m².
    Swflx,
    /// 2 m temperature, K.
    Temp,
    /// Low-level cloud cover.
    Cfl,
    /// Mid-level cloud cover.
    Cfm,
    /// High-level cloud cover.
    Cfh,
    /// Low and mid-level cloud cover.
    Cft,
}

impl NwpVariable {
    pub const ALL: [NwpVariable; 6] = [
        NwpVariable::Swflx,
        NwpVariable::Temp,
        NwpVariable::Cfl,
        NwpVariable::Cfm,
        NwpVariable::Cfh,
        NwpVariable::Cft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NwpVariable::Swflx => "swflx",
            NwpVariable::Temp => "temp",
            NwpVariable::Cfl => "cfl",
            NwpVariable::Cfm => "cfm",
            NwpVariable::Cfh => "cfh",
            NwpVariable::Cft => "cft",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn is_cloud_cover(self) -> bool {
        matches!(self, NwpVariable::Cfl | NwpVariable::Cfm | NwpVariable::Cfh | NwpVariable::Cft)
    }
}

/// Forecast fields indexed by `[run][lead][point][variable]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NwpGrid {
    runs: Vec<NaiveDateTime>,
    lead_times: Vec<u32>,
    points: Vec<(f64, f64)>,
    variables: Vec<NwpVariable>,
    data: Vec<f64>,
}

impl NwpGrid {
    /// Validates physical ranges; cloud covers are clipped into `[0, 1]`.
    pub fn new(
        runs: Vec<NaiveDateTime>,
        lead_times: Vec<u32>,
        points: Vec<(f64, f64)>,
        variables: Vec<NwpVariable>,
        mut data: Vec<f64>,
    ) -> Result<Self> {
        let expected = runs.len() * lead_times.len() * points.len() * variables.len();
        if data.len() != expected {
            return Err(Error::LengthMismatch { expected, got: data.len() });
        }
        if runs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("NWP runs must be strictly increasing in time"));
        }
        if lead_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("lead times must be strictly increasing"));
        }
        let nv = variables.len();
        for (i, v) in data.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite("NWP grid"));
            }
            match variables[i % nv] {
                var if var.is_cloud_cover() => *v = v.clamp(0.0, 1.0),
                NwpVariable::Swflx if *v < 0.0 => {
                    return Err(Error::invalid("negative shortwave flux"));
                }
                NwpVariable::Temp if *v <= 0.0 => {
                    return Err(Error::invalid("temperature must be positive (K)"));
                }
                _ => {}
            }
        }
        Ok(Self { runs, lead_times, points, variables, data })
    }

    pub fn runs(&self) -> &[NaiveDateTime] {
        &self.runs
    }

    pub fn lead_times(&self) -> &[u32] {
        &self.lead_times
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn variables(&self) -> &[NwpVariable] {
        &self.variables
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    fn index(&self, run: usize, lead: usize, point: usize, var: usize) -> usize {
        ((run * self.lead_times.len() + lead) * self.points.len() + point) * self.variables.len() + var
    }

    pub fn get(&self, run: usize, lead: usize, point: usize, var: usize) -> f64 {
        self.data[self.index(run, lead, point, var)]
    }

    pub fn variable_index(&self, var: NwpVariable) -> Option<usize> {
        self.variables.iter().position(|&v| v == var)
    }

    /// Point closest to `target` (squared lat/lon distance).
    pub fn nearest_point(&self, target: (f64, f64)) -> usize {
        let d = |p: &(f64, f64)| (p.0 - target.0).powi(2) + (p.1 - target.1).powi(2);
        (0..self.points.len())
            .min_by(|&a, &b| d(&self.points[a]).total_cmp(&d(&self.points[b])))
            .unwrap_or(0)
    }

    /// `(run, lead)` indices of the `rank`-th most recent run covering
    /// `valid` (rank 0 = freshest issued no later than `valid`).
    pub fn locate(&self, valid: NaiveDateTime, rank: usize) -> Option<(usize, usize)> {
        self.locate_issued_by(valid, None, rank)
    }

    /// Like [`NwpGrid::locate`] but ignores runs issued after `cutoff`, as
    /// when forecasting from the information available at `cutoff`.
    pub fn locate_issued_by(
        &self,
        valid: NaiveDateTime,
        cutoff: Option<NaiveDateTime>,
        rank: usize,
    ) -> Option<(usize, usize)> {
        let latest = cutoff.map_or(valid, |c| c.min(valid));
        let mut seen = 0;
        for run in (0..self.runs.len()).rev() {
            if self.runs[run] > latest {
                continue;
            }
            let lead_hours = (valid - self.runs[run]).num_hours();
            if (valid - self.runs[run]) != Duration::hours(lead_hours) {
                continue;
            }
            if let Some(lead) = self.lead_times.iter().position(|&l| l as i64 == lead_hours) {
                if seen == rank {
                    return Some((run, lead));
                }
                seen += 1;
            }
        }
        None
    }

    /// Values of `var` over all points for the given run and lead.
    pub fn field(&self, run: usize, lead: usize, var: usize) -> Vec<f64> {
        (0..self.points.len()).map(|p| self.get(run, lead, p, var)).collect()
    }
}
