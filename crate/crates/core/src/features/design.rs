use chrono::NaiveDateTime;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use super::nwp::{NwpGrid, NwpVariable};
use super::pca::{apply_pca, fit_pca, PcaModel};
use super::transforms::{seasonal_features, spatial_features, temporal_features, TemporalConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Calendar plus NWP at the grid point nearest the site.
    Base,
    /// Base plus temporal information at the site.
    Temporal,
    /// Temporal plus spatial statistics and PCA scores over the grid.
    Full,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Base => "base",
            ModelKind::Temporal => "T",
            ModelKind::Full => "F",
        }
    }
}

/// Everything needed to turn an [`NwpGrid`] into predictors for a site.
#[derive(Clone, Debug)]
pub struct DesignInputs<'a> {
    pub grid: &'a NwpGrid,
    /// Contiguous hourly valid times.
    pub timestamps: Vec<NaiveDateTime>,
    pub target: (f64, f64),
    pub temporal: TemporalConfig,
    /// Latest run usable; `None` takes the freshest run per valid time.
    pub cutoff: Option<NaiveDateTime>,
}

/// Fitted per-variable PCA over the grid points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPca {
    pub models: Vec<(NwpVariable, PcaModel)>,
}

impl DesignInputs<'_> {
    fn fields(&self, rank: usize) -> Vec<(NwpVariable, Vec<Vec<f64>>)> {
        let np = self.grid.n_points();
        self.grid
            .variables()
            .iter()
            .enumerate()
            .map(|(vi, &var)| {
                let rows = self
                    .timestamps
                    .iter()
                    .map(|&t| match self.grid.locate_issued_by(t, self.cutoff, rank) {
                        Some((run, lead)) => self.grid.field(run, lead, vi),
                        None => vec![f64::NAN; np],
                    })
                    .collect();
                (var, rows)
            })
            .collect()
    }

    fn central(&self, fields: &[(NwpVariable, Vec<Vec<f64>>)]) -> Vec<(String, Vec<f64>)> {
        let p = self.grid.nearest_point(self.target);
        fields
            .iter()
            .map(|(var, rows)| (var.name().to_string(), rows.iter().map(|r| r[p]).collect()))
            .collect()
    }
}

/// Fits one PCA per NWP variable on the rows listed in `rows`.
pub fn fit_grid_pca(inputs: &DesignInputs<'_>, rows: &[usize], n_pc: usize) -> Result<GridPca> {
    let fields = inputs.fields(0);
    let models = fields
        .par_iter()
        .map(|(var, field)| {
            let usable: Vec<&Vec<f64>> = rows
                .iter()
                .map(|&r| &field[r])
                .filter(|r| r.iter().all(|v| v.is_finite()))
                .collect();
            if usable.is_empty() {
                return Err(Error::Empty("no complete grid rows to fit PCA"));
            }
            let np = usable[0].len();
            let m = DMatrix::from_fn(usable.len(), np, |i, j| usable[i][j]);
            Ok((*var, fit_pca(&m, n_pc)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridPca { models })
}

/// Builds the predictor table for `kind`. Rows keep the order of
/// `inputs.timestamps`; rows that cannot be completed contain NaN and should
/// be removed with [`FeatureMatrix::drop_incomplete_rows`].
pub fn assemble_design(
    kind: ModelKind,
    inputs: &DesignInputs<'_>,
    pca: Option<&GridPca>,
) -> Result<FeatureMatrix> {
    let ts = &inputs.timestamps;
    let fields = inputs.fields(0);
    let central = inputs.central(&fields);

    let mut design = seasonal_features(ts).hconcat(&FeatureMatrix::from_columns(ts.clone(), central.clone())?)?;
    if kind == ModelKind::Base {
        return Ok(design);
    }

    let previous = inputs.central(&inputs.fields(1));
    design = design.hconcat(&temporal_features(ts, &central, &previous, &inputs.temporal)?)?;
    if kind == ModelKind::Temporal {
        return Ok(design);
    }

    let pca = pca.ok_or_else(|| Error::invalid("full design requires fitted grid PCA"))?;
    let named: Vec<(String, Vec<Vec<f64>>)> =
        fields.iter().map(|(v, rows)| (v.name().to_string(), rows.clone())).collect();
    design = design.hconcat(&spatial_features(ts, &named, inputs.grid.points(), inputs.target)?)?;

    let mut pc_cols = Vec::new();
    for (var, model) in &pca.models {
        let (_, rows) = fields
            .iter()
            .find(|(v, _)| v == var)
            .ok_or_else(|| Error::Schema(format!("grid lacks variable {}", var.name())))?;
        let np = inputs.grid.n_points();
        let m = DMatrix::from_fn(rows.len(), np, |i, j| rows[i][j]);
        let scores = apply_pca(model, &m)?;
        for k in 0..model.n_components() {
            pc_cols.push((format!("{}_pc{}", var.name(), k + 1), scores.column(k).iter().copied().collect()));
        }
    }
    design.hconcat(&FeatureMatrix::from_columns(ts.clone(), pc_cols)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn t(h: i64) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2016, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap() + Duration::hours(h)
    }

    fn toy_grid(runs: usize) -> NwpGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let leads: Vec<u32> = (0..48).collect();
        let points = vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];
        let vars = NwpVariable::ALL.to_vec();
        let n = runs * leads.len() * points.len() * vars.len();
        let data = (0..n)
            .map(|i| match vars[i % vars.len()] {
                NwpVariable::Temp => 280.0 + rng.gen_range(0.0..10.0),
                NwpVariable::Swflx => rng.gen_range(0.0..800.0),
                _ => rng.gen_range(0.0..1.0),
            })
            .collect();
        NwpGrid::new((0..runs).map(|r| t(24 * r as i64)).collect(), leads, points, vars, data).unwrap()
    }

    fn inputs(grid: &NwpGrid, n: usize, windows: Vec<usize>) -> DesignInputs<'_> {
        DesignInputs {
            grid,
            timestamps: (0..n as i64).map(|h| t(24 + h)).collect(),
            target: (0.4, 0.4),
            temporal: TemporalConfig { offsets: vec![-2, -1, 1, 2], var_windows: windows },
            cutoff: None,
        }
    }

    #[test]
    fn base_has_calendar_plus_six_nwp_columns() {
        let g = toy_grid(3);
        let d = assemble_design(ModelKind::Base, &inputs(&g, 10, vec![3]), None).unwrap();
        assert_eq!(d.n_cols(), 2 + 6);
    }

    #[test]
    fn designs_are_nested() {
        let g = toy_grid(3);
        let inp = inputs(&g, 30, vec![3, 7, 11]);
        let rows: Vec<usize> = (0..30).collect();
        let pca = fit_grid_pca(&inp, &rows, 3).unwrap();
        let cols = |k| -> HashSet<String> {
            assemble_design(k, &inp, Some(&pca)).unwrap().columns().iter().cloned().collect()
        };
        let (b, tm, f) = (cols(ModelKind::Base), cols(ModelKind::Temporal), cols(ModelKind::Full));
        assert!(b.is_subset(&tm) && tm.is_subset(&f));
        assert!(f.contains("swflx_pc3") && f.contains("cft_sstd") && tm.contains("temp_prevrun"));
    }

    #[test]
    fn usable_rows_after_trimming() {
        // 10 samples, offsets ±2 and a 3-wide window: first two and last
        // two rows lack a lag or a lead, leaving 6.
        let g = toy_grid(3);
        let d = assemble_design(ModelKind::Temporal, &inputs(&g, 10, vec![3]), None).unwrap();
        assert_eq!(d.n_rows(), 10);
        assert_eq!(d.drop_incomplete_rows().n_rows(), 6);
    }

    #[test]
    fn full_requires_pca() {
        let g = toy_grid(3);
        assert!(assemble_design(ModelKind::Full, &inputs(&g, 10, vec![3]), None).is_err());
    }
}
