use nalgebra::{DMatrix, DVector};

use super::admm::VarModel;
use crate::data::PanelSeries;
use crate::error::{Error, Result};

/// Iterated one-step forecasts `Ŷ_{t+1} = B·Z_{t+1}` on centered values.
///
/// `recent` is `n × m` in original units with `m ≥ p`, oldest column first;
/// only the last `p` columns are used. Returns `n × steps` in original units.
pub fn forecast_matrix(model: &VarModel, recent: &DMatrix<f64>, steps: usize) -> Result<DMatrix<f64>> {
    let (n, p) = (model.n(), model.p);
    if recent.nrows() != n || recent.ncols() < p {
        return Err(Error::Shape(format!(
            "recent window is {}×{}, need {n} rows and at least {p} columns",
            recent.nrows(),
            recent.ncols()
        )));
    }
    // history[0] is the most recent centered column
    let mut history: Vec<DVector<f64>> = (0..p)
        .map(|lag| recent.column(recent.ncols() - 1 - lag) - &model.means)
        .collect();
    let mut out = DMatrix::zeros(n, steps);
    let mut z = DVector::zeros(n * p);
    for s in 0..steps {
        for (lag, col) in history.iter().enumerate() {
            z.rows_mut(lag * n, n).copy_from(col);
        }
        let next = &model.b * &z;
        out.set_column(s, &(&next + &model.means));
        history.pop();
        history.insert(0, next);
    }
    Ok(out)
}

/// Continues `recent` by `steps` periods.
pub fn forecast_var(model: &VarModel, recent: &PanelSeries, steps: usize) -> Result<PanelSeries> {
    let m = recent.to_matrix();
    let out = forecast_matrix(model, &m, steps)?;
    let start = recent.start() + recent.step() * recent.len() as i32;
    PanelSeries::from_matrix(recent.ids().to_vec(), start, recent.step(), &out)
}
