use serde::{Deserialize, Serialize};

use super::epso::{epso_sample_with, EpsoParams, TrajectorySet};
use super::feasibility::{FeasibilityContext, FlexTrajectory};
use super::svdd::{svdd_classify, Label, SvddModel};
use super::vbattery::{vbattery_classify, VirtualBattery};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub model: String,
    /// Percent of feasible test trajectories labelled feasible; `None`
    /// when the set is empty.
    pub feasible_pct: Option<f64>,
    pub unfeasible_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub rows: Vec<AccuracyRow>,
    pub n_feasible: usize,
    pub n_unfeasible: usize,
}

impl AccuracyTable {
    pub fn row(&self, model: &str) -> Option<&AccuracyRow> {
        self.rows.iter().find(|r| r.model == model)
    }
}

fn percent<F: Fn(&[f64]) -> Result<Label>>(set: &[FlexTrajectory], expect: Label, f: F) -> Result<Option<f64>> {
    if set.is_empty() {
        return Ok(None);
    }
    let mut hits = 0usize;
    for t in set {
        if f(&t.deltas)? == expect {
            hits += 1;
        }
    }
    Ok(Some(100.0 * hits as f64 / set.len() as f64))
}

/// Percent correctly classified per surrogate and per class.
pub fn evaluate_surrogates(
    svdd: &SvddModel,
    vb: &VirtualBattery,
    feasible_test: &[FlexTrajectory],
    unfeasible_test: &[FlexTrajectory],
) -> Result<AccuracyTable> {
    let svdd_f = |x: &[f64]| svdd_classify(svdd, x);
    let vb_f = |x: &[f64]| vbattery_classify(vb, x);
    Ok(AccuracyTable {
        rows: vec![
            AccuracyRow {
                model: "SVDD".into(),
                feasible_pct: percent(feasible_test, Label::Feasible, svdd_f)?,
                unfeasible_pct: percent(unfeasible_test, Label::Unfeasible, svdd_f)?,
            },
            AccuracyRow {
                model: "VB".into(),
                feasible_pct: percent(feasible_test, Label::Feasible, vb_f)?,
                unfeasible_pct: percent(unfeasible_test, Label::Unfeasible, vb_f)?,
            },
        ],
        n_feasible: feasible_test.len(),
        n_unfeasible: unfeasible_test.len(),
    })
}

/// Labelled test sets for a trained trajectory set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSets {
    pub feasible: Vec<FlexTrajectory>,
    pub unfeasible: Vec<FlexTrajectory>,
}

/// Feasible test points come from an independent EPSO run (`seed + 1`);
/// unfeasible ones are those points scaled by `scale` that the checker
/// rejects.
pub fn build_test_sets(
    train: &TrajectorySet,
    ctx: &FeasibilityContext,
    k: usize,
    seed: u64,
    scale: f64,
    params: &EpsoParams,
) -> Result<TestSets> {
    let held_out = epso_sample_with(
        ctx.fleet(),
        &train.baseline,
        &train.pv_scenarios,
        train.alpha,
        k,
        seed.wrapping_add(1),
        params,
    )?;
    let mut feasible = Vec::new();
    let mut unfeasible = Vec::new();
    for t in held_out.trajectories {
        if ctx.check(&t)?.feasible {
            let scaled = FlexTrajectory::new(t.deltas.iter().map(|d| d * scale).collect());
            if !ctx.check(&scaled)?.feasible {
                unfeasible.push(scaled);
            }
            feasible.push(t);
        }
    }
    Ok(TestSets { feasible, unfeasible })
}
