use serde::{Deserialize, Serialize};

use super::epso::TrajectorySet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmoidKernel {
    pub gamma: f64,
    pub coef0: f64,
}

impl SigmoidKernel {
    /// γ = 1/dim, c = 0.
    pub fn for_dimension(dim: usize) -> Self {
        Self { gamma: 1.0 / dim.max(1) as f64, coef0: 0.0 }
    }

    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        (self.gamma * dot + self.coef0).tanh()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvddParams {
    pub nu: f64,
    pub kernel: SigmoidKernel,
    pub max_iter: usize,
    pub tol: f64,
}

impl SvddParams {
    pub fn new(nu: f64, kernel: SigmoidKernel) -> Self {
        Self { nu, kernel, max_iter: 100_000, tol: 1e-11 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvddModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub betas: Vec<f64>,
    pub kernel: SigmoidKernel,
    pub radius2_threshold: f64,
    /// Σ_ij β_i β_j k(x_i, x_j), fixed once the model is fit.
    pub center_norm2: f64,
    pub nu: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Feasible,
    Unfeasible,
}

impl Label {
    pub fn from_feasible(feasible: bool) -> Self {
        if feasible {
            Label::Feasible
        } else {
            Label::Unfeasible
        }
    }
}

/// Dual objective `Σβ_i − βᵀKβ`; the self-similarity term is the constant
/// 1 used by the radius formula, so `Σβ_i = 1` reduces it to `1 − βᵀKβ`.
pub fn svdd_dual_objective(gram: &[Vec<f64>], beta: &[f64]) -> f64 {
    let quad: f64 = beta
        .iter()
        .enumerate()
        .map(|(i, bi)| bi * gram[i].iter().zip(beta).map(|(k, bj)| k * bj).sum::<f64>())
        .sum();
    beta.iter().sum::<f64>() - quad
}

/// Euclidean projection onto `{β : Σβ = 1, 0 ≤ β ≤ cap}` by bisection on
/// the shift.
pub(crate) fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let mass = |tau: f64| v.iter().map(|x| (x - tau).clamp(0.0, cap)).sum::<f64>();
    let mut lo = v.iter().copied().fold(f64::INFINITY, f64::min) - cap;
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).clamp(0.0, cap)).collect()
}

/// Largest |eigenvalue| of the Gram matrix restricted to directions that
/// keep `Σβ` fixed, by power iteration on `P K P` with `P = I − 11ᵀ/n`.
fn tangent_spectral_radius(gram: &[Vec<f64>]) -> f64 {
    let n = gram.len();
    let center = |v: &mut Vec<f64>| {
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };
    let mut v: Vec<f64> = (0..n).map(|i| ((i * 7919 % 101) as f64 + 1.0).sin()).collect();
    center(&mut v);
    let mut lambda = 0.0;
    for _ in 0..500 {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let mut w: Vec<f64> = gram.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        center(&mut w);
        let next = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let done = (next - lambda).abs() <= 1e-9 * next.max(1e-12);
        lambda = next;
        v = w;
        if done {
            break;
        }
    }
    lambda
}

/// Fits the support vector data description on the set's trajectories.
pub fn svdd_fit(set: &TrajectorySet, params: &SvddParams) -> Result<SvddModel> {
    let points: Vec<Vec<f64>> = set.trajectories.iter().map(|t| t.deltas.clone()).collect();
    svdd_fit_points(&points, params)
}

pub fn svdd_fit_points(points: &[Vec<f64>], params: &SvddParams) -> Result<SvddModel> {
    let k = points.len();
    if k < 2 {
        return Err(Error::invalid("SVDD needs at least two training trajectories"));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("training trajectories differ in length".into()));
    }
    if !(params.nu > 0.0 && params.nu <= 1.0) {
        return Err(Error::invalid("nu must lie in (0, 1]"));
    }
    for p in points {
        crate::data::ensure_finite(p, "SVDD training point")?;
    }
    let kernel = params.kernel;
    let cap = (1.0 / (params.nu * k as f64)).min(1.0);
    let gram: Vec<Vec<f64>> = points.iter().map(|a| points.iter().map(|b| kernel.eval(a, b)).collect()).collect();

    let lipschitz = 2.0 * 1.05 * tangent_spectral_radius(&gram);
    let step = if lipschitz > 1e-12 { 1.0 / lipschitz } else { 1.0 };
    let grad = |b: &[f64]| -> Vec<f64> {
        gram.iter().map(|r| 1.0 - 2.0 * r.iter().zip(b).map(|(g, x)| g * x).sum::<f64>()).collect()
    };
    let pg_step = |b: &[f64]| -> Vec<f64> {
        let g = grad(b);
        let ascent: Vec<f64> = b.iter().zip(&g).map(|(x, gi)| x + step * gi).collect();
        project_capped_simplex(&ascent, cap)
    };
    let max_change = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    // accelerated projected-gradient ascent, restarted whenever the
    // objective would decrease
    let mut beta = vec![1.0 / k as f64; k];
    let mut value = svdd_dual_objective(&gram, &beta);
    let mut y = beta.clone();
    let mut momentum = 1.0f64;
    let mut converged = false;
    let mut checkpoint = value;
    for iter in 1..=params.max_iter {
        let mut next = pg_step(&y);
        let mut next_value = svdd_dual_objective(&gram, &next);
        if next_value < value {
            momentum = 1.0;
            next = pg_step(&beta);
            next_value = svdd_dual_objective(&gram, &next);
        }
        let change = max_change(&next, &beta);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let w = (momentum - 1.0) / t_next;
        y = next.iter().zip(&beta).map(|(n, b)| n + w * (n - b)).collect();
        momentum = t_next;
        beta = next;
        value = next_value;
        if change <= params.tol && max_change(&pg_step(&beta), &beta) <= params.tol {
            converged = true;
            break;
        }
        // flat directions can keep β drifting without moving the objective
        if iter % 2000 == 0 {
            if value - checkpoint <= 1e-12 * value.abs().max(1.0) {
                converged = true;
                break;
            }
            checkpoint = value;
        }
    }
    if !converged {
        return Err(Error::NotConverged { iterations: params.max_iter, detail: "SVDD dual".into() });
    }

    // merge coincident points so a duplicated sample is a single SV
    let floor = 1e-10;
    let mut svs: Vec<Vec<f64>> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut at_cap: Vec<bool> = Vec::new();
    for (i, &b) in beta.iter().enumerate() {
        if b <= floor {
            continue;
        }
        if let Some(j) = svs.iter().position(|s| s == &points[i]) {
            betas[j] += b;
            at_cap[j] = at_cap[j] && b >= cap - 1e-9;
        } else {
            svs.push(points[i].clone());
            betas.push(b);
            at_cap.push(b >= cap - 1e-9);
        }
    }
    let total: f64 = betas.iter().sum();
    betas.iter_mut().for_each(|b| *b /= total);

    let center_norm2 = double_sum(&svs, &betas, &kernel);
    let mut model = SvddModel { support_vectors: svs, betas, kernel, radius2_threshold: 0.0, center_norm2, nu: params.nu };
    let radii: Vec<f64> = model.support_vectors.iter().map(|s| svdd_radius2_unchecked(&model, s)).collect();
    let boundary: Vec<f64> = radii.iter().zip(&at_cap).filter(|(_, &c)| !c).map(|(r, _)| *r).collect();
    model.radius2_threshold = if boundary.is_empty() {
        radii.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        boundary.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(model)
}

fn double_sum(svs: &[Vec<f64>], betas: &[f64], kernel: &SigmoidKernel) -> f64 {
    let mut s = 0.0;
    for (i, a) in svs.iter().enumerate() {
        for (j, b) in svs.iter().enumerate() {
            s += betas[i] * betas[j] * kernel.eval(a, b);
        }
    }
    s
}

fn svdd_radius2_unchecked(model: &SvddModel, x: &[f64]) -> f64 {
    let cross: f64 = model.support_vectors.iter().zip(&model.betas).map(|(s, b)| b * model.kernel.eval(s, x)).sum();
    1.0 - 2.0 * cross + model.center_norm2
}

/// Squared kernel distance of `x` to the sphere centre.
pub fn svdd_radius2(model: &SvddModel, x: &[f64]) -> Result<f64> {
    let dim = model.support_vectors.first().map_or(0, |s| s.len());
    if x.len() != dim {
        return Err(Error::LengthMismatch { expected: dim, got: x.len() });
    }
    Ok(svdd_radius2_unchecked(model, x))
}

/// Feasible iff the radius does not exceed the sphere's.
pub fn svdd_classify(model: &SvddModel, x: &[f64]) -> Result<Label> {
    Ok(Label::from_feasible(svdd_radius2(model, x)? <= model.radius2_threshold))
}
