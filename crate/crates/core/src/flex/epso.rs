use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::devices::DeviceFleet;
use super::feasibility::{FeasibilityContext, FlexTrajectory};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsoParams {
    pub swarm_size: usize,
    pub generations: usize,
    /// Learning rate of the Gaussian weight mutation.
    pub tau: f64,
    /// Probability that a coordinate is pulled toward the global best.
    pub communication: f64,
    /// Largest number of distinct feasible points kept.
    pub archive_cap: usize,
}

impl Default for EpsoParams {
    fn default() -> Self {
        Self { swarm_size: 30, generations: 200, tau: 0.2, communication: 0.7, archive_cap: 1000 }
    }
}

/// K feasible trajectories together with the problem they were sampled for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub trajectories: Vec<FlexTrajectory>,
    pub baseline: Vec<f64>,
    pub pv_scenarios: Vec<Vec<f64>>,
    pub alpha: f64,
    /// Set when fewer than K distinct feasible points exist and the set
    /// repeats members.
    pub collapsed: bool,
}

impl TrajectorySet {
    pub fn horizon(&self) -> usize {
        self.baseline.len()
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Strategic weights carried by each particle: inertia, memory,
/// cooperation and the perturbation of the global best.
type Weights = [f64; 4];

#[derive(Clone)]
struct Particle {
    x: Vec<f64>,
    v: Vec<f64>,
    w: Weights,
    best: Vec<f64>,
    best_feasible: bool,
    best_shortfall: f64,
}

struct Candidate {
    x: Vec<f64>,
    v: Vec<f64>,
    w: Weights,
}

struct Evaluated {
    feasible: bool,
    shortfall: f64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn novelty(x: &[f64], archive: &[Vec<f64>]) -> f64 {
    archive.iter().map(|a| distance(x, a)).fold(f64::INFINITY, f64::min)
}

fn fitness(feasible: bool, shortfall: f64, x: &[f64], archive: &[Vec<f64>]) -> f64 {
    if feasible {
        novelty(x, archive)
    } else {
        -1.0 - shortfall
    }
}

/// Sum of the smallest shortfalls over just enough scenarios to reach alpha.
fn required_shortfall(mut per_scenario: Vec<f64>, alpha: f64) -> f64 {
    per_scenario.sort_by(f64::total_cmp);
    let need = ((alpha * per_scenario.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    per_scenario.iter().take(need).sum()
}

fn evaluate(ctx: &FeasibilityContext, x: &[f64]) -> Result<Evaluated> {
    let r = ctx.check(&FlexTrajectory::new(x.to_vec()))?;
    Ok(Evaluated { feasible: r.feasible, shortfall: required_shortfall(r.shortfall, ctx.alpha()) })
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Samples `k` mutually distant feasible trajectories with evolutionary
/// particle swarm optimisation. Fitness rewards the distance of a feasible
/// point to everything found so far; infeasible points are ranked by how
/// far they are from feasibility. The final set is picked from the archive
/// of feasible points by farthest-point selection.
pub fn epso_sample(
    fleet: &DeviceFleet,
    baseline: &[f64],
    pv_scenarios: &[Vec<f64>],
    alpha: f64,
    k: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    epso_sample_with(fleet, baseline, pv_scenarios, alpha, k, seed, &EpsoParams::default())
}

pub fn epso_sample_with(
    fleet: &DeviceFleet,
    baseline: &[f64],
    pv_scenarios: &[Vec<f64>],
    alpha: f64,
    k: usize,
    seed: u64,
    params: &EpsoParams,
) -> Result<TrajectorySet> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if params.swarm_size == 0 {
        return Err(Error::invalid("swarm size must be positive"));
    }
    let ctx = FeasibilityContext::new(fleet, baseline, pv_scenarios, alpha)?;
    let dim = ctx.horizon();
    let (up, down) = fleet.deviation_bounds();
    let span = up + down;
    let separation = 1e-3 * span.max(f64::MIN_POSITIVE);

    let zero = vec![0.0; dim];
    if !evaluate(&ctx, &zero)?.feasible {
        return Err(Error::Infeasible("no feasible trajectory found: the baseline fails the chance constraint".into()));
    }
    let mut archive = vec![zero.clone()];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut swarm: Vec<Particle> = (0..params.swarm_size)
        .map(|i| {
            let x: Vec<f64> = if i == 0 { zero.clone() } else { (0..dim).map(|_| rng.gen_range(-down..=up)).collect() };
            let v = (0..dim).map(|_| 0.1 * span * rng.gen_range(-1.0..=1.0)).collect();
            let w = [rng.gen(), rng.gen(), rng.gen(), rng.gen::<f64>() * 0.5];
            Particle { best: x.clone(), x, v, w, best_feasible: false, best_shortfall: f64::INFINITY }
        })
        .collect();
    let init: Vec<Evaluated> = swarm.par_iter().map(|p| evaluate(&ctx, &p.x)).collect::<Result<_>>()?;
    for (p, e) in swarm.iter_mut().zip(init) {
        p.best_feasible = e.feasible;
        p.best_shortfall = e.shortfall;
    }

    let clamp = |x: &mut [f64], v: &mut [f64]| {
        for (xi, vi) in x.iter_mut().zip(v.iter_mut()) {
            if *xi > up || *xi < -down {
                *xi = xi.clamp(-down, up);
                *vi = 0.0;
            }
        }
    };

    for _ in 0..params.generations {
        let fit = |p: &Particle, archive: &[Vec<f64>]| fitness(p.best_feasible, p.best_shortfall, &p.best, archive);
        let gbest = swarm
            .iter()
            .enumerate()
            .max_by(|a, b| fit(a.1, &archive).total_cmp(&fit(b.1, &archive)).then(b.0.cmp(&a.0)))
            .map(|(_, p)| p.best.clone())
            .unwrap();

        // all random draws happen here, in particle order
        let mut candidates = Vec::with_capacity(2 * swarm.len());
        for p in &swarm {
            let mut mutated = p.w;
            for w in &mut mutated {
                *w = (*w + params.tau * normal(&mut rng)).clamp(0.0, 1.0);
            }
            for w in [p.w, mutated] {
                let mut v = vec![0.0; dim];
                let mut x = p.x.clone();
                for d in 0..dim {
                    let target = gbest[d] + w[3] * 0.1 * span * normal(&mut rng);
                    let pull = if rng.gen::<f64>() < params.communication { w[2] * (target - p.x[d]) } else { 0.0 };
                    v[d] = w[0] * p.v[d] + w[1] * (p.best[d] - p.x[d]) + pull;
                    x[d] += v[d];
                }
                clamp(&mut x, &mut v);
                candidates.push(Candidate { x, v, w });
            }
        }

        let evals: Vec<Evaluated> = candidates.par_iter().map(|c| evaluate(&ctx, &c.x)).collect::<Result<_>>()?;
        let scores: Vec<f64> = candidates
            .iter()
            .zip(&evals)
            .map(|(c, e)| fitness(e.feasible, e.shortfall, &c.x, &archive))
            .collect();

        for (c, e) in candidates.iter().zip(&evals) {
            if e.feasible && archive.len() < params.archive_cap && novelty(&c.x, &archive) > separation {
                archive.push(c.x.clone());
            }
        }

        let mut cands = candidates.into_iter();
        let mut evs = evals.into_iter();
        for (i, p) in swarm.iter_mut().enumerate() {
            let (orig, clone) = (cands.next().unwrap(), cands.next().unwrap());
            let (eo, ec) = (evs.next().unwrap(), evs.next().unwrap());
            let (winner, ev) = if scores[2 * i + 1] > scores[2 * i] { (clone, ec) } else { (orig, eo) };
            p.x = winner.x;
            p.v = winner.v;
            p.w = winner.w;
            let current = fitness(ev.feasible, ev.shortfall, &p.x, &archive);
            let stored = fitness(p.best_feasible, p.best_shortfall, &p.best, &archive);
            if current > stored {
                p.best = p.x.clone();
                p.best_feasible = ev.feasible;
                p.best_shortfall = ev.shortfall;
            }
        }
    }

    let picked = farthest_point_selection(&archive, k);
    let collapsed = archive.len() < k;
    Ok(TrajectorySet {
        trajectories: picked.into_iter().map(|i| FlexTrajectory::new(archive[i].clone())).collect(),
        baseline: baseline.to_vec(),
        pv_scenarios: pv_scenarios.to_vec(),
        alpha,
        collapsed,
    })
}

/// Indices of `k` points chosen greedily to maximise the minimum pairwise
/// distance, starting from the point farthest from the first one. When
/// fewer than `k` points exist the selection cycles through them.
pub fn farthest_point_selection(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    if points.len() <= k {
        return (0..k).map(|i| i % points.len()).collect();
    }
    let first = (0..points.len())
        .max_by(|&a, &b| distance(&points[a], &points[0]).total_cmp(&distance(&points[b], &points[0])).then(b.cmp(&a)))
        .unwrap();
    let mut picked = vec![first];
    let mut nearest: Vec<f64> = points.iter().map(|p| distance(p, &points[first])).collect();
    while picked.len() < k {
        let next = (0..points.len())
            .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a)))
            .unwrap();
        picked.push(next);
        for (i, n) in nearest.iter_mut().enumerate() {
            *n = n.min(distance(&points[i], &points[next]));
        }
    }
    picked
}

/// Mean Euclidean distance over all pairs of trajectories.
pub fn mean_pairwise_distance(trajectories: &[FlexTrajectory]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..trajectories.len() {
        for j in i + 1..trajectories.len() {
            sum += distance(&trajectories[i].deltas, &trajectories[j].deltas);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flex::feasibility::tests::{scenarios, small_fleet};

    fn quick() -> EpsoParams {
        EpsoParams { generations: 60, ..EpsoParams::default() }
    }

    #[test]
    fn members_are_feasible_and_deterministic() {
        let base = vec![0.8; 8];
        let pv = scenarios(10);
        let a = epso_sample_with(&small_fleet(), &base, &pv, 0.9, 20, 7, &quick()).unwrap();
        let b = epso_sample_with(&small_fleet(), &base, &pv, 0.9, 20, 7, &quick()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert!(!a.collapsed);
        let ctx = FeasibilityContext::new(&small_fleet(), &base, &pv, 0.9).unwrap();
        for t in &a.trajectories {
            assert!(ctx.check(t).unwrap().feasible);
        }
        assert!(mean_pairwise_distance(&a.trajectories) > 0.5);
    }

    #[test]
    fn zero_rated_fleet_collapses() {
        let mut fleet = small_fleet();
        fleet.battery.as_mut().unwrap().p_charge_kw = 0.0;
        fleet.battery.as_mut().unwrap().p_discharge_kw = 0.0;
        let e = fleet.ewh.as_mut().unwrap();
        e.power_kw = 0.0;
        e.loss_w_per_k = 0.0;
        e.draws_l_per_h.clear();
        fleet.shiftables[0].power_kw = 0.0;
        let set = epso_sample_with(&fleet, &[0.8; 8], &scenarios(3), 0.9, 5, 1, &quick()).unwrap();
        assert!(set.collapsed);
        assert!(set.trajectories.iter().all(|t| t.deltas.iter().all(|&d| d == 0.0)));
    }

    #[test]
    fn k_zero_is_rejected() {
        assert!(epso_sample_with(&small_fleet(), &[0.8; 8], &scenarios(3), 0.9, 0, 1, &quick()).is_err());
    }

    #[test]
    fn farthest_point_prefers_extremes() {
        let pts = vec![vec![0.0], vec![0.1], vec![5.0], vec![-5.0], vec![0.2]];
        let mut idx = farthest_point_selection(&pts, 3);
        idx.sort();
        assert_eq!(idx, vec![0, 2, 3]);
        assert_eq!(farthest_point_selection(&pts[..1], 3), vec![0, 0, 0]);
    }
}
