//! Day-ahead scheduling of shiftable and thermal loads against a time-of-use
//! tariff and a PV forecast.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flex::{simulate_ewh, DeviceFleet, EwhConfig, Shiftable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    /// Import price per period, currency/kWh.
    pub prices: Vec<f64>,
    /// Export remuneration, currency/kWh.
    #[serde(default)]
    pub feed_in: f64,
}

impl Tariff {
    pub fn new(prices: Vec<f64>, feed_in: f64) -> Result<Self> {
        let t = Self { prices, feed_in };
        t.validate()?;
        Ok(t)
    }

    pub fn flat(price: f64, horizon: usize) -> Self {
        Self { prices: vec![price; horizon], feed_in: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prices.is_empty() {
            return Err(Error::Empty("tariff prices"));
        }
        if self.prices.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) || !(self.feed_in >= 0.0) {
            return Err(Error::invalid("prices and feed-in must be finite and non-negative"));
        }
        Ok(())
    }

    /// Cost of net demand `net_kw` over one period.
    fn period_cost(&self, t: usize, net_kw: f64, dt_h: f64) -> f64 {
        if net_kw >= 0.0 {
            self.prices[t] * net_kw * dt_h
        } else {
            -self.feed_in * (-net_kw) * dt_h
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Chosen start period per shiftable load, in fleet order.
    pub starts: Vec<usize>,
    /// Water heater on/off per period (empty without a heater).
    pub thermal_controls: Vec<bool>,
    pub cost: f64,
    pub imported_kwh: Vec<f64>,
    pub exported_kwh: Vec<f64>,
}

fn check_inputs(fleet: &DeviceFleet, tariff: &Tariff, pv: &[f64], base_load: &[f64]) -> Result<usize> {
    tariff.validate()?;
    let horizon = tariff.prices.len();
    for (what, v) in [("PV forecast", pv), ("base load", base_load)] {
        if v.len() != horizon {
            return Err(Error::LengthMismatch { expected: horizon, got: v.len() });
        }
        crate::data::ensure_finite(v, what)?;
    }
    if pv.iter().any(|p| *p < 0.0) {
        return Err(Error::invalid("PV forecast must be non-negative"));
    }
    fleet.validate(horizon)?;
    Ok(horizon)
}

/// Controllable load per period implied by the starts and heater controls.
pub fn scheduled_load(fleet: &DeviceFleet, starts: &[usize], thermal: &[bool], horizon: usize) -> Vec<f64> {
    let mut load = vec![0.0; horizon];
    for (s, &start) in fleet.shiftables.iter().zip(starts) {
        s.add_profile(start, 1.0, &mut load);
    }
    if let Some(e) = &fleet.ewh {
        for (l, &on) in load.iter_mut().zip(thermal) {
            if on {
                *l += e.power_kw;
            }
        }
    }
    load
}

/// Net import/export cost of a schedule's starts and heater controls.
pub fn schedule_cost(fleet: &DeviceFleet, schedule: &Schedule, tariff: &Tariff, pv: &[f64], base_load: &[f64]) -> Result<f64> {
    let horizon = check_inputs(fleet, tariff, pv, base_load)?;
    if schedule.starts.len() != fleet.shiftables.len() {
        return Err(Error::LengthMismatch { expected: fleet.shiftables.len(), got: schedule.starts.len() });
    }
    let load = scheduled_load(fleet, &schedule.starts, &schedule.thermal_controls, horizon);
    Ok(cost_of(tariff, pv, base_load, &load, fleet.dt_h))
}

fn cost_of(tariff: &Tariff, pv: &[f64], base_load: &[f64], load: &[f64], dt_h: f64) -> f64 {
    (0..load.len()).map(|t| tariff.period_cost(t, base_load[t] + load[t] - pv[t], dt_h)).sum()
}

/// Heater on/off plan: starting from all-off, repeatedly covers the first
/// comfort violation by switching on the cheapest earlier off-period (the
/// latest one on ties) that does not overheat the tank.
fn plan_thermal(e: &EwhConfig, tariff: &Tariff, net_other: &[f64], dt_h: f64) -> Result<Vec<bool>> {
    let horizon = net_other.len();
    let mut on = vec![false; horizon];
    let simulate = |on: &[bool]| -> Result<Vec<f64>> {
        let u: Vec<f64> = on.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Ok(simulate_ewh(e, &u, dt_h)?.temperatures)
    };
    loop {
        let temps = simulate(&on)?;
        if let Some(t) = (0..horizon).find(|&t| temps[t + 1] > e.t_max + 1e-9) {
            return Err(Error::Infeasible(format!(
                "water temperature {:.2} °C exceeds t_max {} at period {t} with the heater off",
                temps[t + 1],
                e.t_max
            )));
        }
        let Some(violation) = (0..horizon).find(|&t| temps[t + 1] < e.t_min - 1e-9) else {
            return Ok(on);
        };
        let mut best: Option<(f64, usize)> = None;
        for tau in (0..=violation).rev() {
            if on[tau] {
                continue;
            }
            let mut trial = on.clone();
            trial[tau] = true;
            let trial_temps = simulate(&trial)?;
            if trial_temps.iter().skip(1).any(|&x| x > e.t_max + 1e-9) {
                continue;
            }
            let marginal = tariff.period_cost(tau, net_other[tau] + e.power_kw, dt_h) - tariff.period_cost(tau, net_other[tau], dt_h);
            if best.map_or(true, |(c, _)| marginal < c - 1e-12) {
                best = Some((marginal, tau));
            }
        }
        match best {
            Some((_, tau)) => on[tau] = true,
            None => {
                return Err(Error::Infeasible(format!(
                    "water temperature falls to {:.2} °C, below t_min {}, at period {violation} and no heating slot can prevent it",
                    temps[violation + 1],
                    e.t_min
                )))
            }
        }
    }
}

struct Search<'a> {
    shiftables: &'a [Shiftable],
    tariff: &'a Tariff,
    dt_h: f64,
    /// Net load before shiftables (base + heater − PV).
    net: Vec<f64>,
    convex: bool,
    best_cost: f64,
    best_starts: Option<Vec<usize>>,
}

impl Search<'_> {
    fn total(&self, load: &[f64]) -> f64 {
        (0..load.len()).map(|t| self.tariff.period_cost(t, self.net[t] + load[t], self.dt_h)).sum()
    }

    fn marginal(&self, s: &Shiftable, start: usize, load: &[f64]) -> f64 {
        (start..start + s.duration)
            .map(|t| {
                let before = self.net[t] + load[t];
                self.tariff.period_cost(t, before + s.power_kw, self.dt_h) - self.tariff.period_cost(t, before, self.dt_h)
            })
            .sum()
    }

    fn dfs(&mut self, depth: usize, starts: &mut Vec<usize>, load: &mut Vec<f64>, partial: f64) {
        if depth == self.shiftables.len() {
            if partial < self.best_cost - 1e-9 {
                self.best_cost = partial;
                self.best_starts = Some(starts.clone());
            }
            return;
        }
        if self.convex {
            // with convex period costs, placing the remaining loads one by
            // one on the current profile underestimates their joint cost
            let bound: f64 = self.shiftables[depth..]
                .iter()
                .map(|s| s.allowed_starts().map(|st| self.marginal(s, st, load)).fold(f64::INFINITY, f64::min))
                .sum();
            if partial + bound >= self.best_cost - 1e-9 {
                return;
            }
        }
        let s = &self.shiftables[depth];
        for start in s.allowed_starts() {
            let m = self.marginal(s, start, load);
            s.add_profile(start, 1.0, load);
            starts.push(start);
            self.dfs(depth + 1, starts, load, partial + m);
            starts.pop();
            s.add_profile(start, -1.0, load);
        }
    }
}

fn best_starts(fleet: &DeviceFleet, tariff: &Tariff, net: Vec<f64>) -> Vec<usize> {
    let convex = tariff.prices.iter().all(|&p| p >= tariff.feed_in);
    let mut search = Search {
        shiftables: &fleet.shiftables,
        tariff,
        dt_h: fleet.dt_h,
        net,
        convex,
        best_cost: f64::INFINITY,
        best_starts: None,
    };
    let horizon = tariff.prices.len();
    let base = search.total(&vec![0.0; horizon]);
    let mut load = vec![0.0; horizon];
    search.dfs(0, &mut Vec::new(), &mut load, base);
    search.best_starts.unwrap_or_default()
}

fn finish(fleet: &DeviceFleet, tariff: &Tariff, pv: &[f64], base_load: &[f64], starts: Vec<usize>, thermal: Vec<bool>) -> Schedule {
    let horizon = tariff.prices.len();
    let load = scheduled_load(fleet, &starts, &thermal, horizon);
    let net: Vec<f64> = (0..horizon).map(|t| base_load[t] + load[t] - pv[t]).collect();
    Schedule {
        cost: cost_of(tariff, pv, base_load, &load, fleet.dt_h),
        imported_kwh: net.iter().map(|n| n.max(0.0) * fleet.dt_h).collect(),
        exported_kwh: net.iter().map(|n| (-n).max(0.0) * fleet.dt_h).collect(),
        starts,
        thermal_controls: thermal,
    }
}

fn thermal_for(fleet: &DeviceFleet, tariff: &Tariff, pv: &[f64], base_load: &[f64]) -> Result<Vec<bool>> {
    match &fleet.ewh {
        Some(e) => {
            let net: Vec<f64> = base_load.iter().zip(pv).map(|(b, p)| b - p).collect();
            plan_thermal(e, tariff, &net, fleet.dt_h)
        }
        None => Ok(Vec::new()),
    }
}

/// Minimises import cost minus export revenue. The heater plan is fixed
/// first; shiftable starts are then chosen by exact branch-and-bound over
/// all window-respecting combinations, preferring the lexicographically
/// earliest starts among equal costs. A battery, if present, stays idle.
pub fn optimize_schedule(fleet: &DeviceFleet, tariff: &Tariff, pv: &[f64], base_load: &[f64]) -> Result<Schedule> {
    let horizon = check_inputs(fleet, tariff, pv, base_load)?;
    let thermal = thermal_for(fleet, tariff, pv, base_load)?;
    let heat = scheduled_load(&DeviceFleet { shiftables: Vec::new(), ..fleet.clone() }, &[], &thermal, horizon);
    let net: Vec<f64> = (0..horizon).map(|t| base_load[t] + heat[t] - pv[t]).collect();
    let starts = best_starts(fleet, tariff, net);
    Ok(finish(fleet, tariff, pv, base_load, starts, thermal))
}

/// Reference operation: shiftables at their baseline starts and the heater
/// planned against a flat price, i.e. without regard to tariff or PV.
pub fn baseline_schedule(fleet: &DeviceFleet, tariff: &Tariff, pv: &[f64], base_load: &[f64]) -> Result<Schedule> {
    let horizon = check_inputs(fleet, tariff, pv, base_load)?;
    let zeros = vec![0.0; horizon];
    let thermal = thermal_for(fleet, &Tariff::flat(1.0, horizon), &zeros, &zeros)?;
    let starts = fleet.shiftables.iter().map(|s| s.baseline_start).collect();
    Ok(finish(fleet, tariff, pv, base_load, starts, thermal))
}

/// Percent saved by `optimized` relative to `baseline`; zero when the
/// baseline costs nothing.
pub fn savings_percent(baseline: &Schedule, optimized: &Schedule) -> f64 {
    if baseline.cost.abs() < 1e-12 {
        0.0
    } else {
        100.0 * (baseline.cost - optimized.cost) / baseline.cost.abs()
    }
}

/// Replays the heater controls through the simulator and checks windows.
pub fn replay_violations(fleet: &DeviceFleet, schedule: &Schedule) -> Result<usize> {
    let mut count = 0;
    for (s, &start) in fleet.shiftables.iter().zip(&schedule.starts) {
        if !s.allowed_starts().contains(&start) {
            count += 1;
        }
    }
    if let Some(e) = &fleet.ewh {
        let u: Vec<f64> = schedule.thermal_controls.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        count += simulate_ewh(e, &u, fleet.dt_h)?.violations.len();
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shiftable(power: f64, duration: usize, earliest: usize, latest_end: usize) -> Shiftable {
        Shiftable { name: "x".into(), power_kw: power, duration, earliest_start: earliest, latest_end, baseline_start: earliest }
    }

    fn fleet(shiftables: Vec<Shiftable>) -> DeviceFleet {
        DeviceFleet { ewh: None, battery: None, shiftables, pv_capacity_kw: 0.0, dt_h: 1.0 }
    }

    /// Independent cost: explicit import/export split per period.
    fn oracle_cost(f: &DeviceFleet, starts: &[usize], tariff: &Tariff, pv: &[f64], base: &[f64], heat: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in 0..pv.len() {
            let mut demand = base[t] + heat[t];
            for (s, &st) in f.shiftables.iter().zip(starts) {
                if t >= st && t < st + s.duration {
                    demand += s.power_kw;
                }
            }
            let import = (demand - pv[t]).max(0.0);
            let export = (pv[t] - demand).max(0.0);
            total += tariff.prices[t] * import - tariff.feed_in * export;
        }
        total
    }

    /// Enumerates every start combination in lexicographic order.
    fn oracle(f: &DeviceFleet, tariff: &Tariff, pv: &[f64], base: &[f64], heat: &[f64]) -> (Vec<usize>, f64) {
        let ranges: Vec<Vec<usize>> = f.shiftables.iter().map(|s| s.allowed_starts().collect()).collect();
        let mut idx = vec![0usize; ranges.len()];
        let mut best: (Vec<usize>, f64) = (Vec::new(), f64::INFINITY);
        loop {
            let starts: Vec<usize> = idx.iter().zip(&ranges).map(|(&i, r)| r[i]).collect();
            let c = oracle_cost(f, &starts, tariff, pv, base, heat);
            if c < best.1 - 1e-9 {
                best = (starts, c);
            }
            let mut d = ranges.len();
            loop {
                if d == 0 {
                    return best;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < ranges[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    pub(crate) fn random_instance(rng: &mut ChaCha8Rng, horizon: usize) -> (DeviceFleet, Tariff, Vec<f64>, Vec<f64>) {
        let n = rng.gen_range(1..=5);
        let shiftables = (0..n)
            .map(|_| {
                let d = rng.gen_range(1..=3);
                let e = rng.gen_range(0..horizon - d);
                let l = rng.gen_range(e + d..=horizon);
                shiftable((rng.gen_range(0.3..2.5f64) * 10.0).round() / 10.0, d, e, l)
            })
            .collect();
        let prices = (0..horizon).map(|_| (rng.gen_range(0.05..0.3f64) * 100.0).round() / 100.0).collect();
        let pv = crate::synth::pv_profile(rng.gen_range(0.0..5.0), 0, horizon);
        let base = (0..horizon).map(|_| rng.gen_range(0.2..1.0)).collect();
        let feed_in = if rng.gen_bool(0.5) { 0.0 } else { 0.04 };
        (fleet(shiftables), Tariff { prices, feed_in }, pv, base)
    }

    #[test]
    fn two_period_toy() {
        let f = fleet(vec![shiftable(1.0, 1, 0, 2)]);
        let tariff = Tariff::new(vec![0.2, 0.1], 0.0).unwrap();
        let s = optimize_schedule(&f, &tariff, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        // period 2 in one-based terms
        assert_eq!(s.starts, vec![1]);
        assert!((s.cost - 0.1).abs() < 1e-12);
    }

    #[test]
    fn flat_tariff_picks_earliest() {
        let f = fleet(vec![shiftable(1.5, 2, 3, 10), shiftable(0.7, 1, 1, 6)]);
        let tariff = Tariff::flat(0.15, 12);
        let base = vec![0.4; 12];
        let s = optimize_schedule(&f, &tariff, &vec![0.0; 12], &base).unwrap();
        assert_eq!(s.starts, vec![3, 1]);
        let hand = 0.15 * (0.4 * 12.0 + 1.5 * 2.0 + 0.7);
        assert!((s.cost - hand).abs() < 1e-12);
        let b = baseline_schedule(&f, &tariff, &vec![0.0; 12], &base).unwrap();
        assert!(savings_percent(&b, &s).abs() < 1e-9);
    }

    #[test]
    fn pv_surplus_attracts_load() {
        let horizon = 24;
        let pv = crate::synth::pv_profile(4.0, 0, horizon);
        let base = vec![0.3; horizon];
        let f = fleet(vec![Shiftable { baseline_start: 19, ..shiftable(2.0, 2, 0, 24) }]);
        let tariff = Tariff::flat(0.2, horizon);
        let s = optimize_schedule(&f, &tariff, &pv, &base).unwrap();
        let b = baseline_schedule(&f, &tariff, &pv, &base).unwrap();
        assert!(s.cost < b.cost);
        let st = s.starts[0];
        assert!((st..st + 2).all(|t| pv[t] > base[t]), "{:?}", s.starts);
        let (starts, cost) = oracle(&f, &tariff, &pv, &base, &vec![0.0; horizon]);
        assert_eq!(starts, s.starts);
        assert!((cost - s.cost).abs() < 1e-9);
    }

    #[test]
    fn cost_edge_cases() {
        let f = fleet(vec![]);
        let s = optimize_schedule(&f, &Tariff::flat(0.2, 4), &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(s.cost, 0.0);
        let s = optimize_schedule(&f, &Tariff::flat(0.2, 4), &[2.0; 4], &[0.5; 4]).unwrap();
        assert_eq!(s.cost, 0.0);
        assert!(s.exported_kwh.iter().all(|&e| e == 1.5));
        assert!(optimize_schedule(&f, &Tariff::flat(0.2, 4), &[0.0; 3], &[0.0; 4]).is_err());
        assert!(Tariff::new(vec![-0.1], 0.0).is_err());
    }

    #[test]
    fn matches_enumeration_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..15 {
            let (f, tariff, pv, base) = random_instance(&mut rng, 12);
            let s = optimize_schedule(&f, &tariff, &pv, &base).unwrap();
            let (starts, cost) = oracle(&f, &tariff, &pv, &base, &vec![0.0; 12]);
            assert_eq!(s.starts, starts);
            assert!((s.cost - cost).abs() < 1e-9);
            let c = schedule_cost(&f, &s, &tariff, &pv, &base).unwrap();
            assert!((c - oracle_cost(&f, &s.starts, &tariff, &pv, &base, &vec![0.0; 12])).abs() < 1e-12);
        }
    }

    fn heater() -> EwhConfig {
        EwhConfig {
            volume_l: 120.0,
            power_kw: 2.0,
            efficiency: 0.95,
            loss_w_per_k: 2.0,
            t_min: 45.0,
            t_max: 70.0,
            t_set: 55.0,
            t_init: 50.0,
            t_inlet: 15.0,
            t_ambient: 20.0,
            draws_l_per_h: vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 40.0, 40.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    #[test]
    fn thermal_plan_is_feasible_and_cheap() {
        let mut f = fleet(vec![shiftable(1.0, 1, 0, 12)]);
        f.ewh = Some(heater());
        let prices = vec![0.3, 0.3, 0.05, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3];
        let tariff = Tariff::new(prices, 0.0).unwrap();
        let s = optimize_schedule(&f, &tariff, &[0.0; 12], &[0.2; 12]).unwrap();
        assert_eq!(replay_violations(&f, &s).unwrap(), 0);
        assert!(s.thermal_controls[2]);
        assert_eq!(s.starts, vec![2]);
        let heat: Vec<f64> = s.thermal_controls.iter().map(|&b| if b { 2.0 } else { 0.0 }).collect();
        let (starts, cost) = oracle(&f, &tariff, &[0.0; 12], &[0.2; 12], &heat);
        assert_eq!(starts, s.starts);
        assert!((cost - s.cost).abs() < 1e-9);
    }

    #[test]
    fn impossible_comfort_names_the_period() {
        let mut e = heater();
        e.power_kw = 0.1;
        e.draws_l_per_h[6] = 200.0;
        let mut f = fleet(vec![]);
        f.ewh = Some(e);
        let err = optimize_schedule(&f, &Tariff::flat(0.2, 12), &[0.0; 12], &[0.0; 12]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t_min") && msg.contains("period"), "{msg}");
    }
}
