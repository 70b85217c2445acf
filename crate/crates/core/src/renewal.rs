//! Renewal objects of the branching walk: `U(t) = Σ_k b^k P(S_k ≤ t)`, its
//! normalisation `Û(t) = e^{-t} U(t)`, the size-biased increment, overshoot
//! classes of the fringe and the contribution of the top of the tree.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::compute_constants;
use crate::models::ModelSpec;
use crate::par::{map_indexed, Execution};
use crate::rng::substream;
use crate::split::{walk, Sink};
use crate::stats::Moments;
use crate::{Error, Result};

pub const MAX_GRID_STEP: f64 = 0.5;
pub const MAX_VLEM_STEP: f64 = 0.05;
pub const MAX_ENUMERATION_T: f64 = 16.0;
/// Default node budget per branching enumeration.
pub const NODE_BUDGET: u64 = 10_000_000;
/// Hard cap on walk nodes for the fringe simulations.
pub const FRINGE_NODE_CAP: u64 = 100_000_000;

/// Draws the split vector, picks component `j` with probability `V_j` and
/// returns `-ln V_j`.
pub fn size_biased_increment<R: Rng>(model: &ModelSpec, rng: &mut R, buf: &mut [f64]) -> f64 {
    model.sample_into(rng, buf);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = 0;
    for (i, &v) in buf.iter().enumerate() {
        if v > 0.0 {
            chosen = i;
            acc += v;
            if u < acc {
                break;
            }
        }
    }
    -buf[chosen].ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenewalMethod {
    BranchingEnumeration,
    TiltedWalkMc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalConfig {
    pub t_max: f64,
    pub grid_step: f64,
    pub method: RenewalMethod,
    /// Independent enumerations, or batches of walks for the MC method.
    pub replicas: usize,
    /// Walks per batch (MC method only).
    pub walks_per_replica: usize,
    pub node_budget: u64,
    pub seed: u64,
}

impl RenewalConfig {
    pub fn new(t_max: f64, grid_step: f64, method: RenewalMethod, seed: u64) -> Self {
        RenewalConfig {
            t_max,
            grid_step,
            method,
            replicas: match method {
                RenewalMethod::BranchingEnumeration => 8,
                RenewalMethod::TiltedWalkMc => 64,
            },
            walks_per_replica: 4000,
            node_budget: NODE_BUDGET,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalTable {
    pub method: RenewalMethod,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub u_hat: Vec<f64>,
    /// Standard error of `Û` at each grid point, across replicas.
    pub se: Vec<f64>,
    pub replicas: usize,
}

impl RenewalTable {
    pub fn step(&self) -> f64 {
        if self.t.len() < 2 {
            f64::INFINITY
        } else {
            self.t[1] - self.t[0]
        }
    }

    /// `Û` at `t`, linearly interpolated.
    pub fn u_hat_at(&self, t: f64) -> Option<f64> {
        interpolate(&self.t, &self.u_hat, t)
    }

    pub fn u_at(&self, t: f64) -> Option<f64> {
        interpolate(&self.t, &self.u, t)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "U", "U_hat", "SE"])?;
        for i in 0..self.t.len() {
            w.write_record([
                self.t[i].to_string(),
                self.u[i].to_string(),
                self.u_hat[i].to_string(),
                self.se[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if xs.is_empty() || x < xs[0] - 1e-12 || x > xs[xs.len() - 1] + 1e-12 {
        return None;
    }
    let h = xs.get(1).map_or(1.0, |x1| x1 - xs[0]);
    let i = (((x - xs[0]) / h).floor() as usize).min(xs.len() - 1);
    if i + 1 >= xs.len() {
        return Some(ys[i]);
    }
    let w = (x - xs[i]) / h;
    Some(ys[i] * (1.0 - w) + ys[i + 1] * w)
}

fn grid(t_max: f64, step: f64) -> Vec<f64> {
    let cells = (t_max / step - 1e-9).ceil() as usize;
    (0..=cells).map(|i| i as f64 * step).collect()
}

/// Cell of the first grid point `>= s`.
fn cell(s: f64, step: f64) -> usize {
    ((s / step) - 1e-12).ceil().max(0.0) as usize
}

pub fn renewal_u(model: &ModelSpec, cfg: &RenewalConfig) -> Result<RenewalTable> {
    if !(cfg.grid_step > 0.0) || cfg.grid_step > MAX_GRID_STEP {
        return Err(Error::InsufficientGrid(format!("grid step {} must be in (0, {MAX_GRID_STEP}]", cfg.grid_step)));
    }
    if cfg.replicas < 1 || !(cfg.t_max > 0.0) {
        return Err(Error::Config("renewal needs t_max > 0 and replicas >= 1".into()));
    }
    let t = grid(cfg.t_max, cfg.grid_step);
    let per_replica: Vec<Vec<f64>> = match cfg.method {
        RenewalMethod::BranchingEnumeration => {
            if cfg.t_max > MAX_ENUMERATION_T {
                return Err(Error::Budget { what: "branching enumeration t_max", limit: MAX_ENUMERATION_T as u64 });
            }
            map_indexed(Execution::default(), cfg.replicas, |r| {
                enumerate_branching(model, &t, cfg, &mut substream(cfg.seed, &[r as u64]))
            })
            .into_iter()
            .collect::<Result<_>>()?
        }
        RenewalMethod::TiltedWalkMc => map_indexed(Execution::default(), cfg.replicas, |r| {
            tilted_walks(model, &t, cfg, &mut substream(cfg.seed, &[r as u64]))
        }),
    };
    let mut u = vec![0.0; t.len()];
    let mut u_hat = vec![0.0; t.len()];
    let mut se = vec![0.0; t.len()];
    for i in 0..t.len() {
        let m: Moments = per_replica.iter().map(|v| v[i]).collect();
        let damp = (-t[i]).exp();
        u[i] = m.mean();
        u_hat[i] = m.mean() * damp;
        se[i] = if per_replica.len() > 1 { m.se() * damp } else { f64::NAN };
    }
    Ok(RenewalTable { method: cfg.method, t, u, u_hat, se, replicas: cfg.replicas })
}

/// Counts the nodes of one weighted branching tree with `S <= t` (root
/// excluded) on the grid.
fn enumerate_branching<R: Rng>(model: &ModelSpec, t: &[f64], cfg: &RenewalConfig, rng: &mut R) -> Result<Vec<f64>> {
    let step = cfg.grid_step;
    let t_max = t[t.len() - 1];
    let mut hist = vec![0u64; t.len()];
    let mut v = vec![0.0; model.branching()];
    let mut stack = vec![0.0f64];
    let mut nodes = 0u64;
    while let Some(s) = stack.pop() {
        model.sample_into(rng, &mut v);
        for &vi in &v {
            if vi <= 0.0 {
                continue;
            }
            let sc = s - vi.ln();
            if sc <= t_max {
                nodes += 1;
                if nodes > cfg.node_budget {
                    return Err(Error::Budget { what: "branching enumeration nodes", limit: cfg.node_budget });
                }
                hist[cell(sc, step)] += 1;
                stack.push(sc);
            }
        }
    }
    let mut acc = 0u64;
    Ok(hist
        .iter()
        .map(|&h| {
            acc += h;
            acc as f64
        })
        .collect())
}

/// Mean over walks of `Σ_{n>=0} b e^{S_n} 1{S_n + Y_n <= t}`, with `S` the
/// size-biased walk and `Y_n` a fresh `-ln V`; this is `U(t)` by the change
/// of measure `b^k P(S_k <= t) = E[e^{S~_k}; S~_k <= t]` on the last step
/// but one.
fn tilted_walks<R: Rng>(model: &ModelSpec, t: &[f64], cfg: &RenewalConfig, rng: &mut R) -> Vec<f64> {
    let step = cfg.grid_step;
    let t_max = t[t.len() - 1];
    let b = model.branching() as f64;
    let mut hist = vec![0.0f64; t.len()];
    let mut buf = vec![0.0; model.branching()];
    for _ in 0..cfg.walks_per_replica {
        let mut s = 0.0;
        while s <= t_max {
            let y = -model.uniform_component(rng, &mut buf).ln();
            if s + y <= t_max {
                hist[cell(s + y, step)] += b * s.exp();
            }
            s += size_biased_increment(model, rng, &mut buf);
        }
    }
    let mut acc = 0.0;
    hist.iter()
        .map(|&h| {
            acc += h;
            acc / cfg.walks_per_replica as f64
        })
        .collect()
}

/// Trapezoidal `∫_0^x e^{-t} (U(t) - e^t/μ) dt = ∫_0^x (Û(t) - 1/μ) dt`.
pub fn vlem_integral(model: &ModelSpec, x: f64, table: &RenewalTable) -> Result<f64> {
    if table.step() > MAX_VLEM_STEP + 1e-12 {
        return Err(Error::InsufficientCoverage(format!("grid step {} exceeds {MAX_VLEM_STEP}", table.step())));
    }
    if x < 0.0 || table.u_hat_at(x).is_none() {
        return Err(Error::InsufficientCoverage(format!("table does not cover [0, {x}]")));
    }
    let inv_mu = 1.0 / compute_constants(model)?.mu;
    let f = |i: usize| table.u_hat[i] - inv_mu;
    let mut total = 0.0;
    let mut i = 0;
    while i + 1 < table.t.len() && table.t[i + 1] <= x + 1e-12 {
        total += 0.5 * (f(i) + f(i + 1)) * (table.t[i + 1] - table.t[i]);
        i += 1;
    }
    let rest = x - table.t[i];
    if rest > 1e-12 {
        let end = table.u_hat_at(x).unwrap() - inv_mu;
        total += 0.5 * (f(i) + end) * rest;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvershootHistogram {
    /// Upper end `α` of each class `[α - γ, α)`, descending from 1.
    pub alpha: Vec<f64>,
    /// `E[|R_α|] / (n/B)`.
    pub mass: Vec<f64>,
    pub se: Vec<f64>,
    /// Mass of fringe values below the last class (zero lengths included).
    pub below: f64,
    pub n: u64,
    pub big_b: f64,
    pub gamma: f64,
    pub eps: f64,
    pub replicas: usize,
    pub total_se: f64,
}

impl OvershootHistogram {
    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "alpha,mass,SE")?;
        for i in 0..self.alpha.len() {
            writeln!(w, "{},{},{}", self.alpha[i], self.mass[i], self.se[i])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeConfig {
    pub n: u64,
    pub big_b: f64,
    pub gamma: f64,
    pub eps: f64,
    pub replicas: usize,
    pub seed: u64,
}

/// Simulates the `L`-annotated branching walk, collects the fringe roots
/// (first nodes with `n L < B`) and bins `n L / B` into classes
/// `[α - γ, α)` for `α = 1, 1 - γ, ...` down to `ε²`.
pub fn overshoot_classes(model: &ModelSpec, cfg: &FringeConfig) -> Result<OvershootHistogram> {
    let FringeConfig { n, big_b, gamma, eps, replicas, seed } = *cfg;
    if !(gamma > 0.0 && gamma < 1.0) || !(eps * eps < 1.0) || (n as f64) / big_b < 100.0 || replicas < 2 {
        return Err(Error::Config(format!(
            "overshoot needs 0<γ<1, ε²<1, n/B>=100 and replicas>=2 (γ={gamma}, ε={eps}, n/B={})",
            n as f64 / big_b
        )));
    }
    let classes = ((1.0 - eps * eps) / gamma + 1e-9).floor() as usize + 1;
    let alpha: Vec<f64> = (0..classes).map(|k| 1.0 - k as f64 * gamma).collect();
    let scale = n as f64 / big_b;
    let runs = map_indexed(Execution::default(), replicas, |r| -> Result<(Vec<f64>, f64)> {
        let mut rng = substream(seed, &[r as u64]);
        let mut counts = vec![0u64; classes];
        let mut below = 0u64;
        let mut v = vec![0.0; model.branching()];
        let mut stack = vec![1.0f64];
        let mut nodes = 0u64;
        while let Some(l) = stack.pop() {
            model.sample_into(&mut rng, &mut v);
            for &vi in &v {
                nodes += 1;
                if nodes > FRINGE_NODE_CAP {
                    return Err(Error::Budget { what: "overshoot walk nodes", limit: FRINGE_NODE_CAP });
                }
                let lc = l * vi;
                let x = n as f64 * lc / big_b;
                if x >= 1.0 {
                    stack.push(lc);
                    continue;
                }
                // class k holds [1 - (k+1)γ, 1 - kγ)
                let k = (((1.0 - x) / gamma - 1e-9).ceil() as usize).saturating_sub(1);
                if k < classes {
                    counts[k] += 1;
                } else {
                    below += 1;
                }
            }
        }
        Ok((counts.iter().map(|&c| c as f64 / scale).collect(), below as f64 / scale))
    });
    let runs: Vec<(Vec<f64>, f64)> = runs.into_iter().collect::<Result<_>>()?;
    let mut mass = vec![0.0; classes];
    let mut se = vec![0.0; classes];
    for k in 0..classes {
        let m: Moments = runs.iter().map(|r| r.0[k]).collect();
        mass[k] = m.mean();
        se[k] = m.se();
    }
    let totals: Moments = runs.iter().map(|r| r.0.iter().sum::<f64>()).collect();
    let below = runs.iter().map(|r| r.1).sum::<f64>() / replicas as f64;
    Ok(OvershootHistogram { alpha, mass, se, below, n, big_b, gamma, eps, replicas, total_se: totals.se() })
}

struct TopSink {
    n: f64,
    big_b: f64,
    total: u64,
    nodes: u64,
    over_budget: bool,
}

impl Sink for TopSink {
    type Handle = ();
    fn root(&mut self, _: u64) {}
    fn expand(&mut self, _: (), _: u64, l: f64, _: u32) -> bool {
        !self.over_budget && self.n * l >= self.big_b
    }
    fn child(&mut self, _: (), _: usize, n: u64, l: f64, _: u32) {
        self.nodes += 1;
        if self.nodes > FRINGE_NODE_CAP {
            self.over_budget = true;
        }
        if self.n * l >= self.big_b {
            self.total += n;
        }
    }
}

/// Estimate and SE of `E[Σ_{v ≠ root} n_v 1{n L_v >= B}]`.
pub fn top_contribution(model: &ModelSpec, n: u64, big_b: f64, replicas: usize, seed: u64) -> Result<(f64, f64)> {
    if replicas < 2 {
        return Err(Error::Config("top_contribution needs replicas >= 2".into()));
    }
    let runs = map_indexed(Execution::default(), replicas, |r| {
        let mut sink = TopSink { n: n as f64, big_b, total: 0, nodes: 0, over_budget: false };
        walk(n, model, &mut substream(seed, &[r as u64]), &mut sink);
        if sink.over_budget {
            Err(Error::Budget { what: "top-of-tree nodes", limit: FRINGE_NODE_CAP })
        } else {
            Ok(sink.total as f64)
        }
    });
    let m: Moments = runs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().collect();
    Ok((m.mean(), m.se()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::f64::consts::LN_2;

    #[test]
    fn trie_increment_is_ln2() {
        let trie = ModelSpec::trie(&[0.5, 0.5]).unwrap();
        let mut buf = [0.0; 2];
        let mut rng = stream(0);
        for _ in 0..100 {
            assert_eq!(size_biased_increment(&trie, &mut rng, &mut buf), LN_2);
        }
    }

    #[test]
    fn bst_table_starts_at_zero_and_grows() {
        let bst = ModelSpec::bst();
        let tab = renewal_u(&bst, &RenewalConfig::new(4.0, 0.05, RenewalMethod::BranchingEnumeration, 400)).unwrap();
        assert_eq!(tab.u[0], 0.0);
        assert!(tab.u.windows(2).all(|w| w[0] <= w[1]));
        // U(1) = 2e - 2
        let u1 = tab.u_at(1.0).unwrap();
        let se1 = tab.se[tab.t.iter().position(|&t| (t - 1.0).abs() < 1e-9).unwrap()] * 1f64.exp();
        assert!((u1 - (2.0 * 1f64.exp() - 2.0)).abs() < 4.0 * se1, "{u1} +- {se1}");
    }

    #[test]
    fn bad_grids_rejected() {
        let bst = ModelSpec::bst();
        let mut cfg = RenewalConfig::new(4.0, 0.6, RenewalMethod::BranchingEnumeration, 1);
        assert!(matches!(renewal_u(&bst, &cfg), Err(Error::InsufficientGrid(_))));
        cfg.grid_step = 0.1;
        cfg.t_max = 17.0;
        assert!(matches!(renewal_u(&bst, &cfg), Err(Error::Budget { .. })));
        cfg.t_max = 12.0;
        cfg.node_budget = 1000;
        assert!(matches!(renewal_u(&bst, &cfg), Err(Error::Budget { .. })));
        let coarse = renewal_u(&bst, &RenewalConfig::new(4.0, 0.1, RenewalMethod::BranchingEnumeration, 1)).unwrap();
        assert!(matches!(vlem_integral(&bst, 2.0, &coarse), Err(Error::InsufficientCoverage(_))));
    }

    #[test]
    fn vlem_at_zero_is_zero() {
        let bst = ModelSpec::bst();
        let tab = renewal_u(&bst, &RenewalConfig::new(2.0, 0.02, RenewalMethod::BranchingEnumeration, 1)).unwrap();
        assert_eq!(vlem_integral(&bst, 0.0, &tab).unwrap(), 0.0);
        assert!(vlem_integral(&bst, 3.0, &tab).is_err());
    }

    #[test]
    fn trie_fringe_is_a_single_class() {
        let trie = ModelSpec::trie(&[0.5, 0.5]).unwrap();
        let cfg = FringeConfig { n: 1 << 20, big_b: 1024.0, gamma: 0.05, eps: 0.2, replicas: 4, seed: 1 };
        let h = overshoot_classes(&trie, &cfg).unwrap();
        let occupied: Vec<usize> = (0..h.mass.len()).filter(|&k| h.mass[k] > 0.0).collect();
        assert_eq!(occupied.len(), 1);
        // every fringe value is exactly 1/2: 1024 × 2 fringe roots / 1024
        let k = occupied[0];
        assert!(h.alpha[k] > 0.5 && h.alpha[k] - h.gamma <= 0.5);
        assert_eq!(h.mass[k], 2.0);
        assert_eq!(h.se[k], 0.0);
    }

    #[test]
    fn top_contribution_vanishes_above_n() {
        let (e, se) = top_contribution(&ModelSpec::bst(), 1000, 2000.0, 4, 1).unwrap();
        assert_eq!((e, se), (0.0, 0.0));
    }
}
