//! The acceptance suite: fourteen numbered criteria, each run at a fixed
//! budget and reported as one pass/fail line.
//!
//! Thresholds without a closed-form value (the limit-law W2 and the depth
//! KS bounds) live in [`Thresholds`] next to the pilot numbers they came
//! from.

use std::cell::OnceCell;
use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constants::{compute_constants, compute_zeta, sample_cost_moments};
use crate::experiments::{
    bst_exact_mean, bst_mean_expansion, check_limit_law, concentration_check, depth_clt_check, lattice_oscillation,
    run_with, smoothness_check, ExperimentConfig, ExperimentResult, Measures,
};
use crate::fixpoint::{check_contraction, iterate_to_fixpoint, wasserstein2, EmpiricalDistribution, FixpointRun};
use crate::models::ModelSpec;
use crate::par::Execution;
use crate::renewal::{
    overshoot_classes, renewal_u, vlem_integral, FringeConfig, RenewalConfig, RenewalMethod, RenewalTable,
};
use crate::rng::substream;
use crate::split::{build_incremental, construction_equivalence_sample, grow_size_tree};
use crate::stats::{ks_critical, ks_two_sample};
use crate::{Error, Result};

pub const CRITERIA: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Full,
    Quick,
}

/// Pinned thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// W2 between centered `Xₙ` (n = 10⁴) and the bst fixed point. Pilot:
    /// 0.0056 with 10⁵ replicas, 0.0105 with 10⁴.
    pub limit_law_w2: f64,
    /// KS of the normalized bst insertion depth at n = 10⁵. Pilot over five
    /// seeds: 0.153 to 0.160.
    pub depth_ks: f64,
    pub contraction_slack: f64,
    pub ks_alpha: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { limit_law_w2: 0.05, depth_ks: 0.15, contraction_slack: 0.05, ks_alpha: 0.01 }
    }
}

/// Budgets for one profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub exact_mean_replicas: usize,
    pub bst_n: u64,
    pub bst_replicas: usize,
    pub fixpoint_samples: usize,
    /// Replicas for the limit-law check; the fixed-point sample is thinned
    /// to this size when smaller.
    pub limit_law_replicas: usize,
    /// Independent trees behind the renewal table.
    pub renewal_replicas: usize,
    pub overshoot_replicas: usize,
    pub depth_replicas: usize,
    pub trie_n: u64,
    pub trie_replicas: usize,
    pub lattice_oscillation: bool,
    pub lattice_replicas: usize,
    pub smoothness_replicas: usize,
    pub concentration_replicas: usize,
}

impl Budget {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Full => Budget {
                exact_mean_replicas: 100_000,
                bst_n: 100_000,
                bst_replicas: 10_000,
                fixpoint_samples: 100_000,
                limit_law_replicas: 100_000,
                renewal_replicas: 1_000,
                overshoot_replicas: 100,
                depth_replicas: 10_000,
                trie_n: 100_000,
                trie_replicas: 1_000,
                lattice_oscillation: true,
                lattice_replicas: 10_000,
                smoothness_replicas: 1_000,
                concentration_replicas: 20,
            },
            Profile::Quick => Budget {
                exact_mean_replicas: 20_000,
                bst_n: 20_000,
                bst_replicas: 2_000,
                fixpoint_samples: 100_000,
                limit_law_replicas: 10_000,
                renewal_replicas: 200,
                overshoot_replicas: 20,
                depth_replicas: 10_000,
                trie_n: 10_000,
                trie_replicas: 200,
                lattice_oscillation: false,
                lattice_replicas: 0,
                smoothness_replicas: 300,
                concentration_replicas: 5,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: usize,
    pub title: String,
    pub status: Status,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {:>2} {:<28} {:>7.1}s  {}", self.status, self.id, self.title, self.seconds, self.detail)
    }
}

pub fn title(id: usize) -> &'static str {
    match id {
        1 => "bst exact small-n mean",
        2 => "bst asymptotic mean",
        3 => "bst limit variance",
        4 => "fixed point",
        5 => "contraction certificate",
        6 => "limit law",
        7 => "renewal asymptotics",
        8 => "vlem constant",
        9 => "overshoot flatness",
        10 => "depth CLT",
        11 => "construction equivalence",
        12 => "lattice oscillation",
        13 => "degenerate digital case",
        14 => "invariant suites",
        _ => "unknown",
    }
}

/// Quicksort limit variance `7 - 2π²/3`.
pub fn bst_zeta() -> f64 {
    7.0 - 2.0 * PI * PI / 3.0
}

type Verdict = Result<(bool, String)>;
type Check = fn(&Suite) -> Verdict;

/// Runs criteria on demand, sharing the expensive runs several of them use.
pub struct Suite {
    pub profile: Profile,
    pub seed: u64,
    pub budget: Budget,
    pub thresholds: Thresholds,
    bst_large: OnceCell<ExperimentResult>,
    bst_fixpoint: OnceCell<FixpointRun>,
    renewal: OnceCell<RenewalTable>,
}

impl Suite {
    pub fn new(profile: Profile, seed: u64) -> Self {
        Suite {
            profile,
            seed,
            budget: Budget::for_profile(profile),
            thresholds: Thresholds::default(),
            bst_large: OnceCell::new(),
            bst_fixpoint: OnceCell::new(),
            renewal: OnceCell::new(),
        }
    }

    pub fn run(&self, id: usize) -> Outcome {
        let start = Instant::now();
        let verdict = match id {
            1 => self.exact_mean(),
            2 => self.asymptotic_mean(),
            3 => self.limit_variance(),
            4 => self.fixed_point(),
            5 => self.contraction(),
            6 => self.limit_law(),
            7 => self.renewal_asymptotics(),
            8 => self.vlem(),
            9 => self.overshoot(),
            10 => self.depth_clt(),
            11 => self.construction_equivalence(),
            12 => self.lattice_oscillation(),
            13 => self.degenerate_trie(),
            14 => self.invariants(),
            _ => Err(Error::Config(format!("no criterion {id}"))),
        };
        let (status, detail) = match verdict {
            Ok((true, d)) => (Status::Pass, d),
            Ok((false, d)) if d.starts_with("skipped") => (Status::Skipped, d),
            Ok((false, d)) => (Status::Fail, d),
            Err(e) => (Status::Fail, format!("error: {e}")),
        };
        Outcome { id, title: title(id).into(), status, detail, seconds: start.elapsed().as_secs_f64() }
    }

    /// Runs every criterion, calling `report` as each finishes.
    pub fn run_all(&self, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
        (1..=CRITERIA)
            .map(|id| {
                let o = self.run(id);
                report(&o);
                o
            })
            .collect()
    }

    fn bst_large(&self) -> Result<&ExperimentResult> {
        if let Some(r) = self.bst_large.get() {
            return Ok(r);
        }
        let cfg = ExperimentConfig::new("bst", vec![self.budget.bst_n], self.budget.bst_replicas, self.seed);
        let r = run_with(&cfg, &ModelSpec::bst(), Execution::default())?;
        Ok(self.bst_large.get_or_init(|| r))
    }

    fn bst_fixpoint(&self) -> Result<&FixpointRun> {
        if let Some(r) = self.bst_fixpoint.get() {
            return Ok(r);
        }
        let r = iterate_to_fixpoint(&ModelSpec::bst(), self.budget.fixpoint_samples, 5e-3, 60, self.seed)?;
        Ok(self.bst_fixpoint.get_or_init(|| r))
    }

    fn renewal_table(&self) -> Result<&RenewalTable> {
        if let Some(t) = self.renewal.get() {
            return Ok(t);
        }
        let mut cfg = RenewalConfig::new(12.0, 0.05, RenewalMethod::BranchingEnumeration, self.seed);
        cfg.replicas = self.budget.renewal_replicas;
        let t = renewal_u(&ModelSpec::bst(), &cfg)?;
        Ok(self.renewal.get_or_init(|| t))
    }

    fn exact_mean(&self) -> Verdict {
        let exact = bst_exact_mean(20);
        let cfg = ExperimentConfig::new("bst", vec![3, 10, 20], self.budget.exact_mean_replicas, self.seed);
        let r = run_with(&cfg, &ModelSpec::bst(), Execution::default())?;
        let mut ok = true;
        let mut parts = Vec::new();
        for rec in &r.records {
            let e = exact[rec.n as usize];
            let z = (rec.mean_psi - e).abs() / rec.se_psi;
            ok &= z <= 4.0;
            parts.push(format!("n={} {:.4} vs {:.4} ({z:.1} SE)", rec.n, rec.mean_psi, e));
        }
        Ok((ok, parts.join("; ")))
    }

    fn asymptotic_mean(&self) -> Verdict {
        let rec = &self.bst_large()?.records[0];
        let n = rec.n as f64;
        let target = bst_mean_expansion(n);
        let tol = 4.0 * rec.se_psi + 0.002 * n;
        let gap = (rec.mean_psi - target).abs();
        Ok((gap <= tol, format!("n={} |{:.1} - {:.1}| = {gap:.1} <= {tol:.1}", rec.n, rec.mean_psi, target)))
    }

    fn limit_variance(&self) -> Verdict {
        let rec = &self.bst_large()?.records[0];
        let ratio = rec.var_psi / (rec.n as f64).powi(2);
        let rel = (ratio / bst_zeta() - 1.0).abs();
        Ok((rel <= 0.05, format!("Var/n^2 = {ratio:.5} vs {:.6} ({:.2}%)", bst_zeta(), 100.0 * rel)))
    }

    fn fixed_point(&self) -> Verdict {
        let bst = self.bst_fixpoint()?;
        let bst_rel = (bst.variance / bst_zeta() - 1.0).abs();
        let lattice_model = ModelSpec::lattice_example();
        let lattice = iterate_to_fixpoint(&lattice_model, self.budget.fixpoint_samples, 5e-3, 60, self.seed)?;
        let zeta = compute_zeta(&lattice_model)?;
        let lat_rel = (lattice.variance / zeta - 1.0).abs();
        let ok = bst.iterations <= 60
            && bst.mean.abs() <= 0.01
            && bst_rel <= 0.02
            && lattice.iterations <= 60
            && lattice.mean.abs() <= 0.01
            && lat_rel <= 0.03;
        Ok((
            ok,
            format!(
                "bst {} it, var {:.4} ({:.2}%); lattice {} it, var {:.5} vs {zeta:.5} ({:.2}%)",
                bst.iterations,
                bst.variance,
                100.0 * bst_rel,
                lattice.iterations,
                lattice.variance,
                100.0 * lat_rel
            ),
        ))
    }

    fn contraction(&self) -> Verdict {
        let rep = check_contraction(&ModelSpec::bst(), 20, 100_000, self.seed)?;
        let bound = 2.0 / 3.0 + self.thresholds.contraction_slack;
        let max = rep.max_ratio();
        Ok((
            max <= bound && rep.records.len() == 20,
            format!("max ratio {max:.4} vs {bound:.4} over {} pairs", rep.records.len()),
        ))
    }

    fn limit_law(&self) -> Verdict {
        let fp = self.bst_fixpoint()?;
        let replicas = self.budget.limit_law_replicas;
        let mut target = fp.clone();
        if replicas != fp.size {
            target.distribution = fp.distribution.thinned(replicas)?;
        }
        let bst = ModelSpec::bst();
        let mut w2 = Vec::new();
        for n in [100u64, 1_000, 10_000] {
            w2.push(check_limit_law(&bst, n, replicas, &target, self.seed)?.w2);
        }
        let decreasing = w2.windows(2).all(|w| w[1] < w[0]);
        let ok = decreasing && w2[2] <= self.thresholds.limit_law_w2;
        Ok((ok, format!("W2 = {:.4}, {:.4}, {:.4} ({} replicas)", w2[0], w2[1], w2[2], replicas)))
    }

    fn renewal_asymptotics(&self) -> Verdict {
        let tab = self.renewal_table()?;
        let (lo, hi) = tab
            .t
            .iter()
            .zip(&tab.u_hat)
            .filter(|(t, _)| (10.0 - 1e-9..=12.0 + 1e-9).contains(*t))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &u)| (lo.min(u), hi.max(u)));
        // U(1) has O(1) variance per tree, so it gets its own many-replica run
        let mut cfg = RenewalConfig::new(1.0, 0.05, RenewalMethod::BranchingEnumeration, self.seed ^ 1);
        cfg.replicas = 100_000;
        let u1 = renewal_u(&ModelSpec::bst(), &cfg)?.u_at(1.0).unwrap_or(f64::NAN);
        let oracle = bst_gamma_series_u(1.0);
        let ok = lo >= 1.95 && hi <= 2.05 && (u1 - 3.44).abs() <= 0.05;
        Ok((ok, format!("U_hat on [10,12] in [{lo:.4}, {hi:.4}]; U(1) = {u1:.4} (series {oracle:.4})")))
    }

    fn vlem(&self) -> Verdict {
        let v = vlem_integral(&ModelSpec::bst(), 12.0, self.renewal_table()?)?;
        Ok(((v + 2.0).abs() <= 0.1, format!("integral to 12 = {v:.4} vs -2")))
    }

    fn overshoot(&self) -> Verdict {
        let cfg = FringeConfig {
            n: 1_000_000,
            big_b: 1_000.0,
            gamma: 0.05,
            eps: 0.1,
            replicas: self.budget.overshoot_replicas,
            seed: self.seed,
        };
        let h = overshoot_classes(&ModelSpec::bst(), &cfg)?;
        let target = 2.0 * cfg.gamma;
        let worst = h.mass.iter().zip(&h.se).map(|(m, se)| (m - target).abs() / se).fold(0.0, f64::max);
        let total = h.total();
        let ok = worst <= 4.0 && total <= 4.0 + 4.0 * h.total_se;
        Ok((ok, format!("{} classes, worst |c - 0.1| = {worst:.2} SE, total {total:.4}", h.mass.len())))
    }

    fn depth_clt(&self) -> Verdict {
        let r = depth_clt_check(&ModelSpec::bst(), 100_000, self.budget.depth_replicas, self.seed)?;
        Ok((
            r.ks <= self.thresholds.depth_ks,
            format!("KS {:.4} vs {} (z mean {:.3}, var {:.3})", r.ks, self.thresholds.depth_ks, r.mean_z, r.var_z),
        ))
    }

    fn construction_equivalence(&self) -> Verdict {
        let crit = ks_critical(self.thresholds.ks_alpha, 10_000, 10_000);
        let mut ok = true;
        let mut parts = Vec::new();
        for model in [ModelSpec::bst(), ModelSpec::lattice_example()] {
            let (a, b) = construction_equivalence_sample(200, &model, 10_000, self.seed)?;
            let a: Vec<f64> = a.into_iter().map(|x| x as f64).collect();
            let b: Vec<f64> = b.into_iter().map(|x| x as f64).collect();
            let ks = ks_two_sample(&a, &b);
            ok &= ks < crit;
            parts.push(format!("{} KS {ks:.4}", model.id()));
        }
        Ok((ok, format!("{} (critical {crit:.4})", parts.join(", "))))
    }

    fn lattice_oscillation(&self) -> Verdict {
        if !self.budget.lattice_oscillation {
            return Ok((false, "skipped (full profile only)".into()));
        }
        let r =
            lattice_oscillation(&ModelSpec::lattice_example(), 4, 10_000.0, self.budget.lattice_replicas, self.seed)?;
        Ok((
            r.across_detected && r.within_ok,
            format!(
                "across-beta {:.2e} ({:.2} x 4SE), within-beta {:.2e} ({:.2} x 4SE)",
                r.across_spread, r.across_ratio, r.within_spread, r.within_ratio
            ),
        ))
    }

    fn degenerate_trie(&self) -> Verdict {
        let trie = ModelSpec::trie(&[0.5, 0.5])?;
        let cfg = ExperimentConfig::new("trie:0.5,0.5", vec![self.budget.trie_n], self.budget.trie_replicas, self.seed);
        let rec = &run_with(&cfg, &trie, Execution::default())?.records[0];
        let ratio = rec.var_psi / (rec.n as f64).powi(2);
        Ok((ratio <= 0.01, format!("n={} Var/n^2 = {ratio:.2e}", rec.n)))
    }

    fn invariants(&self) -> Verdict {
        let checks: [(&str, Check); 7] = [
            ("conservation", Suite::conservation),
            ("psi identity", Suite::psi_identity),
            ("determinism", Suite::determinism),
            ("E[C]=0", Suite::cost_mean_zero),
            ("W2 metric", Suite::w2_metric),
            ("concentration", Suite::concentration),
            ("smoothness", Suite::smoothness),
        ];
        let mut ok = true;
        let mut failed = Vec::new();
        for (name, check) in checks {
            match check(self) {
                Ok((true, _)) => {}
                Ok((false, d)) => {
                    ok = false;
                    failed.push(format!("{name}: {d}"));
                }
                Err(e) => {
                    ok = false;
                    failed.push(format!("{name}: error {e}"));
                }
            }
        }
        Ok((ok, if ok { "7/7 suites".into() } else { failed.join("; ") }))
    }

    fn conservation(&self) -> Verdict {
        let models = suite_models()?;
        for (k, model) in models.iter().enumerate() {
            for r in 0..50u64 {
                let mut rng = substream(self.seed, &[14, k as u64, r]);
                let n = 1 + (r * 37) % 2_000;
                let tree = grow_size_tree(n, model, &mut rng, true);
                tree.check_invariants()?;
                let items = build_incremental(n.min(300), model, &mut rng)?;
                items.check_invariants()?;
            }
        }
        Ok((true, String::new()))
    }

    fn psi_identity(&self) -> Verdict {
        for (k, model) in suite_models()?.iter().enumerate() {
            for r in 0..30u64 {
                let mut rng = substream(self.seed, &[15, k as u64, r]);
                let t = build_incremental(1 + r * 11, model, &mut rng)?;
                let size_tree = t.to_size_tree(false);
                let depth_sum: u64 = t.depths().iter().map(|&d| d as u64).sum();
                if size_tree.path_length_items() != t.path_length() || depth_sum != t.path_length() {
                    return Ok((false, format!("{} replica {r}", model.id())));
                }
                if model.id() == "bst" && size_tree.path_length_nodes() != size_tree.path_length_items() {
                    return Ok((false, "bst node and item path lengths differ".into()));
                }
            }
        }
        Ok((true, String::new()))
    }

    fn determinism(&self) -> Verdict {
        let mut cfg = ExperimentConfig::new("mary:3", vec![50, 500], 64, self.seed);
        cfg.measures = Measures::all();
        let model = ModelSpec::mary(3)?;
        let par = run_with(&cfg, &model, Execution::Parallel)?;
        let seq = run_with(&cfg, &model, Execution::Sequential)?;
        let same = par.records == seq.records;
        Ok((same, if same { String::new() } else { "parallel and sequential records differ".into() }))
    }

    fn cost_mean_zero(&self) -> Verdict {
        for model in suite_models()? {
            let mu = compute_constants(&model)?.mu;
            let (m, _) = sample_cost_moments(&model, mu, 200_000, self.seed);
            if m.mean().abs() > 4.0 * m.se() {
                return Ok((false, format!("{}: mean {:.2e} se {:.2e}", model.id(), m.mean(), m.se())));
            }
        }
        Ok((true, String::new()))
    }

    fn w2_metric(&self) -> Verdict {
        use rand::Rng;
        let mut rng = substream(self.seed, &[16]);
        for _ in 0..1_000 {
            let mut draw = || {
                let shift: f64 = rng.random_range(-1.0..1.0);
                EmpiricalDistribution::from_samples((0..20).map(|_| shift + rng.random::<f64>()).collect())
            };
            let (a, b, c) = (draw(), draw(), draw());
            let ab = wasserstein2(&a, &b)?;
            let ba = wasserstein2(&b, &a)?;
            let bc = wasserstein2(&b, &c)?;
            let ac = wasserstein2(&a, &c)?;
            if ab != ba || ac > ab + bc + 1e-12 || wasserstein2(&a, &a)? != 0.0 {
                return Ok((false, format!("axiom violated: {ab} {ba} {bc} {ac}")));
            }
        }
        Ok((true, String::new()))
    }

    fn concentration(&self) -> Verdict {
        // probe depths where n L_v is typically of order 10^4
        for (model, depth) in suite_models()?.into_iter().zip([8, 5, 3]) {
            let rep = concentration_check(
                &model,
                1_000_000,
                depth,
                &[1e2, 1e3, 1e4],
                self.budget.concentration_replicas,
                self.seed,
            )?;
            if !rep.passed() {
                let worst = rep.rows.iter().find(|r| !r.ok).expect("a failing row");
                return Ok((
                    false,
                    format!("{} x={} freq {:.3} > {:.3}", model.id(), worst.x, worst.frequency, worst.bound),
                ));
            }
        }
        Ok((true, String::new()))
    }

    fn smoothness(&self) -> Verdict {
        for model in suite_models()? {
            let rep = smoothness_check(&model, 10_000, &[0, 1, 10, 100], self.budget.smoothness_replicas, self.seed)?;
            if !rep.passed() || rep.rows[0].diff != 0.0 {
                return Ok((false, format!("{}: max constant {:.3}", model.id(), rep.max_constant)));
            }
        }
        Ok((true, String::new()))
    }
}

fn suite_models() -> Result<Vec<ModelSpec>> {
    Ok(vec![ModelSpec::bst(), ModelSpec::mary(3)?, ModelSpec::lattice_example()])
}

/// `U(t) = Σ_k 2^k P(Gamma(k, 1) <= t)` for the binary search tree, summed
/// term by term.
pub fn bst_gamma_series_u(t: f64) -> f64 {
    // P(Gamma(k,1) <= t) = 1 - e^{-t} Σ_{j<k} t^j / j!
    let mut total = 0.0;
    let mut partial = 0.0;
    let mut term = 1.0;
    for k in 1..200i32 {
        partial += term;
        term *= t / k as f64;
        let p = (1.0 - (-t).exp() * partial).max(0.0);
        total += 2f64.powi(k) * p;
        if 2f64.powi(k) * p < 1e-15 {
            break;
        }
    }
    total
}

/// Passes when no criterion failed.
pub fn all_passed(outcomes: &[Outcome]) -> bool {
    outcomes.iter().all(|o| o.status != Status::Fail)
}
