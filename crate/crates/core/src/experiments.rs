//! Replicated Monte Carlo experiments on split trees and the checks built
//! on them.
//!
//! Replica `r` at size `n` always draws from `substream(seed, [n, r])`, so a
//! result depends only on its configuration, never on the thread count.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::constants::compute_constants;
use crate::fixpoint::{wasserstein2, EmpiricalDistribution, FixpointRun};
use crate::models::{ModelSelector, ModelSpec};
use crate::par::{map_indexed, Execution};
use crate::rng::substream;
use crate::split::{grow_tree_stats, sample_insertion_depth, walk, ItemTree, Sink};
use crate::stats::{ks_normal, ks_two_sample, summarize, Moments};
use crate::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
pub const DEFAULT_ITEM_CAP: u64 = 10_000_000_000;
/// Slack added to the Cauchy test on `q̂(n)` on top of four standard errors.
pub const CAUCHY_SLACK: f64 = 0.05;

fn default_true() -> bool {
    true
}

fn default_cap() -> u64 {
    DEFAULT_ITEM_CAP
}

/// What to record per replica. Ψ is always recorded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measures {
    #[serde(default = "default_true")]
    pub psi: bool,
    #[serde(default)]
    pub upsilon: bool,
    #[serde(default)]
    pub node_count: bool,
    #[serde(default)]
    pub depth_last: bool,
    #[serde(default)]
    pub l_annotation: bool,
}

impl Default for Measures {
    fn default() -> Self {
        Measures { psi: true, upsilon: false, node_count: false, depth_last: false, l_annotation: false }
    }
}

impl Measures {
    pub fn all() -> Self {
        Measures { psi: true, upsilon: true, node_count: true, depth_last: true, l_annotation: true }
    }
}

/// Flat configuration of one experiment (also the config-file schema).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Preset name with optional arguments, e.g. `trie:0.5,0.5`.
    pub model: String,
    /// Optional `[s0, s1, s]` override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<[usize; 3]>,
    pub n: Vec<u64>,
    pub replicas: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub measures: Measures,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Write one `Xₙ` sample file per `n` when an output directory is set.
    #[serde(default = "default_true")]
    pub write_samples: bool,
    /// Upper bound on `Σ n × replicas`.
    #[serde(default = "default_cap")]
    pub max_items: u64,
}

impl ExperimentConfig {
    pub fn new(model: &str, n: Vec<u64>, replicas: usize, seed: u64) -> Self {
        ExperimentConfig {
            model: model.into(),
            params: None,
            n,
            replicas,
            seed,
            measures: Measures::default(),
            out: None,
            write_samples: true,
            max_items: DEFAULT_ITEM_CAP,
        }
    }

    pub fn selector(&self) -> Result<ModelSelector> {
        let mut s = ModelSelector::parse(&self.model)?;
        s.params = self.params;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas < 2 {
            return Err(Error::Config(format!("replicas={} must be at least 2", self.replicas)));
        }
        if self.n.is_empty() || self.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n values must be nonempty, ascending and distinct".into()));
        }
        let items = self.n.iter().try_fold(0u64, |acc, &n| acc.checked_add(n.checked_mul(self.replicas as u64)?));
        match items {
            Some(t) if t <= self.max_items => Ok(()),
            _ => Err(Error::Budget { what: "total generated items", limit: self.max_items }),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    fn of(xs: impl Iterator<Item = f64>) -> Self {
        let m: Moments = xs.collect();
        Estimate { mean: m.mean(), se: m.se() }
    }
}

/// Estimates for one tree size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRecord {
    pub n: u64,
    pub mean_psi: f64,
    pub se_psi: f64,
    pub var_psi: f64,
    pub se_var_psi: f64,
    /// `mean Ψ / n - ln(n) / μ`.
    pub q_hat: f64,
    pub q_hat_se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upsilon: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_count: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_last: Option<Estimate>,
    /// `Σ_{u ≠ root} L_u`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_path: Option<Estimate>,
    /// Empirical mean subtracted from Ψ before dividing by `n`.
    pub xn_center: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xn_file: Option<String>,
    #[serde(skip)]
    pub psi: Vec<u64>,
}

impl SizeRecord {
    /// `Xₙ = (Ψ - mean Ψ) / n`, in replica order.
    pub fn xn(&self) -> Vec<f64> {
        self.psi.iter().map(|&p| (p as f64 - self.xn_center) / self.n as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub model_id: String,
    pub mu: f64,
    pub records: Vec<SizeRecord>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub code_version: String,
}

impl ExperimentResult {
    pub fn record(&self, n: u64) -> Option<&SizeRecord> {
        self.records.iter().find(|r| r.n == n)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Clone, Copy, Debug, Default)]
struct ReplicaSample {
    psi: u64,
    upsilon: u64,
    nodes: u64,
    l_path: f64,
    depth_last: u32,
}

/// Runs the experiment, writing outputs if `config.out` is set.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let model = config.selector()?.resolve()?;
    let mut result = run_with(config, &model, Execution::default())?;
    if let Some(dir) = &config.out {
        write_outputs(&mut result, dir)?;
    }
    Ok(result)
}

/// Runs the experiment for an already-resolved model, without I/O.
pub fn run_with(config: &ExperimentConfig, model: &ModelSpec, exec: Execution) -> Result<ExperimentResult> {
    config.validate()?;
    let started_unix = unix_now();
    let mu = compute_constants(model)?.mu;
    let m = &config.measures;
    let mut records = Vec::with_capacity(config.n.len());
    for &n in &config.n {
        let samples = map_indexed(exec, config.replicas, |r| -> Result<ReplicaSample> {
            let stats = grow_tree_stats(n, model, &mut substream(config.seed, &[n, r as u64]));
            let depth_last = if m.depth_last && n > 0 {
                sample_insertion_depth(n, model, &mut substream(config.seed, &[n, r as u64, 1]))?
            } else {
                0
            };
            Ok(ReplicaSample {
                psi: stats.psi,
                upsilon: stats.upsilon,
                nodes: stats.nodes,
                l_path: stats.l_path,
                depth_last,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let psi: Vec<f64> = samples.iter().map(|s| s.psi as f64).collect();
        let sum = summarize(&psi);
        let nf = n.max(1) as f64;
        let est = |on: bool, f: fn(&ReplicaSample) -> f64| on.then(|| Estimate::of(samples.iter().map(f)));
        records.push(SizeRecord {
            n,
            mean_psi: sum.mean,
            se_psi: sum.mean_se,
            var_psi: sum.variance,
            se_var_psi: sum.variance_se,
            q_hat: sum.mean / nf - nf.ln() / mu,
            q_hat_se: sum.mean_se / nf,
            upsilon: est(m.upsilon, |s| s.upsilon as f64),
            node_count: est(m.node_count, |s| s.nodes as f64),
            depth_last: est(m.depth_last, |s| s.depth_last as f64),
            l_path: est(m.l_annotation, |s| s.l_path),
            xn_center: sum.mean,
            xn_file: None,
            psi: samples.iter().map(|s| s.psi).collect(),
        });
    }
    Ok(ExperimentResult {
        config: config.clone(),
        model_id: model.id(),
        mu,
        records,
        started_unix,
        finished_unix: unix_now(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// File-name friendly model id: `trie(0.5,0.5)` becomes `trie_0.5_0.5`.
pub fn slug(model_id: &str) -> String {
    model_id.trim_end_matches(')').chars().map(|c| if c == '(' || c == ',' { '_' } else { c }).collect()
}

/// Writes `experiment_<model>_seed<seed>.json`, the summary CSV and one
/// `xn_<model>_n<n>_seed<seed>.csv` per size. Returns the paths written.
pub fn write_outputs(result: &mut ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let tag = slug(&result.model_id);
    let seed = result.config.seed;
    let mut written = Vec::new();
    if result.config.write_samples {
        for rec in &mut result.records {
            let name = format!("xn_{tag}_n{}_seed{seed}.csv", rec.n);
            let path = dir.join(&name);
            let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
            writeln!(w, "x")?;
            for x in rec.xn() {
                writeln!(w, "{x}")?;
            }
            w.flush()?;
            rec.xn_file = Some(name);
            written.push(path);
        }
    }
    let summary = dir.join(format!("summary_{tag}_seed{seed}.csv"));
    write_summary_csv(result, &summary)?;
    written.push(summary);
    let json = dir.join(format!("experiment_{tag}_seed{seed}.json"));
    std::fs::write(&json, serde_json::to_string_pretty(result)?)?;
    written.push(json);
    Ok(written)
}

pub fn write_summary_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "n",
        "mean_psi",
        "se_psi",
        "var_psi",
        "se_var_psi",
        "q_hat",
        "q_hat_se",
        "mean_upsilon",
        "se_upsilon",
        "mean_nodes",
        "se_nodes",
        "mean_depth_last",
        "se_depth_last",
        "mean_l_path",
        "se_l_path",
    ])?;
    let opt = |e: &Option<Estimate>| match e {
        Some(e) => [e.mean.to_string(), e.se.to_string()],
        None => [String::new(), String::new()],
    };
    for r in &result.records {
        let mut row = vec![
            r.n.to_string(),
            r.mean_psi.to_string(),
            r.se_psi.to_string(),
            r.var_psi.to_string(),
            r.se_var_psi.to_string(),
            r.q_hat.to_string(),
            r.q_hat_se.to_string(),
        ];
        for e in [&r.upsilon, &r.node_count, &r.depth_last, &r.l_path] {
            row.extend(opt(e));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Exact `E[Ψ_n]` for the binary search tree, `n = 0..=n_max`, from
/// `E[Ψ_n] = n - 1 + (2/n) Σ_{k<n} E[Ψ_k]`.
pub fn bst_exact_mean(n_max: usize) -> Vec<f64> {
    let mut e = vec![0.0; n_max + 1];
    let mut prefix = 0.0;
    for n in 1..=n_max {
        prefix += e[n - 1];
        e[n] = (n - 1) as f64 + 2.0 * prefix / n as f64;
    }
    e
}

/// `2n ln n + (2γ - 4) n + 2 ln n + 2γ + 1`.
pub fn bst_mean_expansion(n: f64) -> f64 {
    2.0 * n * n.ln() + (2.0 * EULER_GAMMA - 4.0) * n + 2.0 * n.ln() + 2.0 * EULER_GAMMA + 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QPoint {
    pub n: u64,
    pub q: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanAsymptotics {
    pub points: Vec<QPoint>,
    /// `|q̂| difference` between the two largest sizes.
    pub cauchy_gap: f64,
    pub cauchy_tol: f64,
    pub stable: bool,
    pub lattice: bool,
    /// Limit of `q(n)` when known in closed form.
    pub reference: Option<f64>,
    /// `|q̂(n_max) - q(n_max)|` against the exact expansion, with its 4·SE bound.
    pub reference_gap: Option<f64>,
    pub reference_ok: Option<bool>,
}

pub fn check_mean_asymptotics(model: &ModelSpec, result: &ExperimentResult) -> Result<MeanAsymptotics> {
    let recs = &result.records;
    if recs.len() < 3 || (recs[recs.len() - 1].n as f64) < 4.0 * recs[0].n as f64 {
        return Err(Error::InsufficientCoverage("need >= 3 sizes spanning >= 2 octaves".into()));
    }
    let points: Vec<QPoint> = recs.iter().map(|r| QPoint { n: r.n, q: r.q_hat, se: r.q_hat_se }).collect();
    let (a, b) = (&points[points.len() - 2], &points[points.len() - 1]);
    let cauchy_gap = (a.q - b.q).abs();
    let cauchy_tol = 4.0 * a.se.hypot(b.se) + CAUCHY_SLACK;
    let is_bst = model.name() == "bst" && model.params() == ModelSpec::bst().params();
    let (reference, reference_gap, reference_ok) = if is_bst {
        let nf = b.n as f64;
        let exact_q = bst_mean_expansion(nf) / nf - 2.0 * nf.ln();
        let gap = (b.q - exact_q).abs();
        (Some(2.0 * EULER_GAMMA - 4.0), Some(gap), Some(gap <= 4.0 * b.se))
    } else {
        (None, None, None)
    };
    Ok(MeanAsymptotics {
        points,
        cauchy_gap,
        cauchy_tol,
        stable: cauchy_gap <= cauchy_tol,
        lattice: model.lattice_span() > 0.0,
        reference,
        reference_gap,
        reference_ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationRow {
    pub beta: f64,
    pub n: u64,
    pub q: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub span: f64,
    pub rows: Vec<OscillationRow>,
    /// Largest `|q_i - q_j|` among sizes sharing a β, and the largest ratio
    /// of such a difference to `4 sqrt(SE_i² + SE_j²)`.
    pub within_spread: f64,
    pub within_ratio: f64,
    /// Same over per-β means.
    pub across_spread: f64,
    pub across_ratio: f64,
    pub within_ok: bool,
    pub across_detected: bool,
}

/// Sizes `n = round(exp(j d + β))` inside `[n_scale, n_scale e^{2d}]`.
pub fn oscillation_sizes(span: f64, beta: f64, n_scale: f64) -> Vec<u64> {
    let lo = ((n_scale.ln() - beta) / span).ceil() as i64;
    let hi = ((n_scale.ln() + 2.0 * span - beta) / span).floor() as i64;
    (lo..=hi).map(|j| (j as f64 * span + beta).exp().round() as u64).collect()
}

/// `q̂` on β-classes `n ≈ e^{jd + β}`: a periodic second-order term shows up
/// as spread across β exceeding the noise, with sizes in one class agreeing.
pub fn lattice_oscillation(
    model: &ModelSpec,
    beta_points: usize,
    n_scale: f64,
    replicas: usize,
    seed: u64,
) -> Result<OscillationReport> {
    let d = model.lattice_span();
    if d <= 0.0 {
        return Err(Error::ContractViolation(format!("{} is nonlattice (d = 0)", model.id())));
    }
    if beta_points < 2 || replicas < 2 {
        return Err(Error::Config("need >= 2 beta points and >= 2 replicas".into()));
    }
    let mu = compute_constants(model)?.mu;
    let mut rows = Vec::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for k in 0..beta_points {
        let beta = k as f64 * d / beta_points as f64;
        let mut idx = Vec::new();
        for n in oscillation_sizes(d, beta, n_scale) {
            let psi = map_indexed(Execution::default(), replicas, |r| {
                grow_tree_stats(n, model, &mut substream(seed, &[n, r as u64])).psi as f64
            });
            let m: Moments = psi.into_iter().collect();
            let nf = n as f64;
            idx.push(rows.len());
            rows.push(OscillationRow { beta, n, q: m.mean() / nf - nf.ln() / mu, se: m.se() / nf });
        }
        classes.push(idx);
    }
    let mut within_spread: f64 = 0.0;
    let mut within_ratio: f64 = 0.0;
    for idx in &classes {
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                let diff = (rows[i].q - rows[j].q).abs();
                within_spread = within_spread.max(diff);
                within_ratio = within_ratio.max(diff / (4.0 * rows[i].se.hypot(rows[j].se)));
            }
        }
    }
    let means: Vec<(f64, f64)> = classes
        .iter()
        .map(|idx| {
            let k = idx.len() as f64;
            let q = idx.iter().map(|&i| rows[i].q).sum::<f64>() / k;
            let se = idx.iter().map(|&i| rows[i].se.powi(2)).sum::<f64>().sqrt() / k;
            (q, se)
        })
        .collect();
    let mut across_spread: f64 = 0.0;
    let mut across_ratio: f64 = 0.0;
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            let diff = (means[a].0 - means[b].0).abs();
            across_spread = across_spread.max(diff);
            across_ratio = across_ratio.max(diff / (4.0 * means[a].1.hypot(means[b].1)));
        }
    }
    Ok(OscillationReport {
        span: d,
        rows,
        within_spread,
        within_ratio,
        across_spread,
        across_ratio,
        within_ok: within_ratio <= 1.0,
        across_detected: across_ratio > 1.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub n: u64,
    pub w2: f64,
    pub ks: f64,
    pub xn_variance: f64,
}

/// Distances between centered `Xₙ` and the fixed-point sample. `replicas`
/// must equal the fixed-point sample size.
pub fn check_limit_law(
    model: &ModelSpec,
    n: u64,
    replicas: usize,
    fixpoint: &FixpointRun,
    seed: u64,
) -> Result<LimitLaw> {
    if replicas != fixpoint.distribution.size() {
        return Err(Error::SizeMismatch { left: replicas, right: fixpoint.distribution.size() });
    }
    let psi = map_indexed(Execution::default(), replicas, |r| {
        grow_tree_stats(n, model, &mut substream(seed, &[n, r as u64])).psi as f64
    });
    let mean = psi.iter().sum::<f64>() / replicas as f64;
    let xn = EmpiricalDistribution::from_samples(psi.iter().map(|p| (p - mean) / n as f64).collect());
    Ok(LimitLaw {
        n,
        w2: wasserstein2(&xn, &fixpoint.distribution)?,
        ks: ks_two_sample(xn.samples(), fixpoint.distribution.samples()),
        xn_variance: xn.variance(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthClt {
    pub n: u64,
    pub replicas: usize,
    pub ks: f64,
    pub mean_z: f64,
    pub var_z: f64,
}

/// KS distance of `(D_n - ln(n)/μ) / sqrt(σ² μ⁻³ ln n)` to `N(0, 1)`, with
/// `D_n` the depth of the last inserted item.
pub fn depth_clt_check(model: &ModelSpec, n: u64, replicas: usize, seed: u64) -> Result<DepthClt> {
    let c = compute_constants(model)?;
    if c.sigma2 <= 1e-12 {
        return Err(Error::ContractViolation(format!("{}: sigma^2 = 0, depths do not fluctuate", model.id())));
    }
    if n < 2 {
        return Err(Error::Config("depth CLT needs n >= 2".into()));
    }
    let ln_n = (n as f64).ln();
    let center = ln_n / c.mu;
    let scale = (c.sigma2 / c.mu.powi(3) * ln_n).sqrt();
    let z = map_indexed(Execution::default(), replicas, |r| {
        sample_insertion_depth(n, model, &mut substream(seed, &[n, r as u64])).map(|d| (d as f64 - center) / scale)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let m: Moments = z.iter().copied().collect();
    Ok(DepthClt { n, replicas, ks: ks_normal(&z), mean_z: m.mean(), var_z: m.variance() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessRow {
    pub k: u64,
    /// `E[Ψ~(T^{n+K})] - E[Ψ~(T^n)]`.
    pub diff: f64,
    pub se: f64,
    /// `diff / (K ln(n + K))`.
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub n: u64,
    pub rows: Vec<SmoothnessRow>,
    pub nonnegative: bool,
    pub monotone: bool,
    pub max_constant: f64,
    /// Bound used for the boundedness verdict, `2/μ + 1`.
    pub constant_bound: f64,
    pub bounded: bool,
}

impl SmoothnessReport {
    pub fn passed(&self) -> bool {
        self.nonnegative && self.monotone && self.bounded
    }
}

/// Growth of `Ψ~ = Ψ + n` when `K` items are added. Each replica inserts
/// `n + max K` items incrementally and reads `Ψ~` along the way, so the
/// differences are taken within one coupled run.
pub fn smoothness_check(model: &ModelSpec, n: u64, ks: &[u64], replicas: usize, seed: u64) -> Result<SmoothnessReport> {
    if n < 100 || replicas < 2 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("smoothness needs n >= 100, replicas >= 2, ascending K".into()));
    }
    let mu = compute_constants(model)?.mu;
    let k_max = ks.last().copied().unwrap_or(0);
    let runs = map_indexed(Execution::default(), replicas, |r| -> Result<Vec<f64>> {
        let mut rng = substream(seed, &[n, r as u64]);
        let mut tree = ItemTree::new(model);
        for _ in 0..n {
            tree.insert(&mut rng)?;
        }
        let base = (tree.path_length() + n) as f64;
        let mut out = Vec::with_capacity(ks.len());
        let mut added = 0;
        for &k in ks {
            while added < k {
                tree.insert(&mut rng)?;
                added += 1;
            }
            out.push((tree.path_length() + n + k) as f64 - base);
        }
        debug_assert_eq!(added, k_max);
        Ok(out)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let rows: Vec<SmoothnessRow> = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let m: Moments = runs.iter().map(|r| r[i]).collect();
            let denom = k as f64 * ((n + k) as f64).ln();
            SmoothnessRow { k, diff: m.mean(), se: m.se(), constant: if k == 0 { 0.0 } else { m.mean() / denom } }
        })
        .collect();
    let nonnegative = rows.iter().all(|r| r.diff >= -3.0 * r.se);
    let monotone = (1..rows.len()).all(|i| {
        let step: Moments = runs.iter().map(|r| r[i] - r[i - 1]).collect();
        step.mean() >= -3.0 * step.se()
    });
    let max_constant = rows.iter().map(|r| r.constant).fold(0.0, f64::max);
    let constant_bound = 2.0 / mu + 1.0;
    Ok(SmoothnessReport {
        n,
        rows,
        nonnegative,
        monotone,
        max_constant,
        constant_bound,
        bounded: max_constant.is_finite() && max_constant <= constant_bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpsilonPoint {
    pub n: u64,
    /// `E[N] / n`.
    pub alpha: Estimate,
    /// `E[Υ]/n - α̂ ln(n)/μ`.
    pub q_upsilon: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpsilonReport {
    pub points: Vec<UpsilonPoint>,
    pub alpha_stable: bool,
    pub q_stable: bool,
}

/// Node path length `Υ`: estimates `α̂ = E[N]/n` and the `Υ` analogue of
/// `q̂(n)`, and checks both settle over the two largest sizes.
pub fn upsilon_corollary_check(
    model: &ModelSpec,
    n_values: &[u64],
    replicas: usize,
    seed: u64,
) -> Result<UpsilonReport> {
    if model.lattice_span() > 0.0 {
        return Err(Error::ContractViolation(format!("{} is a lattice model", model.id())));
    }
    if n_values.len() < 2 || replicas < 2 {
        return Err(Error::Config("need >= 2 sizes and >= 2 replicas".into()));
    }
    let mu = compute_constants(model)?.mu;
    let points: Vec<UpsilonPoint> = n_values
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let st = map_indexed(Execution::default(), replicas, |r| {
                grow_tree_stats(n, model, &mut substream(seed, &[n, r as u64]))
            });
            UpsilonPoint {
                n,
                alpha: Estimate::of(st.iter().map(|s| s.nodes as f64 / nf)),
                q_upsilon: Estimate::of(st.iter().map(|s| s.upsilon as f64 / nf - s.nodes as f64 / nf * nf.ln() / mu)),
            }
        })
        .collect();
    let settled = |f: fn(&UpsilonPoint) -> Estimate| {
        let a = f(&points[points.len() - 2]);
        let b = f(&points[points.len() - 1]);
        (a.mean - b.mean).abs() <= 4.0 * a.se.hypot(b.se) + CAUCHY_SLACK
    };
    Ok(UpsilonReport { alpha_stable: settled(|p| p.alpha), q_stable: settled(|p| p.q_upsilon), points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub x: f64,
    /// Nodes at the probed depth with `n L_v > x`.
    pub nodes: u64,
    /// Of those, the fraction with `|n_v - n L_v| > (n L_v)^{2/3}`.
    pub frequency: f64,
    pub se: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n: u64,
    pub depth: u32,
    pub rows: Vec<ConcentrationRow>,
}

impl ConcentrationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.ok)
    }
}

struct DepthProbe {
    depth: u32,
    found: Vec<(u64, f64)>,
}

impl Sink for DepthProbe {
    type Handle = ();
    fn root(&mut self, _: u64) {}
    fn expand(&mut self, _: (), _: u64, _: f64, depth: u32) -> bool {
        depth < self.depth
    }
    fn child(&mut self, _: (), _: usize, n: u64, l: f64, depth: u32) {
        if depth == self.depth {
            self.found.push((n, l));
        }
    }
}

/// How often subtree sizes at a fixed depth stray from `n L_v` by more than
/// `(n L_v)^{2/3}`, against the bound `x^{-1/4}` (with 3·SE slack).
pub fn concentration_check(
    model: &ModelSpec,
    n: u64,
    depth: u32,
    xs: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    let found: Vec<Vec<(u64, f64)>> = map_indexed(Execution::default(), replicas, |r| {
        let mut probe = DepthProbe { depth, found: Vec::new() };
        walk(n, model, &mut substream(seed, &[n, r as u64]), &mut probe);
        probe.found
    });
    let nf = n as f64;
    let rows = xs
        .iter()
        .map(|&x| {
            let (mut total, mut bad) = (0u64, 0u64);
            for &(nv, l) in found.iter().flatten() {
                let expected = nf * l;
                if expected > x {
                    total += 1;
                    if (nv as f64 - expected).abs() > expected.powf(2.0 / 3.0) {
                        bad += 1;
                    }
                }
            }
            let f = if total > 0 { bad as f64 / total as f64 } else { 0.0 };
            let se = if total > 0 { (f * (1.0 - f) / total as f64).sqrt() } else { 0.0 };
            let bound = x.powf(-0.25);
            ConcentrationRow { x, nodes: total, frequency: f, se, bound, ok: total > 0 && f <= bound + 3.0 * se }
        })
        .collect();
    Ok(ConcentrationReport { n, depth, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_bst_means() {
        let e = bst_exact_mean(20);
        assert!((e[3] - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(e[1], 0.0);
        assert_eq!(e[2], 1.0);
        let h20: f64 = (1..=20).map(|k| 1.0 / k as f64).sum();
        assert!((e[20] - (42.0 * h20 - 80.0)).abs() < 1e-9, "{}", e[20]);
    }

    #[test]
    fn tiny_sizes_are_deterministic() {
        let cfg = ExperimentConfig::new("bst", vec![1, 2], 50, 3);
        let r = run(&cfg).unwrap();
        assert_eq!((r.records[0].mean_psi, r.records[0].var_psi), (0.0, 0.0));
        assert_eq!((r.records[1].mean_psi, r.records[1].var_psi), (1.0, 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::new("bst", vec![10], 1, 0).validate().is_err());
        assert!(ExperimentConfig::new("bst", vec![10, 10], 5, 0).validate().is_err());
        assert!(ExperimentConfig::new("bst", vec![20, 10], 5, 0).validate().is_err());
        let mut c = ExperimentConfig::new("bst", vec![1000], 100, 0);
        c.max_items = 10_000;
        assert!(matches!(c.validate(), Err(Error::Budget { .. })));
    }

    #[test]
    fn oscillation_sizes_share_phase() {
        let d = std::f64::consts::LN_2;
        let ns = oscillation_sizes(d, 0.3, 10_000.0);
        assert!(ns.len() >= 2);
        for w in ns.windows(2) {
            let ratio = w[1] as f64 / w[0] as f64;
            assert!((ratio - 2.0).abs() < 1e-3);
        }
        assert!(ns.iter().all(|&n| (10_000..=40_001).contains(&n)));
        assert!(lattice_oscillation(&ModelSpec::bst(), 4, 1000.0, 10, 1).is_err());
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("trie(0.5,0.5)"), "trie_0.5_0.5");
        assert_eq!(slug("bst"), "bst");
    }

    #[test]
    fn rejected_models() {
        let trie = ModelSpec::trie(&[0.5, 0.5]).unwrap();
        assert!(matches!(depth_clt_check(&trie, 100, 10, 1), Err(Error::ContractViolation(_))));
        assert!(upsilon_corollary_check(&ModelSpec::lattice_example(), &[100, 200], 10, 1).is_err());
    }
}
