//! The limit fixed-point equation `X = Σ V_k X^(k) + C(𝒱)`, solved by
//! iterating the smoothing operator `T` on empirical distributions.

use std::io::Write;
use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::constants::{compute_constants, cost_c};
use crate::models::ModelSpec;
use crate::par::{fill_chunks, sort_f64, Execution};
use crate::rng::substream;
use crate::{Error, Result};

/// Output samples generated per random substream in [`apply_t`].
pub const CHUNK: usize = 4096;

/// A probability law represented by a sorted sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_unstable_by(f64::total_cmp);
        EmpiricalDistribution { samples }
    }

    fn from_sorted(samples: Vec<f64>) -> Self {
        debug_assert!(samples.windows(2).all(|w| w[0] <= w[1]));
        EmpiricalDistribution { samples }
    }

    pub fn point_mass(x: f64, size: usize) -> Self {
        EmpiricalDistribution { samples: vec![x; size] }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn size(&self) -> usize {
        self.samples.len()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.size() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let n = self.size() as f64;
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `k`-th central moment (plain average).
    pub fn central_moment(&self, k: i32) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|x| (x - m).powi(k)).sum::<f64>() / self.size() as f64
    }

    /// Shifts the sample to mean zero.
    pub fn centered(mut self) -> Self {
        let m = self.mean();
        for x in &mut self.samples {
            *x -= m;
        }
        self
    }

    /// Multiplies every sample by `a > 0`.
    pub fn scaled(mut self, a: f64) -> Self {
        assert!(a > 0.0);
        for x in &mut self.samples {
            *x *= a;
        }
        self
    }

    /// Reduces to `size` points by averaging consecutive blocks of order
    /// statistics. `size` must divide the current size.
    pub fn thinned(&self, size: usize) -> Result<Self> {
        if size == 0 || !self.size().is_multiple_of(size) {
            return Err(Error::SizeMismatch { left: self.size(), right: size });
        }
        let k = self.size() / size;
        Ok(Self::from_sorted(self.samples.chunks(k).map(|c| c.iter().sum::<f64>() / k as f64).collect()))
    }

    /// One value per line under a `x` header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x")?;
        for x in &self.samples {
            writeln!(w, "{x}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One application of `T`: each output is `Σ V_k x_k + C(𝒱)` with a fresh
/// split vector and `x_k` drawn with replacement from `input`. A base seed
/// is taken from `rng`; output chunk `i` uses its own substream, so the
/// result does not depend on the thread count.
pub fn apply_t<R: RngCore>(
    input: &EmpiricalDistribution,
    model: &ModelSpec,
    mu: f64,
    out_size: usize,
    rng: &mut R,
) -> EmpiricalDistribution {
    apply_t_seeded(input, model, mu, out_size, rng.next_u64(), Execution::default())
}

pub fn apply_t_seeded(
    input: &EmpiricalDistribution,
    model: &ModelSpec,
    mu: f64,
    out_size: usize,
    seed: u64,
    exec: Execution,
) -> EmpiricalDistribution {
    assert!(input.size() > 0 && mu > 0.0);
    let mut out = vec![0.0; out_size];
    fill_chunks(exec, &mut out, CHUNK, |ci, chunk| {
        let mut rng = substream(seed, &[ci as u64]);
        transform_chunk(input.samples(), model, mu, &mut rng, chunk, None);
    });
    sort_f64(exec, &mut out);
    EmpiricalDistribution::from_sorted(out)
}

/// Fills `out` with draws of `T`. When `twin` is given, the same split
/// vectors and indices are also applied to a second input of equal size.
fn transform_chunk<R: Rng>(
    x: &[f64],
    model: &ModelSpec,
    mu: f64,
    rng: &mut R,
    out: &mut [f64],
    mut twin: Option<(&[f64], &mut [f64])>,
) {
    let b = model.branching();
    let n = x.len();
    let mut v = vec![0.0; b];
    for (o, slot) in out.iter_mut().enumerate() {
        model.sample_into(rng, &mut v);
        let c = cost_c(&v, mu);
        let mut acc = c;
        let mut acc_twin = c;
        for &vk in &v {
            let j = rng.random_range(0..n);
            acc += vk * x[j];
            if let Some((y, _)) = &twin {
                acc_twin += vk * y[j];
            }
        }
        *slot = acc;
        if let Some((_, ty)) = &mut twin {
            ty[o] = acc_twin;
        }
    }
}

/// Exact `d₂` between two equal-size empirical laws: root mean square
/// difference of order statistics.
pub fn wasserstein2(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<f64> {
    if a.size() != b.size() {
        return Err(Error::SizeMismatch { left: a.size(), right: b.size() });
    }
    if a.size() < 2 {
        return Err(Error::ContractViolation("d2 needs at least two samples".into()));
    }
    let ss: f64 = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((ss / a.size() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixpointConfig {
    pub n_samples: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Consecutive steps below `tol` required to stop. Successive-iterate
    /// distances bottom out at the Monte Carlo noise level, so one lucky
    /// step is not enough.
    pub patience: usize,
    /// Re-center every iterate to mean zero.
    pub center: bool,
}

impl FixpointConfig {
    pub fn new(n_samples: usize, tol: f64, max_iter: usize, seed: u64) -> Self {
        FixpointConfig { n_samples, tol, max_iter, seed, patience: 2, center: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixpointRun {
    pub model: String,
    pub iterations: usize,
    /// `d₂` between successive iterates.
    pub steps: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub third_central_moment: f64,
    pub size: usize,
    pub tol: f64,
    pub seed: u64,
    pub converged: bool,
    #[serde(skip)]
    pub distribution: EmpiricalDistribution,
}

impl FixpointRun {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Geometric mean of successive step ratios over the first `k` steps.
    pub fn step_ratio(&self, k: usize) -> f64 {
        let s: Vec<f64> = self.steps.iter().take(k).copied().filter(|&x| x > 0.0).collect();
        if s.len() < 2 {
            return 0.0;
        }
        (s[s.len() - 1] / s[0]).powf(1.0 / (s.len() - 1) as f64)
    }
}

pub fn iterate_to_fixpoint(
    model: &ModelSpec,
    n_samples: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<FixpointRun> {
    iterate_with(model, &FixpointConfig::new(n_samples, tol, max_iter, seed), Execution::default())
}

/// Iterates `T` from the point mass at 0 until the successive-iterate
/// distance stays below `tol` for `patience` steps (or is exactly zero).
pub fn iterate_with(model: &ModelSpec, cfg: &FixpointConfig, exec: Execution) -> Result<FixpointRun> {
    if cfg.n_samples < 2 || !(cfg.tol > 0.0) {
        return Err(Error::Config("fixpoint needs n_samples >= 2 and tol > 0".into()));
    }
    let mu = compute_constants(model)?.mu;
    let mut current = EmpiricalDistribution::point_mass(0.0, cfg.n_samples);
    let mut steps = Vec::new();
    let mut below = 0;
    let mut converged = false;
    for it in 1..=cfg.max_iter {
        let mut next =
            apply_t_seeded(&current, model, mu, cfg.n_samples, substream(cfg.seed, &[it as u64]).next_u64(), exec);
        if cfg.center {
            next = next.centered();
        }
        let step = wasserstein2(&current, &next)?;
        steps.push(step);
        current = next;
        below = if step < cfg.tol { below + 1 } else { 0 };
        if step == 0.0 || below >= cfg.patience {
            converged = true;
            break;
        }
    }
    if !converged {
        let last = *steps.last().unwrap_or(&f64::NAN);
        let k = steps.len().min(5);
        let diverging = k >= 2 && steps[steps.len() - 1] > steps[steps.len() - k];
        return Err(Error::NonConvergence { iterations: steps.len(), last_step: last, diverging });
    }
    Ok(FixpointRun {
        model: model.id(),
        iterations: steps.len(),
        steps,
        mean: current.mean(),
        variance: current.variance(),
        third_central_moment: current.central_moment(3),
        size: current.size(),
        tol: cfg.tol,
        seed: cfg.seed,
        converged,
        distribution: current,
    })
}

/// The binary search tree instance, which is the quicksort equation
/// `Y = U Y + (1-U) Y* + C(U)`.
pub fn quicksort_fixpoint(n_samples: usize, tol: f64, max_iter: usize, seed: u64) -> Result<FixpointRun> {
    iterate_to_fixpoint(&ModelSpec::bst(), n_samples, tol, max_iter, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFamily {
    Normal,
    Uniform,
}

/// Input pairs for [`check_contraction`]: `φ` is a mean-zero sample with
/// standard deviation `sigma` and `ψ = a φ` for `a` cycling through `scales`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionConfig {
    pub trials: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub sigma: f64,
    pub scales: Vec<f64>,
}

impl ContractionConfig {
    pub fn new(trials: usize, n_samples: usize, seed: u64) -> Self {
        ContractionConfig { trials, n_samples, seed, sigma: 1.0, scales: vec![0.5, 0.8, 1.25, 2.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionRecord {
    pub family: PairFamily,
    pub scale: f64,
    pub d_in: f64,
    pub d_out: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub records: Vec<ContractionRecord>,
    /// Pairs skipped because `d₂(φ, ψ) = 0`.
    pub skipped: usize,
}

impl ContractionReport {
    pub fn max_ratio(&self) -> f64 {
        self.records.iter().map(|r| r.ratio).fold(f64::NAN, f64::max)
    }
}

pub fn check_contraction(model: &ModelSpec, trials: usize, n_samples: usize, seed: u64) -> Result<ContractionReport> {
    check_contraction_with(model, &ContractionConfig::new(trials, n_samples, seed))
}

/// `d₂(Tφ, Tψ) / d₂(φ, ψ)` with common split vectors and resampling
/// indices for both inputs.
pub fn check_contraction_with(model: &ModelSpec, cfg: &ContractionConfig) -> Result<ContractionReport> {
    use rand_distr::{Distribution, StandardNormal};
    let mu = compute_constants(model)?.mu;
    let mut report = ContractionReport::default();
    for t in 0..cfg.trials {
        let family = if t % 2 == 0 { PairFamily::Normal } else { PairFamily::Uniform };
        let scale = cfg.scales[(t / 2) % cfg.scales.len()];
        let mut rng = substream(cfg.seed, &[t as u64, 0]);
        let half = 3f64.sqrt();
        let raw: Vec<f64> = (0..cfg.n_samples)
            .map(|_| {
                cfg.sigma
                    * match family {
                        PairFamily::Normal => StandardNormal.sample(&mut rng),
                        PairFamily::Uniform => rng.random_range(-half..half),
                    }
            })
            .collect();
        let phi = EmpiricalDistribution::from_samples(raw).centered();
        let psi = phi.clone().scaled(scale);
        let d_in = wasserstein2(&phi, &psi)?;
        if d_in == 0.0 {
            report.skipped += 1;
            continue;
        }
        let mut tphi = vec![0.0; cfg.n_samples];
        let mut tpsi = vec![0.0; cfg.n_samples];
        let mut crn = substream(cfg.seed, &[t as u64, 1]);
        transform_chunk(phi.samples(), model, mu, &mut crn, &mut tphi, Some((psi.samples(), &mut tpsi)));
        let d_out =
            wasserstein2(&EmpiricalDistribution::from_samples(tphi), &EmpiricalDistribution::from_samples(tpsi))?;
        report.records.push(ContractionRecord { family, scale, d_in, d_out, ratio: d_out / d_in });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    const ZETA_BST: f64 = 0.420_263_732_6;

    #[test]
    fn w2_examples() {
        let a = EmpiricalDistribution::from_samples(vec![0.0, 1.0]);
        let b = EmpiricalDistribution::from_samples(vec![3.0, 1.0]);
        assert_abs_diff_eq!(wasserstein2(&a, &b).unwrap(), 2.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(wasserstein2(&a, &a).unwrap(), 0.0);
        let shifted = EmpiricalDistribution::from_samples(vec![-0.75, 0.25]);
        assert_abs_diff_eq!(wasserstein2(&a, &shifted).unwrap(), 0.75, epsilon = 1e-15);
        let c = EmpiricalDistribution::from_samples(vec![1.0, 2.0, 3.0]);
        assert!(matches!(wasserstein2(&a, &c), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn trie_maps_zero_to_zero() {
        let trie = ModelSpec::trie(&[0.5, 0.5]).unwrap();
        let zero = EmpiricalDistribution::point_mass(0.0, 1000);
        let out = apply_t(&zero, &trie, std::f64::consts::LN_2, 1000, &mut stream(1));
        assert!(out.samples().iter().all(|&x| x.abs() < 1e-15));
        let run = iterate_to_fixpoint(&trie, 1000, 1e-3, 10, 1).unwrap();
        assert_eq!(run.iterations, 1);
        assert!(run.variance < 1e-28);
    }

    #[test]
    fn first_iterate_has_variance_of_the_toll() {
        let bst = ModelSpec::bst();
        let zero = EmpiricalDistribution::point_mass(0.0, 100_000);
        let out = apply_t(&zero, &bst, 0.5, 100_000, &mut stream(2));
        let m2 = ZETA_BST / 3.0;
        // SE of the variance from the fourth moment of C(U)
        let se = ((out.central_moment(4) - m2 * m2) / 1e5).sqrt();
        assert!((out.variance() - m2).abs() <= 4.0 * se, "{} vs {m2}", out.variance());
        assert!(out.mean().abs() <= 4.0 * out.std() / 1e5f64.sqrt());
    }

    #[test]
    fn apply_t_is_thread_count_independent() {
        let bst = ModelSpec::bst();
        let input = EmpiricalDistribution::from_samples((0..10_000).map(|i| (i as f64 * 0.37).sin()).collect());
        let a = apply_t_seeded(&input, &bst, 0.5, 20_000, 9, Execution::Parallel);
        let b = apply_t_seeded(&input, &bst, 0.5, 20_000, 9, Execution::Sequential);
        assert_eq!(a, b);
    }

    #[test]
    fn non_convergence_is_reported() {
        let err = iterate_to_fixpoint(&ModelSpec::bst(), 2000, 1e-9, 3, 1).unwrap_err();
        match err {
            Error::NonConvergence { iterations, last_step, .. } => {
                assert_eq!(iterations, 3);
                assert!(last_step > 0.0);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn contraction_skips_identical_pairs() {
        let mut cfg = ContractionConfig::new(4, 2000, 3);
        cfg.scales = vec![1.0, 2.0];
        let r = check_contraction_with(&ModelSpec::bst(), &cfg).unwrap();
        assert_eq!(r.skipped, 2);
        assert_eq!(r.records.len(), 2);
    }

    #[test]
    fn run_json_skips_samples() {
        let run = iterate_to_fixpoint(&ModelSpec::trie(&[0.5, 0.5]).unwrap(), 100, 1e-3, 5, 1).unwrap();
        let j = serde_json::to_value(&run).unwrap();
        assert!(j.get("distribution").is_none());
        assert_eq!(j["iterations"], 1);
    }
}
