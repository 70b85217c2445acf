//! Limit constants of a split-tree model.
//!
//! With `V` a uniformly random component of the split vector:
//! `μ = b E[-V ln V]`, `σ² = b E[V ln² V] - μ²`, contraction factor
//! `b E[V²]`, toll `C(𝒱) = 1 + μ⁻¹ Σ V_i ln V_i` and limit variance
//! `ζ = (μ⁻² E[(Σ V_i ln V_i)²] - 1) / (1 - b E[V²])`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous};

use crate::models::{xlnx, ModelSpec, SplitLaw};
use crate::par::{map_indexed, Execution};
use crate::quadrature::{integrate, integrate_2d};
use crate::rng::substream;
use crate::{Error, Result};

pub const QUADRATURE_TOL: f64 = 1e-10;
pub const MC_DRAWS: u64 = 10_000_000;
const MC_BATCHES: u64 = 100;
const MC_SEED: u64 = 0xC0_57A7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsMethod {
    ClosedForm,
    ExactEnumeration,
    Quadrature,
    MonteCarlo,
}

impl std::fmt::Display for ConstantsMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConstantsMethod::ClosedForm => "closed_form",
            ConstantsMethod::ExactEnumeration => "exact_enumeration",
            ConstantsMethod::Quadrature => "quadrature",
            ConstantsMethod::MonteCarlo => "monte_carlo",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub model: String,
    pub mu: f64,
    pub sigma2: f64,
    /// `b E[V²]`.
    pub contraction_factor: f64,
    #[serde(rename = "mean_C")]
    pub mean_c: f64,
    #[serde(rename = "second_moment_C")]
    pub second_moment_c: f64,
    pub zeta: f64,
    pub method: ConstantsMethod,
    pub error_bound: f64,
}

/// The four expectations every constant is built from.
#[derive(Clone, Copy, Debug)]
struct Raw {
    /// `b E[-V ln V]`, through the marginal of one component.
    mu: f64,
    /// `E[Σ V_i ln V_i]`, through the whole vector.
    sum_vlnv: f64,
    /// `b E[V ln² V]`.
    sum_vln2v: f64,
    /// `b E[V²]`.
    sum_v2: f64,
    /// `E[(Σ V_i ln V_i)²]`.
    sq_sum_vlnv: f64,
}

/// `1 + μ⁻¹ Σ V_i ln V_i`, with `0 ln 0 = 0`.
pub fn cost_c(draw: &[f64], mu: f64) -> f64 {
    1.0 + draw.iter().map(|&v| xlnx(v)).sum::<f64>() / mu
}

fn vector_terms(v: &[f64]) -> (f64, f64, f64) {
    let mut a = 0.0;
    let mut l2 = 0.0;
    let mut q = 0.0;
    for &x in v {
        if x > 0.0 {
            let l = x.ln();
            a += x * l;
            l2 += x * l * l;
            q += x * x;
        }
    }
    (a, l2, q)
}

fn report(model: &ModelSpec, raw: Raw, method: ConstantsMethod, error_bound: f64) -> Result<ConstantsReport> {
    let denom = 1.0 - raw.sum_v2;
    if !(denom > 0.0) {
        return Err(Error::ModelInvariant(format!("b E[V^2] = {} is not below 1", raw.sum_v2)));
    }
    if !(raw.mu > 0.0) {
        return Err(Error::ModelInvariant(format!("mu = {} is not positive", raw.mu)));
    }
    let second_moment_c = raw.sq_sum_vlnv / (raw.mu * raw.mu) - 1.0;
    // the digital case cancels exactly; rounding must not make ζ negative
    let second_moment_c = if second_moment_c.abs() < 1e-12 { 0.0 } else { second_moment_c };
    Ok(ConstantsReport {
        model: model.id(),
        mu: raw.mu,
        sigma2: (raw.sum_vln2v - raw.mu * raw.mu).max(0.0),
        contraction_factor: raw.sum_v2,
        mean_c: 1.0 + raw.sum_vlnv / raw.mu,
        second_moment_c,
        zeta: second_moment_c / denom,
        method,
        error_bound,
    })
}

/// Constants by the best available method: stored closed form, exact
/// enumeration, quadrature, then Monte Carlo.
pub fn compute_constants(model: &ModelSpec) -> Result<ConstantsReport> {
    for method in [ConstantsMethod::ClosedForm, ConstantsMethod::ExactEnumeration, ConstantsMethod::Quadrature] {
        match compute_constants_with(model, method) {
            Err(Error::NoEvaluationPath(_)) => continue,
            other => return other,
        }
    }
    compute_constants_with(model, ConstantsMethod::MonteCarlo)
}

/// Constants by a specific method; [`Error::NoEvaluationPath`] if the
/// method does not apply to the model.
pub fn compute_constants_with(model: &ModelSpec, method: ConstantsMethod) -> Result<ConstantsReport> {
    match method {
        ConstantsMethod::ClosedForm => closed_form(model),
        ConstantsMethod::ExactEnumeration => enumeration(model),
        ConstantsMethod::Quadrature => quadrature(model),
        ConstantsMethod::MonteCarlo => monte_carlo(model, MC_DRAWS, MC_SEED),
    }
}

pub fn compute_mu_sigma(model: &ModelSpec) -> Result<(f64, f64)> {
    compute_constants(model).map(|r| (r.mu, r.sigma2))
}

pub fn compute_zeta(model: &ModelSpec) -> Result<f64> {
    compute_constants(model).map(|r| r.zeta)
}

fn closed_form(model: &ModelSpec) -> Result<ConstantsReport> {
    let k = model
        .known_constants()
        .ok_or_else(|| Error::NoEvaluationPath(format!("{}: no closed form stored", model.id())))?;
    let second_moment_c = k.zeta * (1.0 - k.contraction_factor);
    Ok(ConstantsReport {
        model: model.id(),
        mu: k.mu,
        sigma2: k.sigma2,
        contraction_factor: k.contraction_factor,
        mean_c: 0.0,
        second_moment_c,
        zeta: k.zeta,
        method: ConstantsMethod::ClosedForm,
        error_bound: 1e-15,
    })
}

fn enumeration(model: &ModelSpec) -> Result<ConstantsReport> {
    let support = model
        .discrete_support()
        .ok_or_else(|| Error::NoEvaluationPath(format!("{}: not a discrete law", model.id())))?;
    // every quantity is symmetric in the coordinates, so permutations can be ignored
    let mut raw = Raw { mu: 0.0, sum_vlnv: 0.0, sum_vln2v: 0.0, sum_v2: 0.0, sq_sum_vlnv: 0.0 };
    for (v, p) in &support {
        let (a, l2, q) = vector_terms(v);
        raw.mu -= p * a;
        raw.sum_vlnv += p * a;
        raw.sum_vln2v += p * l2;
        raw.sum_v2 += p * q;
        raw.sq_sum_vlnv += p * a * a;
    }
    report(model, raw, ConstantsMethod::ExactEnumeration, 1e-14)
}

fn quadrature(model: &ModelSpec) -> Result<ConstantsReport> {
    let tol = QUADRATURE_TOL;
    let i1 = |f: &dyn Fn(f64) -> f64| integrate(f, 0.0, 1.0, tol);
    let h = |u: f64| xlnx(u) + xlnx(1.0 - u);
    let vln2v = |v: f64| if v > 0.0 { v * v.ln().powi(2) } else { 0.0 };
    let (raw, err) = match model.law() {
        SplitLaw::UniformPair | SplitLaw::MedianOf { .. } => {
            let density: Box<dyn Fn(f64) -> f64> = match model.law() {
                SplitLaw::MedianOf { k, .. } => {
                    let a = *k as f64 + 1.0;
                    let beta = Beta::new(a, a).map_err(|e| Error::InvalidModelArgs(e.to_string()))?;
                    Box::new(move |x| beta.pdf(x))
                }
                _ => Box::new(|_| 1.0),
            };
            let mu = i1(&|v| -2.0 * xlnx(v) * density(v));
            let a = i1(&|v| h(v) * density(v));
            let l2 = i1(&|v| 2.0 * vln2v(v) * density(v));
            let q = i1(&|v| 2.0 * v * v * density(v));
            let s2 = i1(&|v| h(v).powi(2) * density(v));
            let err = [mu, a, l2, q, s2].iter().map(|e| e.error).sum::<f64>();
            (Raw { mu: mu.value, sum_vlnv: a.value, sum_vln2v: l2.value, sum_v2: q.value, sq_sum_vlnv: s2.value }, err)
        }
        SplitLaw::Spacings { m } => {
            let m = *m;
            let mf = m as f64;
            // one spacing is Beta(1, m-1)
            let marginal = move |x: f64| (mf - 1.0) * (1.0 - x).powi(m as i32 - 2);
            let e_vlnv = i1(&|v| xlnx(v) * marginal(v));
            let e_vln2v = i1(&|v| vln2v(v) * marginal(v));
            let e_v2 = i1(&|v| v * v * marginal(v));
            let e_sq = i1(&|v| xlnx(v).powi(2) * marginal(v));
            let cross = if m == 2 {
                i1(&|v| xlnx(v) * xlnx(1.0 - v))
            } else {
                let c = (mf - 1.0) * (mf - 2.0);
                integrate_2d(
                    |x, y| c * xlnx(x) * xlnx(y) * (1.0 - x - y).max(0.0).powi(m as i32 - 3),
                    0.0,
                    1.0,
                    |_| 0.0,
                    |x| 1.0 - x,
                    tol,
                )
            };
            let err = mf * (e_vlnv.error + e_vln2v.error + e_v2.error + e_sq.error) + mf * (mf - 1.0) * cross.error;
            (
                Raw {
                    mu: -mf * e_vlnv.value,
                    sum_vlnv: mf * e_vlnv.value,
                    sum_vln2v: mf * e_vln2v.value,
                    sum_v2: mf * e_v2.value,
                    sq_sum_vlnv: mf * e_sq.value + mf * (mf - 1.0) * cross.value,
                },
                err,
            )
        }
        SplitLaw::ProductUniform { dim } => {
            // Σ_c V_c ln V_c = Σ_j h(U_j) and Σ_c V_c ln² V_c = Σ_j g(U_j) + Σ_{j≠k} h(U_j) h(U_k)
            let d = *dim as f64;
            let eh = i1(&h);
            let eh2 = i1(&|u| h(u).powi(2));
            let eg = i1(&|u| vln2v(u) + vln2v(1.0 - u));
            let eq = i1(&|u| u * u + (1.0 - u) * (1.0 - u));
            // μ through the marginal of one orthant: V = Π U_j, E[-V ln V] = d E[U]^{d-1} E[-U ln U]
            let emarg = i1(&|u| -xlnx(u));
            let b = 2f64.powi(*dim as i32);
            let mu = b * d * 0.5f64.powi(*dim as i32 - 1) * emarg.value;
            let err = b * d * emarg.error + d * d * (eh.error + eh2.error + eg.error) + eq.error * d;
            (
                Raw {
                    mu,
                    sum_vlnv: d * eh.value,
                    sum_vln2v: d * eg.value + d * (d - 1.0) * eh.value * eh.value,
                    sum_v2: eq.value.powi(*dim as i32),
                    sq_sum_vlnv: d * eh2.value + d * (d - 1.0) * eh.value * eh.value,
                },
                err,
            )
        }
        _ => return Err(Error::NoEvaluationPath(format!("{}: no component densities for quadrature", model.id()))),
    };
    report(model, raw, ConstantsMethod::Quadrature, err.max(f64::EPSILON))
}

/// Batched Monte Carlo; the error bound is four batch-means standard errors
/// (largest over μ, σ² and ζ).
pub fn monte_carlo(model: &ModelSpec, draws: u64, seed: u64) -> Result<ConstantsReport> {
    let batches = MC_BATCHES.min(draws.max(1));
    let per = (draws / batches).max(1);
    let b = model.branching();
    let sums = map_indexed(Execution::default(), batches as usize, |k| {
        let mut rng = substream(seed, &[k as u64]);
        let mut v = vec![0.0; b];
        let mut acc = [0.0f64; 4];
        for _ in 0..per {
            model.sample_into(&mut rng, &mut v);
            let (a, l2, q) = vector_terms(&v);
            acc[0] += a;
            acc[1] += l2;
            acc[2] += q;
            acc[3] += a * a;
        }
        acc.map(|x| x / per as f64)
    });
    let raw_of = |s: &[f64; 4]| Raw { mu: -s[0], sum_vlnv: s[0], sum_vln2v: s[1], sum_v2: s[2], sq_sum_vlnv: s[3] };
    let mut total = [0.0f64; 4];
    for s in &sums {
        for i in 0..4 {
            total[i] += s[i] / batches as f64;
        }
    }
    let mut rep = report(model, raw_of(&total), ConstantsMethod::MonteCarlo, 0.0)?;
    let per_batch: Vec<ConstantsReport> =
        sums.iter().map(|s| report(model, raw_of(s), ConstantsMethod::MonteCarlo, 0.0)).collect::<Result<_>>()?;
    let se = |f: fn(&ConstantsReport) -> f64| {
        let m: crate::stats::Moments = per_batch.iter().map(f).collect();
        m.se()
    };
    let worst = se(|r| r.mu).max(se(|r| r.sigma2)).max(se(|r| r.zeta));
    rep.error_bound = 4.0 * worst;
    Ok(rep)
}

/// `E[C(𝒱)]` and `E[C(𝒱)²]` estimated from fresh draws (a check that does
/// not reuse the integrals behind the report).
pub fn sample_cost_moments(model: &ModelSpec, mu: f64, draws: usize, seed: u64) -> (crate::stats::Moments, f64) {
    let mut rng = crate::rng::stream(seed);
    let mut v = vec![0.0; model.branching()];
    let mut m = crate::stats::Moments::new();
    let mut sq = 0.0;
    for _ in 0..draws {
        model.sample_into(&mut rng, &mut v);
        let c = cost_c(&v, mu);
        m.push(c);
        sq += c * c;
    }
    (m, sq / draws as f64)
}
