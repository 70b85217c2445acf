//! Split-vector laws and the named model presets.

use std::f64::consts::LN_2;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::rng::{substream, SimRng};
use crate::split::params::{check_components, DRAW_SUM_TOL};
use crate::split::{SplitParams, SplitVectorDraw};
use crate::{Error, Result};

/// Draws used to probe a continuous law for degenerate vectors at registration.
pub const REGISTRATION_PROBES: usize = 10_000;

type SamplerFn = dyn Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync;

/// User-supplied split-vector sampler.
#[derive(Clone)]
pub struct CustomSampler(Arc<SamplerFn>);

impl CustomSampler {
    pub fn new(f: impl Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync + 'static) -> Self {
        CustomSampler(Arc::new(f))
    }
}

impl fmt::Debug for CustomSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomSampler")
    }
}

/// A discrete split law: base vectors with probabilities. When `permute` is
/// set the drawn vector is additionally put in uniformly random order.
#[derive(Clone, Debug)]
pub struct DiscreteLaw {
    pub support: Vec<(Vec<f64>, f64)>,
    pub permute: bool,
}

#[derive(Clone, Debug)]
pub enum SplitLaw {
    /// `(U, 1-U)` with `U` uniform.
    UniformPair,
    /// `(V, 1-V)` with `V` the median of `2k+1` uniforms.
    MedianOf {
        k: usize,
        beta: Beta<f64>,
    },
    /// Spacings of `m-1` uniforms on `[0,1]`.
    Spacings {
        m: usize,
    },
    /// Products of `dim` uniforms and their complements, one per orthant.
    ProductUniform {
        dim: usize,
    },
    /// Deterministic vector.
    Fixed(Vec<f64>),
    Dirichlet {
        alpha: Vec<f64>,
        gammas: Vec<Gamma<f64>>,
    },
    Discrete(DiscreteLaw),
    Custom(CustomSampler),
}

impl SplitLaw {
    pub fn is_discrete(&self) -> bool {
        matches!(self, SplitLaw::Fixed(_) | SplitLaw::Discrete(_))
    }
}

/// Closed-form constants stored with a preset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownConstants {
    pub mu: f64,
    pub sigma2: f64,
    pub zeta: f64,
    pub contraction_factor: f64,
}

/// A named split-tree model: parameters, split law and metadata.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    name: String,
    args: Vec<f64>,
    params: SplitParams,
    law: SplitLaw,
    lattice_span: f64,
    known: Option<KnownConstants>,
}

impl ModelSpec {
    pub fn bst() -> Self {
        let zeta = 7.0 - 2.0 * std::f64::consts::PI.powi(2) / 3.0;
        ModelSpec {
            name: "bst".into(),
            args: vec![],
            params: SplitParams::new(2, 1, 0, 1).unwrap(),
            law: SplitLaw::UniformPair,
            lattice_span: 0.0,
            known: Some(KnownConstants { mu: 0.5, sigma2: 0.25, zeta, contraction_factor: 2.0 / 3.0 }),
        }
    }

    pub fn trie(p: &[f64]) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidModelArgs("trie needs at least two probabilities".into()));
        }
        check_components(p).map_err(|e| Error::InvalidModelArgs(format!("trie: {e}")))?;
        if p.contains(&1.0) {
            return Err(Error::InvalidModelArgs("trie: a component equal to 1 never splits".into()));
        }
        let mu: f64 = p.iter().map(|&x| -xlnx(x)).sum();
        let second: f64 = p.iter().map(|&x| if x > 0.0 { x * x.ln().powi(2) } else { 0.0 }).sum();
        let known = KnownConstants {
            mu,
            sigma2: (second - mu * mu).max(0.0),
            zeta: 0.0,
            contraction_factor: p.iter().map(|x| x * x).sum(),
        };
        Ok(ModelSpec {
            name: "trie".into(),
            args: p.to_vec(),
            params: SplitParams::new(p.len(), 0, 0, 1)?,
            lattice_span: lattice_span(p.iter().copied()),
            law: SplitLaw::Fixed(p.to_vec()),
            known: Some(known),
        })
    }

    /// Five-way lattice model: a random permutation of either
    /// `(1/2,1/8,1/8,1/8,1/8)` or `(1/2,1/4,1/4,0,0)`, each with probability 1/2.
    pub fn lattice_example() -> Self {
        let support = vec![(vec![0.5, 0.125, 0.125, 0.125, 0.125], 0.5), (vec![0.5, 0.25, 0.25, 0.0, 0.0], 0.5)];
        ModelSpec {
            name: "lattice_example".into(),
            args: vec![],
            params: SplitParams::new(5, 1, 0, 4).unwrap(),
            lattice_span: LN_2,
            law: SplitLaw::Discrete(DiscreteLaw { support, permute: true }),
            known: None,
        }
    }

    pub fn mary(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidModelArgs(format!("mary: m={m} must be at least 2")));
        }
        Self::continuous("mary", vec![m as f64], SplitParams::new(m, m - 1, 0, m - 1)?, SplitLaw::Spacings { m })
    }

    pub fn median_of(k: usize) -> Result<Self> {
        let beta = Beta::new(k as f64 + 1.0, k as f64 + 1.0)
            .map_err(|e| Error::InvalidModelArgs(format!("median_of: {e}")))?;
        Self::continuous("median_of", vec![k as f64], SplitParams::new(2, 1, 0, 1)?, SplitLaw::MedianOf { k, beta })
    }

    pub fn quadtree(dim: usize) -> Result<Self> {
        if !(1..=16).contains(&dim) {
            return Err(Error::InvalidModelArgs(format!("quadtree: dim={dim} must be in 1..=16")));
        }
        Self::continuous(
            "quadtree",
            vec![dim as f64],
            SplitParams::new(1 << dim, 1, 0, 1)?,
            SplitLaw::ProductUniform { dim },
        )
    }

    /// Dirichlet split vectors; `params` default to one item per node.
    pub fn dirichlet(alpha: &[f64], params: Option<SplitParams>) -> Result<Self> {
        if alpha.len() < 2 || alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidModelArgs("dirichlet needs >= 2 positive weights".into()));
        }
        let params = match params {
            Some(p) if p.b != alpha.len() => {
                return Err(Error::InvalidModelArgs(format!("dirichlet: b={} but {} weights", p.b, alpha.len())))
            }
            Some(p) => p,
            None => SplitParams::new(alpha.len(), 1, 0, 1)?,
        };
        let gammas = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::InvalidModelArgs(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::continuous("dirichlet", alpha.to_vec(), params, SplitLaw::Dirichlet { alpha: alpha.to_vec(), gammas })
    }

    /// User-defined model. The sampler is probed at registration: every probe
    /// must be a valid split vector and not all probes may be degenerate.
    pub fn custom(name: &str, params: SplitParams, lattice_span: f64, sampler: CustomSampler) -> Result<Self> {
        if !(lattice_span >= 0.0) {
            return Err(Error::InvalidModelArgs("lattice span must be >= 0".into()));
        }
        Self::continuous(name, vec![], params, SplitLaw::Custom(sampler)).map(|mut m| {
            m.lattice_span = lattice_span;
            m
        })
    }

    /// Model with an explicit discrete support, validated exactly.
    pub fn discrete(name: &str, params: SplitParams, law: DiscreteLaw) -> Result<Self> {
        let total: f64 = law.support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > DRAW_SUM_TOL {
            return Err(Error::InvalidModelArgs(format!("support probabilities sum to {total}")));
        }
        let mut degenerate = 0.0;
        for (v, p) in &law.support {
            if v.len() != params.b || !(*p >= 0.0) {
                return Err(Error::InvalidModelArgs("support vector length or weight".into()));
            }
            check_components(v)?;
            if v.contains(&1.0) {
                degenerate += p;
            }
        }
        if degenerate >= 1.0 - DRAW_SUM_TOL {
            return Err(Error::ModelInvariant("P(some V_i = 1) must be < 1".into()));
        }
        let span = lattice_span(law.support.iter().flat_map(|(v, _)| v.iter().copied()));
        Ok(ModelSpec {
            name: name.into(),
            args: vec![],
            params,
            lattice_span: span,
            law: SplitLaw::Discrete(law),
            known: None,
        })
    }

    fn continuous(name: &str, args: Vec<f64>, params: SplitParams, law: SplitLaw) -> Result<Self> {
        let model = ModelSpec { name: name.into(), args, params, law, lattice_span: 0.0, known: None };
        model.probe()?;
        Ok(model)
    }

    #[cfg(test)]
    pub(crate) fn unchecked(name: &str, params: SplitParams, law: SplitLaw) -> Self {
        ModelSpec { name: name.into(), args: vec![], params, law, lattice_span: 0.0, known: None }
    }

    fn probe(&self) -> Result<()> {
        let mut rng = substream(0x5eed, &[self.params.b as u64]);
        let mut buf = vec![0.0; self.params.b];
        let mut degenerate = 0;
        for _ in 0..REGISTRATION_PROBES {
            self.sample_into(&mut rng, &mut buf);
            check_components(&buf)?;
            if buf.contains(&1.0) {
                degenerate += 1;
            }
        }
        if degenerate == REGISTRATION_PROBES {
            return Err(Error::ModelInvariant(format!("{}: every probe draw had a component equal to 1", self.name)));
        }
        Ok(())
    }

    /// Replaces the split parameters (keeping the split law).
    pub fn with_params(mut self, params: SplitParams) -> Result<Self> {
        if params.b != self.params.b {
            return Err(Error::InvalidParams(format!(
                "branch factor {} does not match the split law ({})",
                params.b, self.params.b
            )));
        }
        self.params = params;
        Ok(self)
    }

    /// Looks a preset up by name. Argument conventions: `mary [m]`,
    /// `median_of [k]`, `quadtree [dim]`, `trie [p1..pb]`, `dirichlet [a1..ab]`.
    pub fn preset(name: &str, args: &[f64]) -> Result<Self> {
        let int_arg = |what: &str| -> Result<usize> {
            match args {
                [x] if *x >= 0.0 && x.fract() == 0.0 => Ok(*x as usize),
                _ => Err(Error::InvalidModelArgs(format!("{name} expects one integer {what}"))),
            }
        };
        let no_args = || -> Result<()> {
            if args.is_empty() {
                Ok(())
            } else {
                Err(Error::InvalidModelArgs(format!("{name} takes no arguments")))
            }
        };
        match name {
            "bst" => no_args().map(|_| Self::bst()),
            "lattice_example" => no_args().map(|_| Self::lattice_example()),
            "mary" => Self::mary(int_arg("m")?),
            "median_of" => Self::median_of(int_arg("k")?),
            "quadtree" => Self::quadtree(int_arg("dim")?),
            "trie" => Self::trie(args),
            "dirichlet" => Self::dirichlet(args, None),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[f64] {
        &self.args
    }

    /// Identifier including arguments, e.g. `trie(0.5,0.5)`.
    pub fn id(&self) -> String {
        if self.args.is_empty() {
            self.name.clone()
        } else {
            let a: Vec<String> = self.args.iter().map(|x| format!("{x}")).collect();
            format!("{}({})", self.name, a.join(","))
        }
    }

    pub fn params(&self) -> SplitParams {
        self.params
    }

    pub fn branching(&self) -> usize {
        self.params.b
    }

    pub fn law(&self) -> &SplitLaw {
        &self.law
    }

    /// Lattice span `d` of `ln V` (0 for nonlattice laws).
    pub fn lattice_span(&self) -> f64 {
        self.lattice_span
    }

    pub fn known_constants(&self) -> Option<KnownConstants> {
        self.known
    }

    /// Explicit `(vector, probability)` support for discrete laws. Vectors
    /// are listed in base order; permuted laws are symmetric in coordinates.
    pub fn discrete_support(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match &self.law {
            SplitLaw::Fixed(p) => Some(vec![(p.clone(), 1.0)]),
            SplitLaw::Discrete(d) => Some(d.support.clone()),
            _ => None,
        }
    }

    /// Draws one split vector into `out` (length `b`).
    pub fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.params.b);
        match &self.law {
            SplitLaw::UniformPair => {
                let u: f64 = rng.random();
                out[0] = u;
                out[1] = 1.0 - u;
            }
            SplitLaw::MedianOf { beta, .. } => {
                let v = beta.sample(rng);
                out[0] = v;
                out[1] = 1.0 - v;
            }
            SplitLaw::Spacings { .. } => normalise_with(out, || Exp1.sample(rng)),
            SplitLaw::ProductUniform { dim } => {
                let mut u = [0.0f64; 16];
                for x in u.iter_mut().take(*dim) {
                    *x = rng.random();
                }
                for (c, o) in out.iter_mut().enumerate() {
                    *o = (0..*dim).map(|j| if c >> j & 1 == 0 { u[j] } else { 1.0 - u[j] }).product();
                }
            }
            SplitLaw::Fixed(p) => out.copy_from_slice(p),
            SplitLaw::Dirichlet { gammas, .. } => {
                let mut it = gammas.iter();
                normalise_with(out, || it.next().unwrap().sample(rng))
            }
            SplitLaw::Discrete(law) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = &law.support[law.support.len() - 1].0;
                for (v, p) in &law.support {
                    acc += p;
                    if u < acc {
                        chosen = v;
                        break;
                    }
                }
                out.copy_from_slice(chosen);
                if law.permute {
                    shuffle(rng, out);
                }
            }
            SplitLaw::Custom(s) => (s.0)(rng, out),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> SplitVectorDraw {
        let mut v = vec![0.0; self.params.b];
        self.sample_into(rng, &mut v);
        SplitVectorDraw::new(v).expect("sampler produced an invalid split vector")
    }

    /// A uniformly chosen component of a fresh split vector.
    pub fn uniform_component<R: Rng>(&self, rng: &mut R, buf: &mut [f64]) -> f64 {
        self.sample_into(rng, buf);
        buf[rng.random_range(0..buf.len())]
    }

    /// Sampler of `V`, a uniformly random component of the split vector.
    pub fn uniform_component_sampler(&self) -> impl FnMut(&mut SimRng) -> f64 + '_ {
        let mut buf = vec![0.0; self.params.b];
        move |rng| self.uniform_component(rng, &mut buf)
    }
}

fn normalise_with(out: &mut [f64], mut draw: impl FnMut() -> f64) {
    let mut total = 0.0;
    for x in out.iter_mut() {
        *x = draw();
        total += *x;
    }
    for x in out.iter_mut() {
        *x /= total;
    }
}

fn shuffle<R: Rng>(rng: &mut R, v: &mut [f64]) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// `x ln x` with `0 ln 0 = 0`.
#[inline]
pub fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Largest `d` with every `ln v` (over positive `v`) in `d Z`, or 0.
pub fn lattice_span(values: impl Iterator<Item = f64>) -> f64 {
    let mut logs: Vec<f64> = values.filter(|&v| v > 0.0 && v < 1.0).map(|v| -v.ln()).collect();
    logs.sort_by(f64::total_cmp);
    logs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let Some(&smallest) = logs.first() else {
        return 0.0;
    };
    const MAX_DIVISOR: usize = 64;
    for k in 1..=MAX_DIVISOR {
        let d = smallest / k as f64;
        let on_lattice = logs.iter().all(|x| {
            let r = x / d;
            (r - r.round()).abs() < 1e-9 * r.max(1.0)
        });
        if on_lattice {
            return d;
        }
    }
    0.0
}

/// Serializable model reference: preset name, arguments and optional
/// `(s0, s1, s)` override.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSelector {
    pub name: String,
    #[serde(default)]
    pub args: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<[usize; 3]>,
}

impl ModelSelector {
    pub fn new(name: &str, args: &[f64]) -> Self {
        ModelSelector { name: name.into(), args: args.to_vec(), params: None }
    }

    /// Parses `name`, `name:a1,a2,...` or `name(a1,a2,...)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = match s.find([':', '(']) {
            Some(i) => (&s[..i], s[i + 1..].trim_end_matches(')')),
            None => (s, ""),
        };
        let args = rest
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| Error::InvalidModelArgs(format!("cannot parse `{t}` as a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelSelector { name: name.to_string(), args, params: None })
    }

    pub fn resolve(&self) -> Result<ModelSpec> {
        let model = ModelSpec::preset(&self.name, &self.args)?;
        match self.params {
            None => Ok(model),
            Some([s0, s1, s]) => {
                let p = SplitParams::new(model.branching(), s0, s1, s)?;
                model.with_params(p)
            }
        }
    }
}

/// One line of the preset catalogue.
pub struct CatalogueEntry {
    pub usage: &'static str,
    pub line: String,
}

pub fn catalogue() -> Vec<CatalogueEntry> {
    vec![
        CatalogueEntry {
            usage: "bst",
            line: "bst b=2 s0=1 s1=0 s=1 d=0  V=(U,1-U)".into(),
        },
        CatalogueEntry {
            usage: "trie:p1,...,pb",
            line: "trie(p1..pb) b=|p| s=1 s0=0 s1=0 d=span of ln p  V=p a.s.".into(),
        },
        CatalogueEntry {
            usage: "lattice_example",
            line: format!(
                "lattice_example d=ln2≈{LN_2:.6} b=5 s0=1 s1=0 s=4  V=perm(1/2,1/8,1/8,1/8,1/8) or perm(1/2,1/4,1/4,0,0)"
            ),
        },
        CatalogueEntry {
            usage: "mary:m",
            line: "mary(m) b=m s0=m-1 s1=0 s=m-1 d=0  V=spacings of m-1 uniforms".into(),
        },
        CatalogueEntry {
            usage: "median_of:k",
            line: "median_of(k) b=2 s0=1 s1=0 s=1 d=0  V~Beta(k+1,k+1)".into(),
        },
        CatalogueEntry {
            usage: "quadtree:dim",
            line: "quadtree(dim) b=2^dim s0=1 s1=0 s=1 d=0  V=products of uniforms".into(),
        },
        CatalogueEntry {
            usage: "dirichlet:a1,...,ab",
            line: "dirichlet(a1..ab) b=|a| s0=1 s1=0 s=1 (override with --params) d=0  V~Dirichlet(a)".into(),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn bst_params_match_example() {
        let m = ModelSpec::preset("bst", &[]).unwrap();
        assert_eq!(m.params(), SplitParams { b: 2, s0: 1, s1: 0, s: 1 });
        assert_eq!(m.lattice_span(), 0.0);
    }

    #[test]
    fn trie_is_deterministic() {
        let m = ModelSpec::preset("trie", &[0.5, 0.5]).unwrap();
        let mut rng = stream(1);
        for _ in 0..100 {
            assert_eq!(m.sample(&mut rng).components(), &[0.5, 0.5]);
        }
        assert_eq!(m.params(), SplitParams { b: 2, s0: 0, s1: 0, s: 1 });
        assert!((m.lattice_span() - LN_2).abs() < 1e-12);
        assert_eq!(ModelSpec::trie(&[0.6, 0.4]).unwrap().lattice_span(), 0.0);
    }

    #[test]
    fn lattice_support_values() {
        let m = ModelSpec::lattice_example();
        for (v, _) in m.discrete_support().unwrap() {
            for x in v {
                assert!([0.0, 0.125, 0.25, 0.5].contains(&x));
            }
        }
        assert!((m.lattice_span() - LN_2).abs() < 1e-15);
        let recomputed = lattice_span(m.discrete_support().unwrap().iter().flat_map(|(v, _)| v.clone()));
        assert!((recomputed - LN_2).abs() < 1e-12);
    }

    #[test]
    fn lattice_draws_are_powers_of_two() {
        let m = ModelSpec::lattice_example();
        let mut rng = stream(5);
        let mut buf = [0.0; 5];
        for _ in 0..10_000 {
            m.sample_into(&mut rng, &mut buf);
            for &v in &buf {
                if v > 0.0 {
                    let k = -v.ln() / LN_2;
                    assert!([1.0, 2.0, 3.0].contains(&k), "{v}");
                }
            }
        }
    }

    #[test]
    fn bad_presets_rejected() {
        assert!(matches!(ModelSpec::preset("nope", &[]), Err(Error::UnknownModel(_))));
        assert!(ModelSpec::preset("mary", &[1.0]).is_err());
        assert!(ModelSpec::preset("quadtree", &[0.0]).is_err());
        assert!(ModelSpec::preset("trie", &[0.5, 0.6]).is_err());
        assert!(ModelSpec::preset("trie", &[1.0, 0.0]).is_err());
        assert!(ModelSpec::preset("bst", &[1.0]).is_err());
        assert!(ModelSpec::preset("mary", &[2.5]).is_err());
    }

    #[test]
    fn every_preset_sums_to_one() {
        let models = [
            ModelSpec::bst(),
            ModelSpec::mary(4).unwrap(),
            ModelSpec::median_of(2).unwrap(),
            ModelSpec::quadtree(3).unwrap(),
            ModelSpec::trie(&[0.2, 0.3, 0.5]).unwrap(),
            ModelSpec::lattice_example(),
            ModelSpec::dirichlet(&[0.5, 1.0, 2.0], None).unwrap(),
        ];
        let mut rng = stream(11);
        for m in &models {
            let mut buf = vec![0.0; m.branching()];
            for _ in 0..100_000 {
                m.sample_into(&mut rng, &mut buf);
                let s: f64 = buf.iter().sum();
                assert!((s - 1.0).abs() <= 1e-12, "{} sum {s}", m.id());
            }
        }
    }

    #[test]
    fn uniform_component_mean_is_one_over_b() {
        let models = [
            ModelSpec::bst(),
            ModelSpec::mary(3).unwrap(),
            ModelSpec::quadtree(2).unwrap(),
            ModelSpec::lattice_example(),
            ModelSpec::trie(&[0.7, 0.3]).unwrap(),
        ];
        for m in &models {
            let mut rng = stream(3);
            let mut draw = m.uniform_component_sampler();
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let target = 1.0 / m.branching() as f64;
            assert!((mean - target).abs() <= 4.0 * se, "{}: {mean} vs {target}", m.id());
        }
    }

    #[test]
    fn custom_models_are_probed() {
        let p = SplitParams::new(2, 1, 0, 1).unwrap();
        let degenerate = CustomSampler::new(|_, out| {
            out[0] = 1.0;
            out[1] = 0.0;
        });
        assert!(ModelSpec::custom("stuck", p, 0.0, degenerate).is_err());
        let broken = CustomSampler::new(|_, out| {
            out[0] = 0.7;
            out[1] = 0.7;
        });
        assert!(ModelSpec::custom("broken", p, 0.0, broken).is_err());
        let ok = CustomSampler::new(|rng, out| {
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            out[0] = u;
            out[1] = 1.0 - u;
        });
        assert!(ModelSpec::custom("uniform", p, 0.0, ok).is_ok());
    }

    #[test]
    fn selector_parsing() {
        let s = ModelSelector::parse("trie:0.5,0.5").unwrap();
        assert_eq!(s.name, "trie");
        assert_eq!(s.args, vec![0.5, 0.5]);
        let s = ModelSelector::parse("mary(3)").unwrap();
        assert_eq!(s.resolve().unwrap().id(), "mary(3)");
        let mut s = ModelSelector::parse("dirichlet:1,1").unwrap();
        s.params = Some([0, 1, 2]);
        assert_eq!(s.resolve().unwrap().params(), SplitParams { b: 2, s0: 0, s1: 1, s: 2 });
        assert!(ModelSelector::parse("trie:a,b").is_err());
    }
}
