use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::{SplitParams, SplitVectorDraw};
use crate::models::ModelSpec;
use crate::{Error, Result};

/// Draws `Mult(m; p)` into `out` by sequential conditional binomials.
pub(crate) fn multinomial_into<R: Rng>(m: u64, p: &[f64], rng: &mut R, out: &mut [u64]) {
    let mut left = m;
    let mut mass = 1.0;
    let last = p.len() - 1;
    for (i, (&pi, o)) in p.iter().zip(out.iter_mut()).enumerate() {
        if i == last || left == 0 {
            *o = if i == last { left } else { 0 };
            left -= *o;
            continue;
        }
        let q = if mass > 0.0 { (pi / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = if q == 0.0 {
            0
        } else if q == 1.0 {
            left
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        *o = k;
        left -= k;
        mass -= pi;
    }
}

/// Child cardinalities of an over-capacity node holding `n_v` items:
/// `Mult(n_v - s0 - b*s1; draw) + s1`.
pub fn split_cardinalities<R: Rng>(
    n_v: u64,
    draw: &SplitVectorDraw,
    params: SplitParams,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if n_v <= params.s as u64 {
        return Err(Error::ContractViolation(format!("node with {n_v} items does not exceed capacity s={}", params.s)));
    }
    if draw.len() != params.b {
        return Err(Error::InvalidDraw(format!("draw has {} components, b={}", draw.len(), params.b)));
    }
    let mut out = vec![0; params.b];
    multinomial_into(params.free_items(n_v), draw.components(), rng, &mut out);
    for c in &mut out {
        *c += params.s1 as u64;
    }
    Ok(out)
}

/// Receiver for the nodes produced by [`walk`].
pub(crate) trait Sink {
    type Handle: Copy;
    fn root(&mut self, n: u64) -> Self::Handle;
    /// Whether to split a node that is over capacity.
    fn expand(&mut self, _h: Self::Handle, _n: u64, _l: f64, _depth: u32) -> bool {
        true
    }
    /// Called once per nonempty child, left to right, right after the split.
    fn child(&mut self, parent: Self::Handle, slot: usize, n: u64, l: f64, depth: u32) -> Self::Handle;
}

/// Top-down generation with an explicit stack; children are visited left to
/// right. Randomness is consumed in visiting order, so the output is a pure
/// function of the stream.
pub(crate) fn walk<R: Rng, S: Sink>(n: u64, model: &ModelSpec, rng: &mut R, sink: &mut S) {
    if n == 0 {
        return;
    }
    let params = model.params();
    let b = params.b;
    let mut v = vec![0.0; b];
    let mut counts = vec![0u64; b];
    let mut born: Vec<(S::Handle, u64, f64)> = Vec::with_capacity(b);
    let mut stack = vec![(sink.root(n), n, 1.0f64, 0u32)];
    while let Some((h, nv, l, depth)) = stack.pop() {
        if nv <= params.s as u64 || !sink.expand(h, nv, l, depth) {
            continue;
        }
        model.sample_into(rng, &mut v);
        multinomial_into(params.free_items(nv), &v, rng, &mut counts);
        born.clear();
        for i in 0..b {
            let c = counts[i] + params.s1 as u64;
            if c > 0 {
                let li = l * v[i];
                born.push((sink.child(h, i, c, li, depth + 1), c, li));
            }
        }
        // right-most first, so the left-most child is expanded next
        for &(hc, c, li) in born.iter().rev() {
            stack.push((hc, c, li, depth + 1));
        }
    }
}

pub type NodeId = usize;

/// Tree of subtree cardinalities, stored as an arena with contiguous
/// children. Node 0 is the root.
#[derive(Clone, Debug)]
pub struct SizeTree {
    params: SplitParams,
    n: Vec<u64>,
    depth: Vec<u32>,
    first_child: Vec<u32>,
    child_count: Vec<u16>,
    lengths: Option<Vec<f64>>,
}

impl SizeTree {
    pub(crate) fn empty(params: SplitParams, annotate: bool) -> Self {
        SizeTree {
            params,
            n: Vec::new(),
            depth: Vec::new(),
            first_child: Vec::new(),
            child_count: Vec::new(),
            lengths: annotate.then(Vec::new),
        }
    }

    pub(crate) fn push(&mut self, n: u64, l: f64, depth: u32) -> NodeId {
        let id = self.n.len();
        self.n.push(n);
        self.depth.push(depth);
        self.first_child.push(0);
        self.child_count.push(0);
        if let Some(ls) = &mut self.lengths {
            ls.push(l);
        }
        id
    }

    pub(crate) fn attach(&mut self, parent: NodeId, child: NodeId) {
        if self.child_count[parent] == 0 {
            self.first_child[parent] = child as u32;
        }
        debug_assert_eq!(self.first_child[parent] as usize + self.child_count[parent] as usize, child);
        self.child_count[parent] += 1;
    }

    pub fn params(&self) -> SplitParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    pub fn root(&self) -> Option<NodeId> {
        (!self.n.is_empty()).then_some(0)
    }

    pub fn cardinality(&self, u: NodeId) -> u64 {
        self.n[u]
    }

    pub fn depth(&self, u: NodeId) -> u32 {
        self.depth[u]
    }

    /// `L_u`, when the tree was grown with annotation.
    pub fn length(&self, u: NodeId) -> Option<f64> {
        self.lengths.as_ref().map(|l| l[u])
    }

    pub fn children(&self, u: NodeId) -> std::ops::Range<NodeId> {
        let f = self.first_child[u] as usize;
        f..f + self.child_count[u] as usize
    }

    pub fn is_leaf(&self, u: NodeId) -> bool {
        self.child_count[u] == 0
    }

    /// Number of items stored in `u` itself.
    pub fn items_at(&self, u: NodeId) -> u64 {
        self.n[u] - self.children(u).map(|c| self.n[c]).sum::<u64>()
    }

    /// `Ψ = Σ_{u ≠ root} n_u`, the sum of item depths.
    pub fn path_length_items(&self) -> u64 {
        self.n.iter().skip(1).sum()
    }

    /// `Υ = Σ_{u ≠ root} N_u`, the sum of node depths.
    pub fn path_length_nodes(&self) -> u64 {
        self.depth.iter().map(|&d| d as u64).sum()
    }

    /// Checks conservation, leaf capacity and (if annotated) the length
    /// products.
    pub fn check_invariants(&self) -> Result<()> {
        let p = self.params;
        for u in 0..self.len() {
            let kids = self.children(u);
            if kids.is_empty() {
                if self.n[u] == 0 || (self.n[u] > p.s as u64) {
                    return Err(Error::ModelInvariant(format!("leaf {u} holds {} items", self.n[u])));
                }
                continue;
            }
            if self.n[u] <= p.s as u64 {
                return Err(Error::ModelInvariant(format!("node {u} with n={} was split", self.n[u])));
            }
            let total: u64 = kids.clone().map(|c| self.n[c]).sum();
            if total + p.s0 as u64 != self.n[u] {
                return Err(Error::ModelInvariant(format!(
                    "node {u}: children hold {total}, parent {} with s0={}",
                    self.n[u], p.s0
                )));
            }
            for c in kids {
                if self.n[c] == 0 || self.depth[c] != self.depth[u] + 1 {
                    return Err(Error::ModelInvariant(format!("child {c} of {u} malformed")));
                }
                if let Some(l) = &self.lengths {
                    if !(l[c] <= l[u] * (1.0 + 1e-12)) {
                        return Err(Error::ModelInvariant(format!("L grows from {u} to {c}")));
                    }
                }
            }
        }
        Ok(())
    }
}

struct ArenaSink<'a>(&'a mut SizeTree);

impl Sink for ArenaSink<'_> {
    type Handle = NodeId;
    fn root(&mut self, n: u64) -> NodeId {
        self.0.push(n, 1.0, 0)
    }
    fn child(&mut self, parent: NodeId, _slot: usize, n: u64, l: f64, depth: u32) -> NodeId {
        let id = self.0.push(n, l, depth);
        self.0.attach(parent, id);
        id
    }
}

/// Generates the tree of cardinalities for `n` items.
pub fn grow_size_tree<R: Rng>(n: u64, model: &ModelSpec, rng: &mut R, annotate_lengths: bool) -> SizeTree {
    let mut tree = SizeTree::empty(model.params(), annotate_lengths);
    walk(n, model, rng, &mut ArenaSink(&mut tree));
    tree
}

/// Path-length summary of one tree.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TreeStats {
    /// Sum of item depths.
    pub psi: u64,
    /// Sum of node depths.
    pub upsilon: u64,
    pub nodes: u64,
    /// `Σ_{u ≠ root} L_u` over materialized nodes.
    pub l_path: f64,
}

#[derive(Default)]
struct StatsSink(TreeStats);

impl Sink for StatsSink {
    type Handle = ();
    fn root(&mut self, _n: u64) {
        self.0.nodes = 1;
    }
    fn child(&mut self, _: (), _: usize, n: u64, l: f64, depth: u32) {
        self.0.l_path += l;
        self.0.psi += n;
        self.0.upsilon += depth as u64;
        self.0.nodes += 1;
    }
}

/// Same law and same stream consumption as [`grow_size_tree`], without
/// materializing the tree.
pub fn grow_tree_stats<R: Rng>(n: u64, model: &ModelSpec, rng: &mut R) -> TreeStats {
    let mut sink = StatsSink::default();
    walk(n, model, rng, &mut sink);
    sink.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn degenerate_draw_sends_everything_left() {
        let p = SplitParams::new(2, 1, 0, 1).unwrap();
        let d = SplitVectorDraw::new(vec![1.0, 0.0]).unwrap();
        let mut rng = stream(0);
        for _ in 0..100 {
            assert_eq!(split_cardinalities(3, &d, p, &mut rng).unwrap(), vec![2, 0]);
        }
    }

    #[test]
    fn split_contract_errors() {
        let p = SplitParams::new(2, 1, 0, 1).unwrap();
        let d = SplitVectorDraw::new(vec![0.5, 0.5]).unwrap();
        let mut rng = stream(0);
        assert!(matches!(split_cardinalities(1, &d, p, &mut rng), Err(Error::ContractViolation(_))));
        let d3 = SplitVectorDraw::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(split_cardinalities(5, &d3, p, &mut rng).is_err());
    }

    #[test]
    fn forced_items_are_added() {
        let p = SplitParams::new(3, 0, 1, 3).unwrap();
        let d = SplitVectorDraw::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mut rng = stream(9);
        for n in 4..200 {
            let c = split_cardinalities(n, &d, p, &mut rng).unwrap();
            assert_eq!(c.iter().sum::<u64>(), n);
            assert!(c.iter().all(|&x| x >= 1));
        }
    }

    #[test]
    fn multinomial_mean_matches() {
        let p = SplitParams::new(2, 1, 0, 1).unwrap();
        let d = SplitVectorDraw::new(vec![0.3, 0.7]).unwrap();
        let mut rng = stream(42);
        let reps = 100_000;
        let xs: Vec<f64> = (0..reps).map(|_| split_cardinalities(1000, &d, p, &mut rng).unwrap()[0] as f64).collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 299.7).abs() <= 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn small_trees() {
        let bst = ModelSpec::bst();
        let mut rng = stream(1);
        assert!(grow_size_tree(0, &bst, &mut rng, true).is_empty());
        let one = grow_size_tree(1, &bst, &mut rng, true);
        assert_eq!(one.len(), 1);
        assert!(one.is_leaf(0));
        assert_eq!(one.path_length_items(), 0);
        assert_eq!(one.path_length_nodes(), 0);
        assert_eq!(one.length(0), Some(1.0));
    }

    #[test]
    fn bst_has_one_node_per_item() {
        let bst = ModelSpec::bst();
        let mut rng = stream(2);
        for n in [2u64, 3, 10, 57, 1000] {
            let t = grow_size_tree(n, &bst, &mut rng, false);
            assert_eq!(t.len() as u64, n);
            t.check_invariants().unwrap();
            assert_eq!(t.path_length_items(), t.path_length_nodes());
        }
    }

    #[test]
    fn stats_agree_with_arena() {
        let models = [ModelSpec::bst(), ModelSpec::mary(3).unwrap(), ModelSpec::lattice_example()];
        for m in &models {
            for seed in 0..20 {
                let t = grow_size_tree(500, m, &mut stream(seed), true);
                let s = grow_tree_stats(500, m, &mut stream(seed));
                assert_eq!(s.psi, t.path_length_items());
                assert_eq!(s.upsilon, t.path_length_nodes());
                assert_eq!(s.nodes, t.len() as u64);
                t.check_invariants().unwrap();
            }
        }
    }
}
