use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::size::{grow_tree_stats, multinomial_into};
use super::{SizeTree, SplitParams};
use crate::models::ModelSpec;
use crate::par::{map_indexed, Execution};
use crate::rng::substream;
use crate::{Error, Result};

/// Overflow redistribution rounds allowed for a single insertion.
pub const REDISTRIBUTION_CAP: u64 = 1_000_000;

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    items: Vec<u32>,
    depth: u32,
    split: Option<Box<[f64]>>,
    children: Option<Box<[u32]>>,
}

impl Node {
    fn leaf(depth: u32) -> Self {
        Node { items: Vec::new(), depth, split: None, children: None }
    }
}

/// Tree built by inserting items `1..=n` one at a time. Each node draws its
/// split vector when it first overflows and keeps it for good.
#[derive(Clone, Debug)]
pub struct ItemTree {
    model: ModelSpec,
    nodes: Vec<Node>,
    item_node: Vec<u32>,
    psi: u64,
}

impl ItemTree {
    pub fn new(model: &ModelSpec) -> Self {
        ItemTree { model: model.clone(), nodes: Vec::new(), item_node: Vec::new(), psi: 0 }
    }

    pub fn params(&self) -> SplitParams {
        self.model.params()
    }

    /// Number of items inserted so far.
    pub fn len(&self) -> usize {
        self.item_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_node.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Ψ, maintained incrementally: every move one level down adds one.
    pub fn path_length(&self) -> u64 {
        self.psi
    }

    /// Current depth of item `label` (1-based).
    pub fn depth_of(&self, label: usize) -> u32 {
        self.nodes[self.item_node[label - 1] as usize].depth
    }

    /// `D_1..D_n` at the current time.
    pub fn depths(&self) -> Vec<u32> {
        self.item_node.iter().map(|&u| self.nodes[u as usize].depth).collect()
    }

    /// Items held by each node, in node creation order (root first).
    pub fn node_items(&self) -> impl Iterator<Item = &[u32]> {
        self.nodes.iter().map(|n| n.items.as_slice())
    }

    fn child_of(&mut self, u: usize, i: usize) -> usize {
        let existing = self.nodes[u].children.as_ref().unwrap()[i];
        if existing != NONE {
            return existing as usize;
        }
        let id = self.nodes.len();
        let depth = self.nodes[u].depth + 1;
        self.nodes.push(Node::leaf(depth));
        self.nodes[u].children.as_mut().unwrap()[i] = id as u32;
        id
    }

    /// Inserts the next item.
    pub fn insert<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let label = self.item_node.len() as u32 + 1;
        if self.nodes.is_empty() {
            self.nodes.push(Node::leaf(0));
        }
        let mut u = 0;
        while let Some(v) = &self.nodes[u].split {
            let i = pick(v, rng);
            u = self.child_of(u, i);
            self.psi += 1;
        }
        self.nodes[u].items.push(label);
        self.item_node.push(u as u32);
        if self.nodes[u].items.len() > self.params().s {
            self.overflow(u, rng)?;
        }
        Ok(())
    }

    fn overflow<R: Rng>(&mut self, u: usize, rng: &mut R) -> Result<()> {
        let p = self.params();
        let mut work = vec![u];
        let mut rounds = 0u64;
        let mut v = vec![0.0; p.b];
        while let Some(w) = work.pop() {
            rounds += 1;
            if rounds > REDISTRIBUTION_CAP {
                return Err(Error::NonTerminating { rounds });
            }
            self.model.sample_into(rng, &mut v);
            let mut items = std::mem::take(&mut self.nodes[w].items);
            shuffle(&mut items, rng);
            let moving = items.split_off(p.s0);
            self.nodes[w].items = items;
            self.nodes[w].split = Some(v.clone().into_boxed_slice());
            self.nodes[w].children = Some(vec![NONE; p.b].into_boxed_slice());
            for (k, &item) in moving.iter().enumerate() {
                let i = if k < p.b * p.s1 { k / p.s1 } else { pick(&v, rng) };
                let c = self.child_of(w, i);
                self.nodes[c].items.push(item);
                self.item_node[item as usize - 1] = c as u32;
                self.psi += 1;
            }
            for &c in self.nodes[w].children.as_ref().unwrap().iter() {
                if c != NONE && self.nodes[c as usize].items.len() > p.s {
                    work.push(c as usize);
                }
            }
        }
        Ok(())
    }

    /// Checks node occupancy and that Ψ equals the sum of item depths.
    pub fn check_invariants(&self) -> Result<()> {
        let p = self.params();
        let mut held = 0;
        for (u, node) in self.nodes.iter().enumerate() {
            held += node.items.len();
            let ok = if node.split.is_some() {
                node.items.len() == p.s0
            } else {
                (1..=p.s.max(1)).contains(&node.items.len()) && node.items.len() <= p.s.max(p.s0)
            };
            if !ok {
                return Err(Error::ModelInvariant(format!("node {u} holds {} items", node.items.len())));
            }
        }
        if held != self.len() {
            return Err(Error::ModelInvariant(format!("{held} items stored, {} inserted", self.len())));
        }
        let total: u64 = self.depths().iter().map(|&d| d as u64).sum();
        if total != self.psi {
            return Err(Error::ModelInvariant(format!("Ψ={} but Σ D_i={total}", self.psi)));
        }
        Ok(())
    }

    /// The tree of subtree cardinalities; `annotate` adds `L_u` from the
    /// stored split vectors.
    pub fn to_size_tree(&self, annotate: bool) -> SizeTree {
        let mut tree = SizeTree::empty(self.params(), annotate);
        if self.nodes.is_empty() {
            return tree;
        }
        // children are always created after their parent
        let mut count: Vec<u64> = self.nodes.iter().map(|n| n.items.len() as u64).collect();
        for u in (0..self.nodes.len()).rev() {
            if let Some(ch) = &self.nodes[u].children {
                let s: u64 = ch.iter().filter(|&&c| c != NONE).map(|&c| count[c as usize]).sum();
                count[u] += s;
            }
        }
        let root = tree.push(count[0], 1.0, 0);
        let mut stack = vec![(0usize, root, 1.0f64)];
        while let Some((u, id, l)) = stack.pop() {
            let node = &self.nodes[u];
            let (Some(ch), Some(v)) = (&node.children, &node.split) else {
                continue;
            };
            for (i, &c) in ch.iter().enumerate() {
                if c != NONE {
                    let lc = l * v[i];
                    let cid = tree.push(count[c as usize], lc, node.depth + 1);
                    tree.attach(id, cid);
                    stack.push((c as usize, cid, lc));
                }
            }
        }
        tree
    }
}

fn pick<R: Rng>(v: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > 0.0 {
            acc += x;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

fn shuffle<T, R: Rng>(v: &mut [T], rng: &mut R) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Inserts items `1..=n` into an empty tree.
pub fn build_incremental<R: Rng>(n: u64, model: &ModelSpec, rng: &mut R) -> Result<ItemTree> {
    let mut tree = ItemTree::new(model);
    for _ in 0..n {
        tree.insert(rng)?;
    }
    Ok(tree)
}

/// Ψ samples from both constructions: `(recursive, incremental)`.
pub fn construction_equivalence_sample(
    n: u64,
    model: &ModelSpec,
    replicas: usize,
    seed: u64,
) -> Result<(Vec<u64>, Vec<u64>)> {
    let recursive = map_indexed(Execution::default(), replicas, |r| {
        grow_tree_stats(n, model, &mut substream(seed, &[0, r as u64])).psi
    });
    let incremental = map_indexed(Execution::default(), replicas, |r| {
        build_incremental(n, model, &mut substream(seed, &[1, r as u64])).map(|t| t.path_length())
    });
    Ok((recursive, incremental.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Depth of the `n`-th inserted item, sampled along its path only: the
/// cardinalities of `T^{n-1}` are generated top-down on the branch the new
/// item follows, jointly with the split vectors it meets.
pub fn sample_insertion_depth<R: Rng>(n: u64, model: &ModelSpec, rng: &mut R) -> Result<u32> {
    assert!(n >= 1, "need at least one item");
    let p = model.params();
    let s = p.s as u64;
    let mut v = vec![0.0; p.b];
    let mut counts = vec![0u64; p.b];
    let mut m = n - 1;
    let mut depth = 0u32;
    while m > s {
        model.sample_into(rng, &mut v);
        multinomial_into(p.free_items(m), &v, rng, &mut counts);
        let i = pick(&v, rng);
        m = counts[i] + p.s1 as u64;
        depth += 1;
    }
    if m < s {
        return Ok(depth);
    }
    // the leaf reached holds s items and overflows with the new one
    let free = (p.s + 1 - p.s0 - p.b * p.s1) as u64;
    for _ in 0..REDISTRIBUTION_CAP {
        model.sample_into(rng, &mut v);
        let pos = rng.random_range(0..=p.s);
        if pos < p.s0 {
            return Ok(depth);
        }
        let (i, others) = if pos < p.s0 + p.b * p.s1 { ((pos - p.s0) / p.s1, free) } else { (pick(&v, rng), free - 1) };
        let q = v[i].clamp(0.0, 1.0);
        let joined = if others == 0 || q == 0.0 {
            0
        } else if q == 1.0 {
            others
        } else {
            Binomial::new(others, q).expect("valid binomial").sample(rng)
        };
        let c = joined + p.s1 as u64 + u64::from(pos >= p.s0 + p.b * p.s1);
        depth += 1;
        if c <= s {
            return Ok(depth);
        }
    }
    Err(Error::NonTerminating { rounds: REDISTRIBUTION_CAP })
}
