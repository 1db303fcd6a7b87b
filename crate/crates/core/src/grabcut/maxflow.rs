//! Exact s–t maximum flow on networks with real capacities.

use std::collections::VecDeque;

use crate::scalar::Real;

#[derive(Clone, Debug)]
struct Arc<F> {
    to: usize,
    cap: F,
}

/// Directed network over `nodes` inner nodes plus a source and a sink.
/// Arcs are stored in insertion order, which fixes the search order.
#[derive(Clone, Debug)]
pub struct FlowNetwork<F> {
    nodes: usize,
    arcs: Vec<Arc<F>>,
    tails: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinCut<F> {
    pub flow: F,
    /// `source_side[v]` for each inner node.
    pub source_side: Vec<bool>,
}

impl<F: Real> FlowNetwork<F> {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            arcs: Vec::new(),
            tails: Vec::new(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn source(&self) -> usize {
        self.nodes
    }

    pub fn sink(&self) -> usize {
        self.nodes + 1
    }

    fn push_pair(&mut self, u: usize, v: usize, cap_uv: F, cap_vu: F) {
        assert!(u < self.nodes + 2 && v < self.nodes + 2, "node out of range");
        assert!(
            cap_uv >= F::zero() && cap_vu >= F::zero(),
            "capacities must be non-negative"
        );
        self.arcs.push(Arc { to: v, cap: cap_uv });
        self.tails.push(u);
        self.arcs.push(Arc { to: u, cap: cap_vu });
        self.tails.push(v);
    }

    /// Arc `u → v` with capacity `cap_uv` and its reverse with `cap_vu`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap_uv: F, cap_vu: F) {
        assert!(u < self.nodes && v < self.nodes, "inner node out of range");
        self.push_pair(u, v, cap_uv, cap_vu);
    }

    /// `source → v` with `from_source` and `v → sink` with `to_sink`.
    pub fn add_terminal_edges(&mut self, v: usize, from_source: F, to_sink: F) {
        assert!(v < self.nodes, "inner node out of range");
        let (s, t) = (self.source(), self.sink());
        self.push_pair(s, v, from_source, F::zero());
        self.push_pair(v, t, to_sink, F::zero());
    }

    /// Capacity of the cut separating `source_side ∪ {s}` from the rest.
    pub fn cut_capacity(&self, source_side: &[bool]) -> F {
        let side = |v: usize| {
            if v == self.source() {
                true
            } else if v == self.sink() {
                false
            } else {
                source_side[v]
            }
        };
        self.arcs
            .iter()
            .zip(&self.tails)
            .filter(|(a, &u)| side(u) && !side(a.to))
            .map(|(a, _)| a.cap)
            .sum()
    }

    /// Multiplies every capacity by `factor > 0`.
    pub fn scaled(&self, factor: F) -> Self {
        let mut out = self.clone();
        out.arcs.iter_mut().for_each(|a| a.cap *= factor);
        out
    }
}

const NONE: usize = usize::MAX;
/// Parent marker of the two roots.
const ROOT: usize = usize::MAX - 1;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

/// Residual graph in CSR order plus the two search trees.
///
/// `parent[v]` is the arc joining `v` to its tree: `parent → v` in the source
/// tree and `v → parent` in the sink tree. Arcs `e` and `e ^ 1` are reverses.
struct Search<F> {
    first: Vec<usize>,
    order: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<F>,
    tree: Vec<Tree>,
    parent: Vec<usize>,
    stamp: Vec<u64>,
    depth: Vec<usize>,
    clock: u64,
    active: VecDeque<usize>,
    queued: Vec<bool>,
    orphans: VecDeque<usize>,
}

impl<F: Real> Search<F> {
    fn new(net: &FlowNetwork<F>) -> Self {
        let n = net.nodes + 2;
        let mut first = vec![0usize; n + 1];
        for &u in &net.tails {
            first[u + 1] += 1;
        }
        for v in 0..n {
            first[v + 1] += first[v];
        }
        let mut fill = first.clone();
        let mut order = vec![0usize; net.arcs.len()];
        for (e, &u) in net.tails.iter().enumerate() {
            order[fill[u]] = e;
            fill[u] += 1;
        }
        let mut search = Self {
            first,
            order,
            to: net.arcs.iter().map(|a| a.to).collect(),
            cap: net.arcs.iter().map(|a| a.cap).collect(),
            tree: vec![Tree::Free; n],
            parent: vec![NONE; n],
            stamp: vec![0; n],
            depth: vec![0; n],
            clock: 1,
            active: VecDeque::new(),
            queued: vec![false; n],
            orphans: VecDeque::new(),
        };
        for (root, tree) in [(net.source(), Tree::Source), (net.sink(), Tree::Sink)] {
            search.tree[root] = tree;
            search.parent[root] = ROOT;
            search.stamp[root] = search.clock;
            search.activate(root);
        }
        search
    }

    fn out_arcs(&self, v: usize) -> std::ops::Range<usize> {
        self.first[v]..self.first[v + 1]
    }

    fn activate(&mut self, v: usize) {
        if !self.queued[v] {
            self.queued[v] = true;
            self.active.push_back(v);
        }
    }

    fn tail(&self, e: usize) -> usize {
        self.to[e ^ 1]
    }

    fn parent_node(&self, v: usize) -> usize {
        let e = self.parent[v];
        match self.tree[v] {
            Tree::Source => self.tail(e),
            _ => self.to[e],
        }
    }

    /// Residual capacity of the arc that would hang `child` below `via` in `tree`.
    fn link_arc(&self, tree: Tree, e_child_to_via: usize) -> usize {
        match tree {
            Tree::Source => e_child_to_via ^ 1,
            _ => e_child_to_via,
        }
    }

    /// Grows the trees from the front active node; returns a bridging arc
    /// from the source tree into the sink tree.
    fn grow(&mut self) -> Option<usize> {
        while let Some(&p) = self.active.front() {
            if self.tree[p] != Tree::Free {
                for k in self.out_arcs(p) {
                    let e = self.order[k];
                    let q = self.to[e];
                    // arc oriented away from the tree root
                    let along = if self.tree[p] == Tree::Source { e } else { e ^ 1 };
                    if !(self.cap[along] > F::zero()) {
                        continue;
                    }
                    match self.tree[q] {
                        Tree::Free => {
                            self.tree[q] = self.tree[p];
                            self.parent[q] = along;
                            self.stamp[q] = self.stamp[p];
                            self.depth[q] = self.depth[p] + 1;
                            self.activate(q);
                        }
                        t if t != self.tree[p] => return Some(along),
                        _ => {}
                    }
                }
            }
            self.active.pop_front();
            self.queued[p] = false;
        }
        None
    }

    /// Pushes the bottleneck along `root_s → … → bridge → … → root_t` and
    /// orphans every node whose tree arc saturates.
    fn augment(&mut self, bridge: usize) -> F {
        let mut bottleneck = self.cap[bridge];
        let mut v = self.tail(bridge);
        while self.parent[v] != ROOT {
            let e = self.parent[v];
            bottleneck = bottleneck.min(self.cap[e]);
            v = self.tail(e);
        }
        let mut v = self.to[bridge];
        while self.parent[v] != ROOT {
            let e = self.parent[v];
            bottleneck = bottleneck.min(self.cap[e]);
            v = self.to[e];
        }

        self.cap[bridge] -= bottleneck;
        self.cap[bridge ^ 1] += bottleneck;
        let mut v = self.tail(bridge);
        while self.parent[v] != ROOT {
            let e = self.parent[v];
            let up = self.tail(e);
            self.cap[e] -= bottleneck;
            self.cap[e ^ 1] += bottleneck;
            if !(self.cap[e] > F::zero()) {
                self.parent[v] = NONE;
                self.orphans.push_back(v);
            }
            v = up;
        }
        let mut v = self.to[bridge];
        while self.parent[v] != ROOT {
            let e = self.parent[v];
            let up = self.to[e];
            self.cap[e] -= bottleneck;
            self.cap[e ^ 1] += bottleneck;
            if !(self.cap[e] > F::zero()) {
                self.parent[v] = NONE;
                self.orphans.push_back(v);
            }
            v = up;
        }
        bottleneck
    }

    /// Distance from `q` to its root if the path is intact, stamping it.
    fn rooted_depth(&mut self, q: usize) -> Option<usize> {
        let mut d = 0;
        let mut j = q;
        loop {
            if self.stamp[j] == self.clock {
                d += self.depth[j];
                break;
            }
            match self.parent[j] {
                NONE => return None,
                ROOT => {
                    self.stamp[j] = self.clock;
                    self.depth[j] = 0;
                    break;
                }
                _ => {
                    d += 1;
                    j = self.parent_node(j);
                }
            }
        }
        let mut k = d;
        let mut j = q;
        while self.stamp[j] != self.clock {
            self.stamp[j] = self.clock;
            self.depth[j] = k;
            k -= 1;
            j = self.parent_node(j);
        }
        Some(d)
    }

    fn adopt(&mut self) {
        while let Some(p) = self.orphans.pop_front() {
            let tree = self.tree[p];
            let mut best: Option<(usize, usize)> = None;
            for k in self.out_arcs(p) {
                let e = self.order[k];
                let q = self.to[e];
                let link = self.link_arc(tree, e);
                if self.tree[q] != tree || !(self.cap[link] > F::zero()) {
                    continue;
                }
                if let Some(d) = self.rooted_depth(q) {
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, link));
                    }
                }
            }
            if let Some((d, link)) = best {
                self.parent[p] = link;
                self.stamp[p] = self.clock;
                self.depth[p] = d + 1;
                continue;
            }
            for k in self.out_arcs(p) {
                let e = self.order[k];
                let q = self.to[e];
                if self.tree[q] != tree {
                    continue;
                }
                if self.cap[self.link_arc(tree, e)] > F::zero() {
                    self.activate(q);
                }
                if self.parent[q] != NONE && self.parent[q] != ROOT && self.parent_node(q) == p {
                    self.parent[q] = NONE;
                    self.orphans.push_back(q);
                }
            }
            self.tree[p] = Tree::Free;
        }
    }

    fn reachable_from(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.tree.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for k in self.out_arcs(u) {
                let e = self.order[k];
                let v = self.to[e];
                if self.cap[e] > F::zero() && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// Maximum flow value and the minimal source side of a minimum cut, by
/// Boykov–Kolmogorov tree search.
pub fn max_flow<F: Real>(net: &FlowNetwork<F>) -> MinCut<F> {
    let mut search = Search::new(net);
    let mut flow = F::zero();
    while let Some(bridge) = search.grow() {
        flow += search.augment(bridge);
        search.clock += 1;
        search.adopt();
    }
    let seen = search.reachable_from(net.source());
    MinCut {
        flow,
        source_side: seen[..net.nodes].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exhaustive_min_cut(net: &FlowNetwork<f64>) -> f64 {
        let n = net.nodes();
        (0u32..1 << n)
            .map(|bits| {
                let side: Vec<bool> = (0..n).map(|v| bits >> v & 1 == 1).collect();
                net.cut_capacity(&side)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn random_network(rng: &mut ChaCha8Rng) -> FlowNetwork<f64> {
        let n = rng.gen_range(1..=10);
        let mut net = FlowNetwork::new(n);
        for v in 0..n {
            let a = if rng.gen_bool(0.6) { rng.gen_range(0..20) as f64 } else { 0.0 };
            let b = if rng.gen_bool(0.6) { rng.gen_range(0..20) as f64 } else { 0.0 };
            net.add_terminal_edges(v, a, b);
        }
        for _ in 0..rng.gen_range(0..3 * n + 1) {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                net.add_edge(u, v, rng.gen_range(0..15) as f64, rng.gen_range(0..15) as f64);
            }
        }
        net
    }

    #[test]
    fn single_pixel() {
        let mut net = FlowNetwork::new(1);
        net.add_terminal_edges(0, 5.0, 3.0);
        let cut = max_flow(&net);
        assert_eq!(cut.flow, 3.0);
        assert_eq!(cut.source_side, vec![true]);
    }

    #[test]
    fn two_pixel_chain() {
        let mut net = FlowNetwork::new(2);
        net.add_terminal_edges(0, 4.0, 0.0);
        net.add_terminal_edges(1, 0.0, 4.0);
        net.add_edge(0, 1, 1.0, 0.0);
        let cut = max_flow(&net);
        assert_eq!(cut.flow, 1.0);
        assert_eq!(cut.source_side, vec![true, false]);
    }

    #[test]
    fn matches_exhaustive_cuts() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let net = random_network(&mut rng);
            let cut = max_flow(&net);
            let best = exhaustive_min_cut(&net);
            assert_eq!(cut.flow, best);
            assert_eq!(net.cut_capacity(&cut.source_side), best);
        }
    }

    #[test]
    fn scaling_keeps_the_cut() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..50 {
            let net = random_network(&mut rng);
            let a = max_flow(&net);
            let b = max_flow(&net.scaled(0.25));
            assert_eq!(a.source_side, b.source_side);
            assert_eq!(b.flow, a.flow * 0.25);
        }
    }
}
