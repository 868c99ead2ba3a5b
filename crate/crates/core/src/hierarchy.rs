//! Threshold clustering, top-out compression and node annotation.

use std::collections::VecDeque;

use crate::geometry::{dist_sq_int, dist_sq_mixed, exp2, GridNet, Params, PointSet};
use crate::hash::HashSpec;
use crate::tree::{precision, ExactSketch, Node};
use crate::BuildError;

/// A distinct cluster of the uncompressed tree `T*`.
///
/// The cluster occupies the levels `birth..=death` of `T*`: a 1-path from
/// level `death` down to the node at `birth`, where it was formed by merging
/// its `children` (or is a singleton at level 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub members: Vec<u32>,
    pub birth: i32,
    pub death: i32,
    pub children: Vec<u32>,
    pub parent: Option<u32>,
    pub diam_sq: u64,
}

/// The uncompressed threshold hierarchy.
#[derive(Debug, Clone)]
pub struct ThresholdHierarchy {
    pub top: i32,
    pub clusters: Vec<Cluster>,
    pub root: u32,
}

struct Dsu {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    /// Returns `(winner, loser)` roots, or `None` if already joined.
    fn union(&mut self, a: u32, b: u32) -> Option<(u32, u32)> {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return None;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
        Some((a, b))
    }
}

fn max_cross(points: &PointSet, a: &[u32], b: &[u32]) -> u64 {
    let mut best = 0;
    for &i in a {
        for &j in b {
            best = best.max(points.dist_sq(i as usize, j as usize));
        }
    }
    best
}

impl ThresholdHierarchy {
    /// Level 0 holds singletons; level `ℓ ≥ 1` holds the connected components
    /// of the graph joining points at distance at most `2^ℓ`.
    pub fn build(points: &PointSet) -> Self {
        let n = points.len();
        let top = crate::geometry::top_level(points.dim(), points.phi());
        let mut pairs: Vec<(u64, u32, u32)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((points.dist_sq(i, j), i as u32, j as u32));
            }
        }
        pairs.sort_unstable();

        let mut clusters: Vec<Cluster> = (0..n as u32)
            .map(|i| Cluster {
                members: vec![i],
                birth: 0,
                death: top,
                children: Vec::new(),
                parent: None,
                diam_sq: 0,
            })
            .collect();
        let mut dsu = Dsu::new(n);
        // Cluster id currently represented by each DSU root.
        let mut current: Vec<u32> = (0..n as u32).collect();
        // Clusters absorbed into each root during the level being processed.
        let mut pending: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut next = 0usize;
        for level in 1..=top {
            let threshold = 1u64 << (2 * level);
            let mut touched = Vec::new();
            while next < pairs.len() && pairs[next].0 <= threshold {
                let (_, i, j) = pairs[next];
                next += 1;
                let (ri, rj) = (dsu.find(i), dsu.find(j));
                if ri == rj {
                    continue;
                }
                for r in [ri, rj] {
                    if pending[r as usize].is_empty() {
                        pending[r as usize].push(current[r as usize]);
                    }
                }
                let (win, lose) = dsu.union(ri, rj).unwrap();
                let moved = std::mem::take(&mut pending[lose as usize]);
                pending[win as usize].extend(moved);
                touched.push(win);
            }
            for r in touched {
                if dsu.find(r) != r || pending[r as usize].is_empty() {
                    continue;
                }
                let mut children = std::mem::take(&mut pending[r as usize]);
                children.sort_unstable();
                let id = clusters.len() as u32;
                let mut members: Vec<u32> = Vec::new();
                let mut diam_sq = 0;
                for &c in &children {
                    let child = &clusters[c as usize];
                    diam_sq = diam_sq
                        .max(child.diam_sq)
                        .max(max_cross(points, &members, &child.members));
                    members.extend_from_slice(&child.members);
                }
                members.sort_unstable();
                for &c in &children {
                    clusters[c as usize].death = level - 1;
                    clusters[c as usize].parent = Some(id);
                }
                clusters.push(Cluster {
                    members,
                    birth: level,
                    death: top,
                    children,
                    parent: None,
                    diam_sq,
                });
                current[r as usize] = id;
            }
        }
        let root = clusters.len() as u32 - 1;
        debug_assert_eq!(clusters[root as usize].members.len(), n);
        ThresholdHierarchy {
            top,
            clusters,
            root,
        }
    }

    /// Cluster id of every point at `level`.
    pub fn labels_at(&self, level: i32) -> Vec<u32> {
        let n = self.clusters[self.root as usize].members.len();
        let mut labels = vec![u32::MAX; n];
        for (id, c) in self.clusters.iter().enumerate() {
            if c.birth <= level && level <= c.death {
                for &m in &c.members {
                    labels[m as usize] = id as u32;
                }
            }
        }
        labels
    }
}

/// `Λ(v)`: the least `λ ≥ 0` with `2^(ℓ+λ)·ε ≥ Δ(v)`.
pub fn compression_budget(diam_sq: u64, level: i32, eps: f64) -> i32 {
    let target = diam_sq as f64;
    let mut lambda = 0;
    loop {
        let r = exp2(level + lambda) * eps;
        if r * r >= target {
            return lambda;
        }
        lambda += 1;
    }
}

/// `⌈Δ/2^ℓ⌉` computed exactly from `Δ²`.
pub fn spread(diam_sq: u64, level: i32) -> u64 {
    let ceil_root = {
        let mut r = (diam_sq as f64).sqrt() as u64;
        while r * r < diam_sq {
            r += 1;
        }
        while r > 0 && (r - 1) * (r - 1) >= diam_sq {
            r -= 1;
        }
        r
    };
    ceil_root.div_ceil(1u64 << level)
}

/// Per-node facts the builder knows but the sketch does not store.
#[derive(Debug, Clone)]
pub struct NodeTrace {
    pub cluster: u32,
    pub surrogate: Vec<f64>,
}

/// White-box view of a build: the uncompressed hierarchy and every surrogate.
#[derive(Debug, Clone)]
pub struct BuildTrace {
    pub hierarchy: ThresholdHierarchy,
    pub nodes: Vec<NodeTrace>,
}

impl BuildTrace {
    pub fn members(&self, node: usize) -> &[u32] {
        &self.hierarchy.clusters[self.nodes[node].cluster as usize].members
    }

    pub fn diam_sq(&self, node: usize) -> u64 {
        self.hierarchy.clusters[self.nodes[node].cluster as usize].diam_sq
    }
}

struct Proto {
    level: i32,
    cluster: u32,
    children: Vec<usize>,
    long_edge: Option<u32>,
    ingress: Option<usize>,
}

struct Compressor<'a> {
    points: &'a PointSet,
    h: &'a ThresholdHierarchy,
    eps: f64,
    protos: Vec<Proto>,
}

impl Compressor<'_> {
    fn push(&mut self, level: i32, cluster: u32, long_edge: Option<u32>) -> usize {
        self.protos.push(Proto {
            level,
            cluster,
            children: Vec::new(),
            long_edge,
            ingress: None,
        });
        self.protos.len() - 1
    }

    fn link(&mut self, parent: usize, child: usize) {
        self.protos[parent].children.push(child);
        if self.protos[child].long_edge.is_none() {
            self.protos[child].ingress = Some(parent);
        }
    }

    /// Emits the kept part of a cluster's 1-path and returns its top node.
    fn expand(&mut self, cluster: u32) -> usize {
        let c = &self.h.clusters[cluster as usize];
        let (birth, death) = (c.birth, c.death);
        let lambda = compression_budget(c.diam_sq, birth, self.eps);
        let k = death - birth;
        let head = self.push(death, cluster, None);
        let mut bottom = head;
        if k > lambda {
            let below = self.push(birth + lambda, cluster, Some((k - lambda) as u32));
            self.protos[head].children.push(below);
            bottom = below;
        }
        let mut level = self.protos[bottom].level;
        while level > birth {
            level -= 1;
            let next = self.push(level, cluster, None);
            self.link(bottom, next);
            bottom = next;
        }
        let children = self.h.clusters[cluster as usize].children.clone();
        if !children.is_empty() {
            let tops: Vec<usize> = children.iter().map(|&ch| self.expand(ch)).collect();
            self.attach_children(bottom, tops);
        }
        head
    }

    fn members(&self, proto: usize) -> &[u32] {
        &self.h.clusters[self.protos[proto].cluster as usize].members
    }

    fn center(&self, proto: usize) -> u32 {
        self.members(proto)[0]
    }

    /// Orders the children of a branching node by a BFS of `H_v` from the
    /// center-sharing child and assigns their ingresses.
    fn attach_children(&mut self, v: usize, tops: Vec<usize>) {
        let k = tops.len();
        let threshold = 1u64 << (2 * self.protos[v].level);
        let mut adj = vec![Vec::new(); k];
        for a in 0..k {
            for b in a + 1..k {
                let mut near = false;
                'scan: for &i in self.members(tops[a]) {
                    for &j in self.members(tops[b]) {
                        if self.points.dist_sq(i as usize, j as usize) <= threshold {
                            near = true;
                            break 'scan;
                        }
                    }
                }
                if near {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        for list in &mut adj {
            list.sort_by_key(|&b| self.center(tops[b]));
        }
        let center = self.center(v);
        let first = (0..k)
            .find(|&a| self.center(tops[a]) == center)
            .expect("no child holds the parent's center");
        let mut order = vec![first];
        let mut tau_parent = vec![usize::MAX; k];
        let mut seen = vec![false; k];
        seen[first] = true;
        let mut queue = VecDeque::from([first]);
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    tau_parent[b] = a;
                    order.push(b);
                    queue.push_back(b);
                }
            }
        }
        assert_eq!(order.len(), k, "threshold graph of a merge is disconnected");

        for &a in &order {
            self.protos[v].children.push(tops[a]);
        }
        self.protos[tops[first]].ingress = Some(v);
        for &b in &order[1..] {
            let a = tau_parent[b];
            let mut best = (u64::MAX, u32::MAX, u32::MAX);
            for &i in self.members(tops[a]) {
                for &j in self.members(tops[b]) {
                    let cand = (self.points.dist_sq(i as usize, j as usize), i, j);
                    best = best.min(cand);
                }
            }
            let ingress = self.descend(tops[a], best.1);
            self.protos[tops[b]].ingress = Some(ingress);
        }
    }

    /// Bottom node on the long-edge-free path from `from` toward `leaf(x)`.
    fn descend(&self, from: usize, x: u32) -> usize {
        let mut u = from;
        loop {
            let p = &self.protos[u];
            if p.children.is_empty() {
                return u;
            }
            if p.children.len() == 1 {
                let c = p.children[0];
                if self.protos[c].long_edge.is_some() {
                    return u;
                }
                u = c;
                continue;
            }
            u = *p
                .children
                .iter()
                .find(|&&c| self.members(c).binary_search(&x).is_ok())
                .expect("point missing from every child cluster");
        }
    }
}

/// Options for the exact engine's tree.
#[derive(Debug, Clone, Copy)]
pub struct TreeOptions {
    pub hash_width: Option<u32>,
}

/// Builds the annotated compressed tree for `points` (already in tree space).
pub fn build_tree(
    points: &PointSet,
    params: &Params,
    opts: TreeOptions,
) -> Result<(ExactSketch, BuildTrace), BuildError> {
    let h = ThresholdHierarchy::build(points);
    let mut comp = Compressor {
        points,
        h: &h,
        eps: params.eps,
        protos: Vec::new(),
    };
    comp.expand(h.root);
    let protos = comp.protos;

    // Renumber in preorder (children are already in evaluation order).
    let mut order = Vec::with_capacity(protos.len());
    let mut stack = vec![0usize];
    while let Some(u) = stack.pop() {
        order.push(u);
        stack.extend(protos[u].children.iter().rev());
    }
    let mut id_of = vec![0u32; protos.len()];
    for (id, &u) in order.iter().enumerate() {
        id_of[u] = id as u32;
    }

    let width = opts.hash_width.unwrap_or_else(|| {
        HashSpec::default_width(params.d, params.top_level(), params.q, params.delta)
    });
    if !(1..=crate::hash::MAX_WIDTH).contains(&width) {
        return Err(BuildError::InvalidOption(format!(
            "hash width {width} must lie in 1..={}",
            crate::hash::MAX_WIDTH
        )));
    }
    let hash = HashSpec::new(width, crate::rng::derive(params.seed, &[crate::rng::tag::HASH]));

    let mut nodes: Vec<Node> = Vec::with_capacity(order.len());
    let mut parent_of = vec![None; protos.len()];
    for (u, p) in protos.iter().enumerate() {
        for &c in &p.children {
            parent_of[c] = Some(id_of[u]);
        }
    }
    for &u in &order {
        let p = &protos[u];
        let c = &h.clusters[p.cluster as usize];
        let is_root = p.long_edge.is_some() || parent_of[u].is_none();
        nodes.push(Node {
            parent: parent_of[u],
            children: p.children.iter().map(|&c| id_of[c]).collect(),
            long_edge: p.long_edge,
            center: c.members[0],
            ingress: if is_root { None } else { p.ingress.map(|g| id_of[g]) },
            spread: if is_root { 0 } else { spread(c.diam_sq, p.level) },
            eta: if is_root { Vec::new() } else { vec![0; params.d] },
            root_hash: (is_root && !p.children.is_empty()).then_some(0),
            level: p.level,
            subtree: 0,
            subtree_leaf: false,
            end: 0,
            eta_exponent: 0,
        });
    }
    let mut sketch = ExactSketch::from_parts(*params, hash, nodes, None, None)
        .map_err(|e| BuildError::Internal(e.0))?;

    // Surrogates in preorder; each ingress is already placed.
    let d = params.d;
    let mut surrogates: Vec<Vec<f64>> = Vec::with_capacity(order.len());
    for id in 0..sketch.nodes.len() {
        let node = &sketch.nodes[id];
        let x = points.row(node.center as usize);
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let level = node.level;
        let s = if node.is_subtree_root() {
            let grid = GridNet::for_level(level, d, params.phi)?;
            let idx = grid.snap(&xf)?;
            let s = grid.point(&idx);
            if node.root_hash.is_some() {
                let hv = hash.level(level, d).hash(&idx);
                sketch.nodes[id].root_hash = Some(hv);
            }
            s
        } else {
            let base = &surrogates[node.ingress.unwrap() as usize];
            let scale = exp2(level);
            let grid = GridNet::for_scale(
                precision(node.spread, node.subtree_leaf, params.eps),
                d,
                params.phi,
            )?;
            let rel: Vec<f64> = xf.iter().zip(base).map(|(x, b)| (x - b) / scale).collect();
            let eta = grid.snap_lattice(&rel);
            let unit = sketch.eta_unit(id as u32);
            let s: Vec<f64> = base
                .iter()
                .zip(&eta)
                .map(|(b, &k)| b + unit * k as f64)
                .collect();
            sketch.nodes[id].eta = eta;
            s
        };
        let node = &sketch.nodes[id];
        let err = dist_sq_mixed(x, &s).sqrt();
        let mut bound = exp2(level);
        if node.subtree_leaf && !node.is_subtree_root() {
            bound *= params.eps;
        }
        if err > bound {
            return Err(BuildError::Internal(format!(
                "surrogate of node {id} is {err} away from its center (bound {bound})"
            )));
        }
        surrogates.push(s);
    }
    let trace = BuildTrace {
        nodes: order
            .iter()
            .zip(surrogates)
            .map(|(&u, s)| NodeTrace {
                cluster: protos[u].cluster,
                surrogate: s,
            })
            .collect(),
        hierarchy: h,
    };
    Ok((sketch, trace))
}

/// Exact minimum squared distance between two point subsets.
pub fn min_cross_sq(points: &PointSet, a: &[u32], b: &[u32]) -> u64 {
    let mut best = u64::MAX;
    for &i in a {
        for &j in b {
            best = best.min(dist_sq_int(points.row(i as usize), points.row(j as usize)));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[i64], phi: i64) -> PointSet {
        PointSet::new(1, phi, xs.to_vec()).unwrap()
    }

    #[test]
    fn threshold_example() {
        let h = ThresholdHierarchy::build(&line(&[0, 3, 10], 16));
        assert_eq!(h.top, 5);
        let at2 = h.labels_at(2);
        assert_eq!(at2[0], at2[1]);
        assert_ne!(at2[0], at2[2]);
        let at3 = h.labels_at(3);
        assert!(at3.iter().all(|&l| l == at3[0]));
        let at1 = h.labels_at(1);
        assert!(at1[0] != at1[1] && at1[1] != at1[2]);
    }

    #[test]
    fn single_point_is_one_path() {
        let h = ThresholdHierarchy::build(&line(&[5], 16));
        assert_eq!(h.clusters.len(), 1);
        assert_eq!((h.clusters[0].birth, h.clusters[0].death), (0, h.top));
    }

    #[test]
    fn budget_and_spread_examples() {
        assert_eq!(compression_budget(64 * 64, 2, 0.25), 6);
        assert_eq!(compression_budget(0, 0, 0.25), 0);
        assert_eq!(spread(36, 1), 3);
        assert_eq!(spread(37, 1), 4);
        assert_eq!(spread(0, 3), 0);
        for d2 in 0..2000u64 {
            for l in 0..5 {
                let want = ((d2 as f64).sqrt() / exp2(l)).ceil() as u64;
                assert_eq!(spread(d2, l), want, "Δ²={d2} ℓ={l}");
            }
        }
    }

    #[test]
    fn precision_example() {
        assert_eq!(precision(spread(36, 1), false, 0.25), 0.125);
        assert_eq!(precision(spread(36, 1), true, 0.25), 0.03125);
    }

    #[test]
    fn compression_layout() {
        // Two points 64 apart join at level 6 below a top level of 7. The pair
        // has Λ = 2 ≥ its 1-edge path, so it stays; each singleton path of 5
        // edges collapses to one long edge (Λ = 0).
        let pts = line(&[-32, 32], 64);
        let params = Params::new(2, 1, 64, 0.25, 0.1, 1, 0).unwrap();
        let (sk, _) = build_tree(&pts, &params, TreeOptions { hash_width: None }).unwrap();
        let shape: Vec<(i32, Option<u32>, usize)> = sk
            .nodes
            .iter()
            .map(|n| (n.level, n.long_edge, n.children.len()))
            .collect();
        assert_eq!(
            shape,
            vec![
                (7, None, 1),
                (6, None, 2),
                (5, None, 1),
                (0, Some(5), 0),
                (5, None, 1),
                (0, Some(5), 0)
            ]
        );
        assert_eq!(sk.node(3).center, 0);
        assert_eq!(sk.node(5).center, 1);
        assert_eq!(sk.node(4).ingress, Some(2));
    }
}
