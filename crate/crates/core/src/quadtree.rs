//! The practical variant: a quadtree over randomly shifted nested grids with
//! middle-out compression.
//!
//! Coordinates are translated by `2Φ − σ` and scaled by `2^Λ`, so every cell
//! at level `ℓ` (side `2^ℓ`, possibly fractional) has an integer address
//! `U >> (ℓ + Λ)` and the tree edges are single bits of `U`.

use crate::geometry::{check_query, GeometryError, Params, PointSet};
use crate::rng::{derive, tag};
use crate::{BuildError, QueryError};

/// `⌈log2(16·d^1.5·log2 Φ/(ε·δ))⌉`, with `log2 Φ` floored at 1.
pub fn lambda_for(d: usize, phi: i64, eps: f64, delta: f64) -> u32 {
    let log_phi = (phi.trailing_zeros() as f64).max(1.0);
    let v = 16.0 * (d as f64).powf(1.5) * log_phi / (eps * delta);
    (v.log2().ceil() as u32).max(1)
}

/// Samples the shift `σ ∈ {−Φ..Φ}^d` from the sketch seed.
pub fn sample_shift(seed: u64, d: usize, phi: i64) -> Vec<i64> {
    let span = 2 * phi as u64 + 1;
    (0..d)
        .map(|i| (derive(seed, &[tag::SHIFT, i as u64]) % span) as i64 - phi)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QtNode {
    pub parent: Option<u32>,
    pub children: Vec<u32>,
    pub long_edge: Option<u32>,
    /// Bits of the incoming edge, one per axis; empty for the root and for
    /// the bottom of a long edge.
    pub bits: Vec<bool>,
    pub center: u32,

    pub level: i32,
    pub subtree: u32,
    pub subtree_leaf: bool,
    pub end: u32,
}

impl QtNode {
    pub fn is_subtree_root(&self) -> bool {
        self.parent.is_none() || self.long_edge.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadtreeSketch {
    pub params: Params,
    pub lambda: u32,
    pub sigma: Vec<i64>,
    pub nodes: Vec<QtNode>,
}

/// Query record: traversed subtree roots and the leaf chosen in each.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QtTrace {
    pub roots: Vec<u32>,
    pub chosen: Vec<u32>,
}

fn top_exponent(phi: i64) -> i32 {
    phi.trailing_zeros() as i32 + 2
}

/// Scaled, translated coordinates `(x + 2Φ − σ)·2^Λ`.
fn shifted(x: &[i64], sigma: &[i64], phi: i64, lambda: u32) -> Vec<i128> {
    x.iter()
        .zip(sigma)
        .map(|(&v, &s)| ((v + 2 * phi - s) as i128) << lambda)
        .collect()
}

/// Cell addresses at the finest level, clamping the closed upper face of `H`.
fn address(x: &[i64], sigma: &[i64], phi: i64, lambda: u32) -> Vec<u64> {
    let bits = top_exponent(phi) as u32 + lambda;
    let max = (1u128 << bits) - 1;
    shifted(x, sigma, phi, lambda)
        .into_iter()
        .map(|v| v.clamp(0, max as i128) as u64)
        .collect()
}

struct QtBuilder<'a> {
    addr: &'a [Vec<u64>],
    lambda: u32,
    d: usize,
    nodes: Vec<QtNode>,
}

impl QtBuilder<'_> {
    fn shift(&self, level: i32) -> u32 {
        (level + self.lambda as i32) as u32
    }

    fn push(&mut self, parent: Option<u32>, long_edge: Option<u32>, bits: Vec<bool>, center: u32, level: i32) -> u32 {
        let id = self.nodes.len() as u32;
        if let Some(p) = parent {
            self.nodes[p as usize].children.push(id);
        }
        self.nodes.push(QtNode {
            parent,
            children: Vec::new(),
            long_edge,
            bits,
            center,
            level,
            subtree: 0,
            subtree_leaf: false,
            end: 0,
        });
        id
    }

    fn edge_bits(&self, point: u32, level: i32) -> Vec<bool> {
        let s = self.shift(level);
        self.addr[point as usize].iter().map(|&u| (u >> s) & 1 == 1).collect()
    }

    /// Emits the 1-path starting at a node of `level` holding `members`,
    /// compressing its middle, then recurses into the branching cells.
    fn path(&mut self, parent: Option<u32>, level: i32, members: Vec<u32>) {
        let first = members[0];
        let bottom_level = -(self.lambda as i32);
        let mut diff = 0u64;
        for &m in &members[1..] {
            for a in 0..self.d {
                diff |= self.addr[m as usize][a] ^ self.addr[first as usize][a];
            }
        }
        let branch_level = if diff == 0 {
            bottom_level
        } else {
            (64 - diff.leading_zeros()) as i32 - self.lambda as i32
        };
        let k = (level - branch_level) as u32;
        let lam = self.lambda;
        let center = first;

        let bits = if parent.is_some() { self.edge_bits(first, level) } else { Vec::new() };
        let mut cur = self.push(parent, None, bits, center, level);
        let mut l = level;
        let step = |b: &mut Self, cur: &mut u32, l: &mut i32| {
            *l -= 1;
            let bits = b.edge_bits(first, *l);
            *cur = b.push(Some(*cur), None, bits, center, *l);
        };
        if k > 2 * lam {
            for _ in 0..lam {
                step(self, &mut cur, &mut l);
            }
            let len = k - 2 * lam;
            l -= len as i32;
            cur = self.push(Some(cur), Some(len), Vec::new(), center, l);
        }
        while l > branch_level {
            step(self, &mut cur, &mut l);
        }
        if branch_level == bottom_level {
            return;
        }
        let s = self.shift(branch_level - 1);
        let mut groups: Vec<(Vec<u64>, Vec<u32>)> = Vec::new();
        for m in members {
            let key: Vec<u64> = self.addr[m as usize].iter().map(|&u| (u >> s) & 1).collect();
            match groups.iter_mut().find(|g| g.0 == key) {
                Some(g) => g.1.push(m),
                None => groups.push((key, vec![m])),
            }
        }
        groups.sort();
        for (_, g) in groups {
            self.path(Some(cur), branch_level - 1, g);
        }
    }
}

impl QuadtreeSketch {
    pub fn build(points: &PointSet, params: &Params) -> Result<Self, BuildError> {
        let lambda = lambda_for(params.d, params.phi, params.eps, params.delta);
        let sigma = sample_shift(params.seed, params.d, params.phi);
        Self::build_with(points, params, lambda, sigma)
    }

    /// Builds with an explicit `Λ` and shift.
    pub fn build_with(points: &PointSet, params: &Params, lambda: u32, sigma: Vec<i64>) -> Result<Self, BuildError> {
        check_precision(params.d, params.phi, lambda)?;
        if sigma.len() != params.d || sigma.iter().any(|s| s.abs() > params.phi) {
            return Err(BuildError::InvalidOption("shift must lie in {-Φ..Φ}^d".into()));
        }
        let addr: Vec<Vec<u64>> = points
            .rows()
            .map(|x| address(x, &sigma, params.phi, lambda))
            .collect();
        let mut b = QtBuilder {
            addr: &addr,
            lambda,
            d: params.d,
            nodes: Vec::new(),
        };
        b.path(None, top_exponent(params.phi), (0..points.len() as u32).collect());
        let nodes = b.nodes;
        Self::from_parts(*params, lambda, sigma, nodes).map_err(|e| BuildError::Internal(e.to_string()))
    }

    /// Validates stored fields and fills in levels, subtrees and intervals.
    pub fn from_parts(params: Params, lambda: u32, sigma: Vec<i64>, mut nodes: Vec<QtNode>) -> Result<Self, GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidParams(m));
        if check_precision(params.d, params.phi, lambda).is_err() {
            return bad(format!("Λ = {lambda} exceeds the address precision"));
        }
        if nodes.is_empty() {
            return bad("empty quadtree".into());
        }
        let top = top_exponent(params.phi);
        let bottom = -(lambda as i32);
        for id in 0..nodes.len() {
            let (level, subtree) = match nodes[id].parent {
                None if id == 0 => (top, 0),
                Some(p) if (p as usize) < id => {
                    let p = &nodes[p as usize];
                    let drop = nodes[id].long_edge.unwrap_or(1) as i32;
                    let sub = if nodes[id].long_edge.is_some() { id as u32 } else { p.subtree };
                    if nodes[id].long_edge.is_some() && p.children.len() != 1 {
                        return bad(format!("long edge below branching node at {id}"));
                    }
                    (p.level - drop, sub)
                }
                _ => return bad(format!("node {id} is not in preorder")),
            };
            if level < bottom {
                return bad(format!("node {id} lies below the finest level"));
            }
            let want_bits = if nodes[id].is_subtree_root() { 0 } else { params.d };
            if nodes[id].bits.len() != want_bits {
                return bad(format!("node {id} has {} edge bits", nodes[id].bits.len()));
            }
            nodes[id].level = level;
            nodes[id].subtree = subtree;
        }
        for id in (0..nodes.len()).rev() {
            let n = &nodes[id];
            if n.children.is_empty() {
                if n.level != bottom {
                    return bad(format!("leaf {id} above the finest level"));
                }
                if n.center as usize >= params.n {
                    return bad(format!("leaf {id} has invalid center"));
                }
                nodes[id].end = id as u32 + 1;
                nodes[id].subtree_leaf = true;
            } else {
                let center = n.children.iter().map(|&c| nodes[c as usize].center).min().unwrap();
                let end = n.children.iter().map(|&c| nodes[c as usize].end).max().unwrap();
                let heads = n.children.len() == 1 && nodes[n.children[0] as usize].long_edge.is_some();
                nodes[id].center = center;
                nodes[id].end = end;
                nodes[id].subtree_leaf = heads;
            }
        }
        for id in 0..nodes.len() {
            let n = &nodes[id];
            for (i, &c) in n.children.iter().enumerate() {
                let expected = if i == 0 { id as u32 + 1 } else { nodes[n.children[i - 1] as usize].end };
                if c != expected || nodes[c as usize].parent != Some(id as u32) {
                    return bad(format!("children of {id} are not in preorder"));
                }
            }
        }
        if nodes[0].end as usize != nodes.len() {
            return bad("trailing nodes outside the tree".into());
        }
        Ok(QuadtreeSketch {
            params,
            lambda,
            sigma,
            nodes,
        })
    }

    pub fn top_level(&self) -> i32 {
        top_exponent(self.params.phi)
    }

    /// Cell addresses of every node in the subtree rooted at `root`, given
    /// the root's address, in preorder.
    pub fn subtree_addresses(&self, root: u32, root_addr: &[u64]) -> (Vec<u32>, Vec<Vec<u64>>) {
        let mut ids = vec![root];
        let mut addrs = vec![root_addr.to_vec()];
        for id in root + 1..self.nodes[root as usize].end {
            let n = &self.nodes[id as usize];
            if n.subtree != root {
                continue;
            }
            let p = n.parent.unwrap();
            let at = ids.binary_search(&p).unwrap();
            let a: Vec<u64> = addrs[at]
                .iter()
                .zip(&n.bits)
                .map(|(&u, &b)| (u << 1) | b as u64)
                .collect();
            ids.push(id);
            addrs.push(a);
        }
        (ids, addrs)
    }

    /// Approximate nearest neighbor of `y`.
    pub fn query_ann(&self, y: &[i64]) -> Result<(usize, QtTrace), QueryError> {
        check_query(y, self.params.d, self.params.phi)?;
        let phi = self.params.phi;
        let scaled = shifted(y, &self.sigma, phi, self.lambda);
        let clamped = address(y, &self.sigma, phi, self.lambda);
        let mut trace = QtTrace::default();
        let mut root = 0u32;
        let mut root_addr = vec![0u64; self.params.d];
        loop {
            let (ids, addrs) = self.subtree_addresses(root, &root_addr);
            let mut best: Option<(i128, u32, usize)> = None;
            for (pos, &id) in ids.iter().enumerate() {
                let n = &self.nodes[id as usize];
                if !n.subtree_leaf {
                    continue;
                }
                let s = (n.level + self.lambda as i32) as u32;
                let dist: i128 = addrs[pos]
                    .iter()
                    .zip(&scaled)
                    .map(|(&a, &yv)| {
                        let t = yv - ((a as i128) << s);
                        t * t
                    })
                    .sum();
                let key = (dist, n.center, pos);
                if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                    best = Some(key);
                }
            }
            let (_, _, pos) = best.expect("subtree without leaves");
            let v = ids[pos];
            trace.roots.push(root);
            trace.chosen.push(v);
            let node = &self.nodes[v as usize];
            if node.children.is_empty() {
                return Ok((node.center as usize, trace));
            }
            let child = node.children[0];
            let len = self.nodes[child as usize].long_edge.unwrap();
            let s = (self.nodes[child as usize].level + self.lambda as i32) as u32;
            let mask = (1u64 << len) - 1;
            root_addr = addrs[pos]
                .iter()
                .zip(&clamped)
                .map(|(&a, &yc)| (a << len) | ((yc >> s) & mask))
                .collect();
            root = child;
        }
    }

    /// True cell address of point `x` at `level`.
    pub fn cell_of(&self, x: &[i64], level: i32) -> Vec<u64> {
        let s = (level + self.lambda as i32) as u32;
        address(x, &self.sigma, self.params.phi, self.lambda)
            .into_iter()
            .map(|u| u >> s)
            .collect()
    }

    /// Lower corner of a cell in original coordinates.
    pub fn corner(&self, addr: &[u64], level: i32) -> Vec<f64> {
        let side = crate::geometry::exp2(level);
        addr.iter()
            .zip(&self.sigma)
            .map(|(&a, &s)| a as f64 * side - 2.0 * self.params.phi as f64 + s as f64)
            .collect()
    }

    /// Number of dropped edge bits (`d` per long-edge step).
    pub fn dropped_bits(&self) -> u64 {
        self.nodes
            .iter()
            .filter_map(|n| n.long_edge)
            .map(|l| l as u64 * self.params.d as u64)
            .sum()
    }
}

fn check_precision(d: usize, phi: i64, lambda: u32) -> Result<(), BuildError> {
    let bits = top_exponent(phi) as u32 + lambda;
    let sq_bits = 2 * bits + (usize::BITS - d.leading_zeros());
    if bits > 62 || sq_bits > 125 {
        return Err(BuildError::Geometry(GeometryError::PrecisionExhausted {
            gamma: crate::geometry::exp2(-(lambda as i32)),
        }));
    }
    Ok(())
}

/// Whether the ball of radius `8ε^-1·2^(ℓ−Λ)·√d` around `x` lies inside one
/// cell at every level from 1 to just below the top. Levels at or below 0
/// are skipped: integer points sit on their cell corners by construction.
pub fn is_padded(x: &[i64], sigma: &[i64], phi: i64, lambda: u32, eps: f64) -> bool {
    let d = x.len() as f64;
    let top = top_exponent(phi);
    for level in 1..top {
        let side = crate::geometry::exp2(level);
        let rho = 8.0 / eps * crate::geometry::exp2(level - lambda as i32) * d.sqrt();
        for (&v, &s) in x.iter().zip(sigma) {
            let t = (v + 2 * phi - s) as f64;
            if ((t - rho) / side).floor() != ((t + rho) / side).floor() {
                return false;
            }
        }
    }
    true
}
