//! The compressed sketch tree of the exact engine.

use crate::distance::DistanceBundle;
use crate::geometry::{exp2, GeometryError, GridNet, Params};
use crate::hash::HashSpec;
use crate::jl::JlProjection;

/// One node of the compressed tree `T`.
///
/// Nodes are stored in preorder with children ordered so that every ingress
/// precedes the node that refers to it. Fields below the marker are derived
/// from the stored ones by [`ExactSketch::from_parts`].
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<u32>,
    pub children: Vec<u32>,
    /// Length of the incoming long edge, if any. Such a node roots a subtree.
    pub long_edge: Option<u32>,
    /// Point index for leaves of `T`; recomputed as the children's minimum otherwise.
    pub center: u32,
    pub ingress: Option<u32>,
    /// `⌈Δ(v)/2^ℓ(v)⌉`, the integer that fixes the precision `γ(v)`.
    pub spread: u64,
    /// Quantized displacement from the ingress surrogate, in grid units.
    pub eta: Vec<i64>,
    /// Hashed root surrogate. Absent for non-roots and for subtree roots
    /// that are leaves of `T` (no query ever needs to recover those).
    pub root_hash: Option<u64>,

    pub level: i32,
    /// Preorder id of the root of this node's subtree in `F(T)`.
    pub subtree: u32,
    /// True if the node has no children inside its own subtree.
    pub subtree_leaf: bool,
    /// One past the last preorder id below this node.
    pub end: u32,
    /// Cell-side exponent of the grid `N_γ(v)` used for `η(v)`.
    pub eta_exponent: i32,
}

impl Node {
    pub fn is_subtree_root(&self) -> bool {
        self.parent.is_none() || self.long_edge.is_some()
    }

    pub fn is_tree_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// True if the single child hangs below a long edge.
    pub fn heads_long_edge(&self, nodes: &[Node]) -> bool {
        self.children.len() == 1 && nodes[self.children[0] as usize].long_edge.is_some()
    }
}

/// `γ(v)` from its defining integers.
pub fn precision(spread: u64, subtree_leaf: bool, eps: f64) -> f64 {
    let base = 1.0 / (5.0 + spread as f64);
    if subtree_leaf {
        base * eps
    } else {
        base
    }
}

/// The sketch produced by the exact engine.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSketch {
    /// Parameters of the space the tree lives in (after projection, if any).
    pub params: Params,
    pub hash: HashSpec,
    pub nodes: Vec<Node>,
    /// `leaf(x_i)` for every point index.
    pub leaf_of: Vec<u32>,
    pub distances: Option<DistanceBundle>,
    pub jl: Option<JlProjection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureError(pub String);

impl ExactSketch {
    /// Validates the stored fields and fills in the derived ones.
    pub fn from_parts(
        params: Params,
        hash: HashSpec,
        mut nodes: Vec<Node>,
        distances: Option<DistanceBundle>,
        jl: Option<JlProjection>,
    ) -> Result<Self, StructureError> {
        let err = |m: String| Err(StructureError(m));
        let count = nodes.len();
        if count == 0 {
            return err("empty tree".into());
        }
        let top = params.top_level();
        // Children must appear after their parent; preorder gives this.
        for id in 0..count {
            let parent = nodes[id].parent;
            match parent {
                None if id != 0 => return err(format!("node {id} has no parent")),
                Some(p) if p as usize >= id => return err(format!("node {id} precedes parent")),
                _ => {}
            }
            if let Some(len) = nodes[id].long_edge {
                if len == 0 || parent.is_none() {
                    return err(format!("bad long edge at node {id}"));
                }
                let p = parent.unwrap() as usize;
                if nodes[p].children.len() != 1 {
                    return err(format!("long edge below a branching node {p}"));
                }
            }
        }
        for id in 0..count {
            let level = match nodes[id].parent {
                None => top,
                Some(p) => nodes[p as usize].level - nodes[id].long_edge.unwrap_or(1) as i32,
            };
            if level < 0 {
                return err(format!("node {id} lies below level 0"));
            }
            nodes[id].level = level;
            nodes[id].subtree = if nodes[id].is_subtree_root() {
                id as u32
            } else {
                nodes[nodes[id].parent.unwrap() as usize].subtree
            };
        }
        let mut leaf_of = vec![u32::MAX; params.n];
        for id in (0..count).rev() {
            let node = &nodes[id];
            if node.children.is_empty() {
                let c = node.center as usize;
                if c >= params.n || leaf_of[c] != u32::MAX {
                    return err(format!("leaf {id} has invalid center {c}"));
                }
                leaf_of[c] = id as u32;
                nodes[id].end = id as u32 + 1;
            } else {
                let center = node.children.iter().map(|&c| nodes[c as usize].center).min();
                let end = node.children.iter().map(|&c| nodes[c as usize].end).max();
                nodes[id].center = center.unwrap();
                nodes[id].end = end.unwrap();
            }
            let leaf = nodes[id].children.is_empty() || nodes[id].heads_long_edge(&nodes);
            nodes[id].subtree_leaf = leaf;
        }
        if leaf_of.contains(&u32::MAX) {
            return err("some point has no leaf".into());
        }
        for id in 0..count {
            let node = &nodes[id];
            if node.end as usize > count {
                return err(format!("node {id} spans past the end"));
            }
            for (i, &c) in node.children.iter().enumerate() {
                let expected = if i == 0 {
                    id as u32 + 1
                } else {
                    nodes[node.children[i - 1] as usize].end
                };
                if c != expected || nodes[c as usize].parent != Some(id as u32) {
                    return err(format!("children of {id} are not in preorder"));
                }
            }
            let root = node.is_subtree_root();
            match node.ingress {
                Some(_) if root => return err(format!("subtree root {id} has an ingress")),
                None if !root => return err(format!("node {id} lacks an ingress")),
                Some(g) if g as usize >= id || nodes[g as usize].subtree != node.subtree => {
                    return err(format!("ingress of {id} is not an earlier node of its subtree"))
                }
                _ => {}
            }
            if root != node.eta.is_empty() || (!root && node.eta.len() != params.d) {
                return err(format!("displacement of node {id} has the wrong length"));
            }
            if root && node.spread != 0 {
                return err(format!("subtree root {id} carries a precision"));
            }
            let wants_hash = root && !node.is_tree_leaf();
            if wants_hash != node.root_hash.is_some() {
                return err(format!("root hash presence mismatch at node {id}"));
            }
        }
        for id in 0..count {
            if nodes[id].is_subtree_root() {
                continue;
            }
            let gamma = precision(nodes[id].spread, nodes[id].subtree_leaf, params.eps);
            let grid = GridNet::for_scale(gamma, params.d, params.phi)
                .map_err(|e: GeometryError| StructureError(e.to_string()))?;
            nodes[id].eta_exponent = grid.exponent();
        }
        Ok(ExactSketch {
            params,
            hash,
            nodes,
            leaf_of,
            distances,
            jl,
        })
    }

    pub fn node(&self, id: u32) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Preorder ids of the subtree rooted at `root`.
    pub fn subtree_nodes(&self, root: u32) -> Vec<u32> {
        let r = self.node(root);
        (root..r.end)
            .filter(|&id| self.nodes[id as usize].subtree == root)
            .collect()
    }

    pub fn subtree_leaves(&self, root: u32) -> Vec<u32> {
        self.subtree_nodes(root)
            .into_iter()
            .filter(|&id| self.nodes[id as usize].subtree_leaf)
            .collect()
    }

    /// True if `node` lies below `ancestor` (or is it).
    pub fn contains(&self, ancestor: u32, node: u32) -> bool {
        ancestor <= node && node < self.node(ancestor).end
    }

    /// Whether point `k` belongs to `C(v)`.
    pub fn cluster_contains(&self, v: u32, k: usize) -> bool {
        self.contains(v, self.leaf_of[k])
    }

    /// Deepest node on the long-edge-free downward path from the subtree root
    /// `root` toward `leaf(x_k)`. Requires `x_k ∈ C(root)`.
    pub fn descend_toward(&self, root: u32, k: usize) -> u32 {
        let mut v = self.leaf_of[k];
        let target = self.node(root).subtree;
        while self.node(v).subtree != target {
            v = self.node(v).parent.expect("point outside the subtree");
        }
        v
    }

    /// Offset added to `s*(in(v))` per unit of `η(v)`: `2^ℓ(v)` times the cell side.
    pub fn eta_unit(&self, id: u32) -> f64 {
        let n = self.node(id);
        exp2(n.level + n.eta_exponent)
    }

    pub fn subtree_roots(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.nodes.len() as u32).filter(|&id| self.nodes[id as usize].is_subtree_root())
    }
}
