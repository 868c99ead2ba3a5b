//! Query side of the exact engine: hash reversal, nearest neighbor and
//! distance estimation.

use crate::geometry::{check_query, dist_sq_f64, exp2, GridNet};
use crate::tree::ExactSketch;
use crate::QueryError;

/// How the root surrogate of a subtree was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    /// Exactly one candidate matched the stored hash.
    Unique,
    /// Zero or several candidates matched; the origin stands in.
    Fallback { matches: usize },
    /// The subtree has no stored hash (a lone leaf of `T`).
    Unavailable,
}

/// Surrogates of every node of one subtree, in preorder.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtreeSurrogates {
    pub root: u32,
    pub ids: Vec<u32>,
    pub coords: Vec<f64>,
    pub recovery: Recovery,
    pub candidates: usize,
}

impl SubtreeSurrogates {
    pub fn get(&self, id: u32) -> Option<&[f64]> {
        let d = self.coords.len() / self.ids.len();
        self.ids
            .binary_search(&id)
            .ok()
            .map(|i| &self.coords[i * d..(i + 1) * d])
    }
}

/// Per-target record of a distance query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetTrace {
    pub t_k: usize,
    pub v_k: u32,
}

/// What a query did: the subtree roots it traversed, and for distance
/// queries the threshold index and per-target choices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryTrace {
    pub roots: Vec<u32>,
    /// Chosen subtree leaf in each traversed subtree.
    pub chosen: Vec<u32>,
    pub recoveries: Vec<Option<Recovery>>,
    pub t: Option<usize>,
    pub targets: Vec<TargetTrace>,
}

/// Replays the displacement chain of the subtree rooted at `root` from a
/// given root surrogate.
pub fn replay_surrogates(sketch: &ExactSketch, root: u32, root_surrogate: &[f64]) -> (Vec<u32>, Vec<f64>) {
    let d = sketch.params.d;
    let ids = sketch.subtree_nodes(root);
    let mut coords = Vec::with_capacity(ids.len() * d);
    coords.extend_from_slice(root_surrogate);
    for (pos, &id) in ids.iter().enumerate().skip(1) {
        let node = sketch.node(id);
        let ing = node.ingress.expect("non-root without ingress");
        let at = ids[..pos].binary_search(&ing).expect("ingress outside subtree");
        let unit = sketch.eta_unit(id);
        for a in 0..d {
            let v = coords[at * d + a] + unit * node.eta[a] as f64;
            coords.push(v);
        }
    }
    (ids, coords)
}

/// Recovers all surrogates of the subtree rooted at `root` by reversing the
/// stored root hash over the grid points near `y`.
pub fn recover_surrogates(sketch: &ExactSketch, root: u32, y: &[f64]) -> SubtreeSurrogates {
    let d = sketch.params.d;
    let node = sketch.node(root);
    let level = node.level;
    let mut recovery = Recovery::Unavailable;
    let mut found = vec![0.0; d];
    let mut candidates = 0;
    if let Some(target) = node.root_hash {
        let grid = GridNet::for_level(level, d, sketch.params.phi).expect("level grid");
        let h = sketch.hash.level(level, d);
        let mut matches = 0usize;
        let mut hit: Vec<i64> = Vec::new();
        grid.visit_ball(
            y,
            2.0 * exp2(level),
            0u64,
            |acc, axis, k| h.step(acc, axis, k),
            |acc, idx| {
                candidates += 1;
                if h.finish(acc) == target {
                    matches += 1;
                    if matches == 1 {
                        hit = idx.to_vec();
                    }
                }
            },
        );
        if matches == 1 {
            recovery = Recovery::Unique;
            found = grid.point(&hit);
        } else {
            recovery = Recovery::Fallback { matches };
        }
    }
    let (ids, coords) = replay_surrogates(sketch, root, &found);
    SubtreeSurrogates {
        root,
        ids,
        coords,
        recovery,
        candidates,
    }
}

fn tree_query(sketch: &ExactSketch, y: &[i64]) -> Result<Vec<i64>, QueryError> {
    match &sketch.jl {
        Some(jl) => Ok(jl.map(y)?),
        None => {
            check_query(y, sketch.params.d, sketch.params.phi)?;
            Ok(y.to_vec())
        }
    }
}

struct Traversal {
    trace: QueryTrace,
    surrogates: Vec<Option<SubtreeSurrogates>>,
    answer: usize,
}

fn traverse(sketch: &ExactSketch, y: &[f64], always_recover: bool) -> Traversal {
    let mut trace = QueryTrace::default();
    let mut surrogates = Vec::new();
    let mut root = 0u32;
    loop {
        let leaves = sketch.subtree_leaves(root);
        let (chosen, recovered) = if leaves.len() == 1 && !always_recover {
            (leaves[0], None)
        } else {
            let rec = recover_surrogates(sketch, root, y);
            let best = leaves
                .iter()
                .map(|&v| {
                    let s = rec.get(v).unwrap();
                    (dist_sq_f64(s, y), sketch.node(v).center, v)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap();
            (best.2, Some(rec))
        };
        trace.roots.push(root);
        trace.chosen.push(chosen);
        trace.recoveries.push(recovered.as_ref().map(|r| r.recovery));
        surrogates.push(recovered);
        let node = sketch.node(chosen);
        if node.heads_long_edge(&sketch.nodes) {
            root = node.children[0];
        } else {
            return Traversal {
                answer: node.center as usize,
                trace,
                surrogates,
            };
        }
    }
}

impl ExactSketch {
    /// Approximate nearest neighbor of `y` among the sketched points.
    pub fn query_ann(&self, y: &[i64]) -> Result<(usize, QueryTrace), QueryError> {
        let yt = tree_query(self, y)?;
        let yf: Vec<f64> = yt.iter().map(|&v| v as f64).collect();
        let t = traverse(self, &yf, false);
        Ok((t.answer, t.trace))
    }

    /// Estimate of `‖y − x_k‖`.
    pub fn query_distance(&self, k: usize, y: &[i64]) -> Result<(f64, QueryTrace), QueryError> {
        if k >= self.params.n {
            return Err(QueryError::IndexOutOfRange { index: k, n: self.params.n });
        }
        self.distances_for(y, Some(k)).map(|(v, t)| (v[0], t))
    }

    /// Estimates of `‖y − x_k‖` for every `k`, sharing one traversal.
    pub fn query_all_distances(&self, y: &[i64]) -> Result<(Vec<f64>, QueryTrace), QueryError> {
        self.distances_for(y, None)
    }

    fn distances_for(&self, y: &[i64], only: Option<usize>) -> Result<(Vec<f64>, QueryTrace), QueryError> {
        let bundle = self
            .distances
            .as_ref()
            .ok_or(QueryError::Unsupported("sketch was built without the distance extension"))?;
        check_query(y, self.params.d, self.params.phi)?;
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let Traversal {
            mut trace,
            mut surrogates,
            ..
        } = traverse(self, &yf, false);

        let last = trace.roots.len() - 1;
        let mut t = last;
        for (j, &r) in trace.roots.iter().enumerate() {
            let level = self.node(r).level;
            let scale = bundle.scale(level);
            let stored = bundle.root(r).ok_or(QueryError::SketchMismatch)?;
            let verdict = scale.compare(&stored.range, &scale.sketch(&yf)?)?;
            if verdict.exceeds(exp2(level)) {
                t = j;
                break;
            }
        }
        trace.t = Some(t);
        let r_t = trace.roots[t];
        let py = bundle.projection.project_int(y)?;
        let stored_t = bundle.root(r_t).ok_or(QueryError::SketchMismatch)?;
        let case_one = bundle.projection.scaled_distance(&py, &stored_t.projected);

        let targets: Vec<usize> = match only {
            Some(k) => vec![k],
            None => (0..self.params.n).collect(),
        };
        let mut out = Vec::with_capacity(targets.len());
        for k in targets {
            let t_k = (0..=t)
                .rev()
                .find(|&j| self.cluster_contains(trace.roots[j], k))
                .unwrap_or(0);
            let v_k = self.descend_toward(trace.roots[t_k], k);
            trace.targets.push(TargetTrace { t_k, v_k });
            if t_k == t {
                out.push(case_one);
            } else {
                if surrogates[t_k].is_none() {
                    surrogates[t_k] = Some(recover_surrogates(self, trace.roots[t_k], &yf));
                    trace.recoveries[t_k] = surrogates[t_k].as_ref().map(|r| r.recovery);
                }
                let s = surrogates[t_k].as_ref().unwrap().get(v_k).unwrap();
                out.push(dist_sq_f64(s, &yf).sqrt());
            }
        }
        Ok((out, trace))
    }
}
