//! Space-efficient Euclidean sketches for approximate nearest neighbor and
//! distance queries.
//!
//! Alice builds a [`Sketch`] of an integer point set; the encoded bytes are
//! all Bob needs to answer out-of-sample queries. Two engines are provided:
//! the exact engine (hierarchical clustering tree with hashed grid surrogates,
//! optionally extended with distance sketches) and the quadtree engine
//! (randomly shifted grids with middle-out compression).

pub mod codec;
pub mod distance;
pub mod eval;
pub mod geometry;
pub mod hash;
pub mod hierarchy;
pub mod io;
pub mod jl;
pub mod oracle;
pub mod quadtree;
pub mod query;
pub mod rng;
pub mod tree;

use thiserror::Error;

pub use codec::{DecodeError, SizeBreakdown};
pub use distance::{DistanceBundle, RangeVerdict, ScaleSketch, SignProjection};
pub use geometry::{GeometryError, GridNet, Params, PointSet};
pub use hash::HashSpec;
pub use hierarchy::{BuildTrace, ThresholdHierarchy};
pub use jl::JlProjection;
pub use quadtree::{QtTrace, QuadtreeSketch};
pub use query::{QueryTrace, Recovery};
pub use tree::ExactSketch;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("point index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("sketch payloads come from different sketches")]
    SketchMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Exact,
    Quadtree,
}

/// Build-time switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub engine: Engine,
    /// Attach the distance sketches (exact engine only).
    pub distances: bool,
    /// Project the input to a lower dimension first (exact engine only).
    pub jl: bool,
    /// Constant in the target dimension of the sign projections.
    pub projection_c: f64,
    /// Overrides the default hash width.
    pub hash_width: Option<u32>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            engine: Engine::Exact,
            distances: false,
            jl: false,
            projection_c: 8.0,
            hash_width: None,
        }
    }
}

/// A sketch from either engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Sketch {
    Exact(ExactSketch),
    Quadtree(QuadtreeSketch),
}

impl Sketch {
    pub fn build(points: &PointSet, params: &Params, opts: &BuildOptions) -> Result<Sketch, BuildError> {
        check_match(points, params)?;
        match opts.engine {
            Engine::Exact => Ok(Sketch::Exact(ExactSketch::build(points, params, opts)?)),
            Engine::Quadtree => {
                if opts.distances || opts.jl {
                    return Err(BuildError::InvalidOption(
                        "the quadtree engine supports neither distances nor projection".into(),
                    ));
                }
                Ok(Sketch::Quadtree(QuadtreeSketch::build(points, params)?))
            }
        }
    }

    pub fn engine(&self) -> Engine {
        match self {
            Sketch::Exact(_) => Engine::Exact,
            Sketch::Quadtree(_) => Engine::Quadtree,
        }
    }

    pub fn params(&self) -> Params {
        match self {
            Sketch::Exact(s) => s.input_params(),
            Sketch::Quadtree(s) => s.params,
        }
    }

    pub fn query_ann(&self, y: &[i64]) -> Result<usize, QueryError> {
        match self {
            Sketch::Exact(s) => s.query_ann(y).map(|r| r.0),
            Sketch::Quadtree(s) => s.query_ann(y).map(|r| r.0),
        }
    }

    pub fn query_distance(&self, k: usize, y: &[i64]) -> Result<f64, QueryError> {
        match self {
            Sketch::Exact(s) => s.query_distance(k, y).map(|r| r.0),
            Sketch::Quadtree(_) => Err(QueryError::Unsupported("the quadtree engine answers only nearest neighbor queries")),
        }
    }

    pub fn query_all_distances(&self, y: &[i64]) -> Result<Vec<f64>, QueryError> {
        match self {
            Sketch::Exact(s) => s.query_all_distances(y).map(|r| r.0),
            Sketch::Quadtree(_) => Err(QueryError::Unsupported("the quadtree engine answers only nearest neighbor queries")),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        codec::encode(self).0
    }

    pub fn encode_with_breakdown(&self) -> (Vec<u8>, SizeBreakdown) {
        codec::encode(self)
    }

    pub fn decode(bytes: &[u8]) -> Result<Sketch, DecodeError> {
        codec::decode(bytes)
    }
}

fn check_match(points: &PointSet, params: &Params) -> Result<(), BuildError> {
    if points.len() != params.n || points.dim() != params.d || points.phi() != params.phi {
        return Err(BuildError::InvalidOption(format!(
            "params (n={}, d={}, Φ={}) do not match the point set (n={}, d={}, Φ={})",
            params.n,
            params.d,
            params.phi,
            points.len(),
            points.dim(),
            points.phi()
        )));
    }
    Ok(())
}

impl ExactSketch {
    pub fn build(points: &PointSet, params: &Params, opts: &BuildOptions) -> Result<ExactSketch, BuildError> {
        Self::build_traced(points, params, opts).map(|r| r.0)
    }

    /// Builds and also returns the builder's white-box view.
    pub fn build_traced(
        points: &PointSet,
        params: &Params,
        opts: &BuildOptions,
    ) -> Result<(ExactSketch, BuildTrace), BuildError> {
        check_match(points, params)?;
        if opts.jl && opts.distances {
            return Err(BuildError::InvalidOption(
                "distance estimation runs in the original space; disable projection".into(),
            ));
        }
        let tree_opts = hierarchy::TreeOptions {
            hash_width: opts.hash_width,
        };
        if opts.jl {
            let n = params.n as f64;
            let jl = JlProjection::new(
                params.d,
                params.phi,
                opts.projection_c,
                params.eps,
                params.delta / (params.q as f64 * n),
                rng::derive(params.seed, &[rng::tag::JL]),
            )?;
            let mapped = jl.map_points(points)?;
            let inner = Params::new_unchecked_dims(
                params.n,
                jl.d_out(),
                jl.phi_out,
                params.eps,
                params.delta,
                params.q,
                params.seed,
            )?;
            let (mut sketch, trace) = hierarchy::build_tree(&mapped, &inner, tree_opts)?;
            sketch.jl = Some(jl);
            return Ok((sketch, trace));
        }
        let (mut sketch, trace) = hierarchy::build_tree(points, params, tree_opts)?;
        if opts.distances {
            let mut bundle = DistanceBundle::sample(
                opts.projection_c,
                rng::derive(params.seed, &[rng::tag::SIGN]),
                params.eps,
                params.delta,
                params.q,
                params.d,
                params.top_level(),
            );
            bundle.roots = sketch
                .subtree_roots()
                .map(|r| {
                    let node = sketch.node(r);
                    let x = points.row(node.center as usize);
                    distance::RootDistance {
                        node: r,
                        projected: bundle.projection.project_int(x).expect("dimension checked"),
                        range: bundle.scale(node.level).sketch_int(x).expect("dimension checked"),
                    }
                })
                .collect();
            sketch.distances = Some(bundle);
        }
        Ok((sketch, trace))
    }

    /// Parameters of the input space, before any projection.
    pub fn input_params(&self) -> Params {
        match &self.jl {
            Some(jl) => Params {
                d: jl.d_in,
                phi: jl.phi_in,
                ..self.params
            },
            None => self.params,
        }
    }
}
