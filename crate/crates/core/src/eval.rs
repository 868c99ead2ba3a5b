//! Monte Carlo evaluation against the brute-force oracle.
//!
//! A trial builds a sketch, round-trips it through the codec, and answers a
//! fresh query batch from the decoded bytes alone. A nearest neighbor trial
//! succeeds when every answer is within `1 + cε` of the true nearest
//! distance; a distance trial succeeds when all `n·q` estimates are within a
//! factor `1 ± cε`.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::geometry::{dist_sq_int, PointSet};
use crate::oracle::{exact_all_distances, exact_nn, gen_hard_instance, HardInstance, gen_queries, gen_random, Distribution};
use crate::{BuildError, BuildOptions, Engine, Params, QueryError, SizeBreakdown, Sketch};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Ann,
    Distances,
    /// Bit recovery on the adversarial instance.
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub problem: Problem,
    pub engine: Engine,
    pub n: usize,
    pub d: usize,
    pub phi: i64,
    pub eps: f64,
    pub delta: f64,
    pub q: usize,
    pub trials: usize,
    pub seed: u64,
    /// Approximation constant applied to ε in the success test.
    pub c: f64,
    pub distribution: Distribution,
    pub projection_c: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            problem: Problem::Ann,
            engine: Engine::Exact,
            n: 256,
            d: 6,
            phi: 1024,
            eps: 0.25,
            delta: 0.1,
            q: 16,
            trials: 50,
            seed: 1,
            c: 16.0,
            distribution: Distribution::Uniform,
            projection_c: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub success: bool,
    /// Fraction of individual answers that met the bound.
    pub answer_rate: f64,
    /// Largest observed ratio (ANN) or relative error (distances).
    pub worst: f64,
    pub breakdown: SizeBreakdown,
    pub bits_total: u64,
    pub t_build_ms: f64,
    pub t_query_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Decode(#[from] crate::DecodeError),
    #[error(transparent)]
    Geometry(#[from] crate::GeometryError),
}

impl EvalReport {
    pub fn success_rate(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().filter(|t| t.success).count() as f64 / self.trials.len() as f64
    }

    pub fn answer_rate(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().map(|t| t.answer_rate).sum::<f64>() / self.trials.len() as f64
    }

    pub fn mean_bits(&self) -> f64 {
        self.trials.iter().map(|t| t.bits_total as f64).sum::<f64>() / self.trials.len().max(1) as f64
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("trial,success,bits_total,bits_tree,bits_hashes,bits_dist,t_build_ms,t_query_us\n");
        for t in &self.trials {
            writeln!(
                s,
                "{},{},{},{},{},{},{:.3},{:.3}",
                t.trial,
                t.success as u8,
                t.bits_total,
                t.breakdown.tree(),
                t.breakdown.hashes,
                t.breakdown.distance,
                t.t_build_ms,
                t.t_query_us
            )
            .unwrap();
        }
        s
    }

    pub fn text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let problem = match c.problem {
            Problem::Ann => "ann",
            Problem::Distances => "distances",
            Problem::Hard => "hard",
        };
        // The adversarial instance fixes its own dimension.
        let d = if c.problem == Problem::Hard { HardInstance::dim(c.n) } else { c.d };
        writeln!(
            s,
            "problem={problem} engine={:?} n={} d={d} phi={} eps={} delta={} q={} trials={} seed={} c={}",
            c.engine, c.n, c.phi, c.eps, c.delta, c.q, c.trials, c.seed, c.c
        )
        .unwrap();
        writeln!(s, "success_rate={:.4}", self.success_rate()).unwrap();
        if c.problem == Problem::Hard {
            writeln!(s, "bit_recovery_rate={:.4}", self.answer_rate()).unwrap();
        } else {
            writeln!(s, "answer_rate={:.4}", self.answer_rate()).unwrap();
        }
        let bits = self.mean_bits();
        let n = if c.problem == Problem::Hard { 2 * c.n } else { c.n };
        writeln!(s, "bits_total_mean={bits:.1} bits_per_point={:.2}", bits / n as f64).unwrap();
        if let Some(t) = self.trials.first() {
            for (name, b) in t.breakdown.rows() {
                writeln!(s, "  {name:<14}{b}").unwrap();
            }
        }
        let build = self.trials.iter().map(|t| t.t_build_ms).sum::<f64>() / self.trials.len().max(1) as f64;
        let query = self.trials.iter().map(|t| t.t_query_us).sum::<f64>() / self.trials.len().max(1) as f64;
        writeln!(s, "t_build_ms_mean={build:.2} t_query_us_mean={query:.2}").unwrap();
        s
    }
}

/// Worker count from `NNSK_THREADS`, defaulting to rayon's choice.
pub fn thread_count() -> Option<usize> {
    std::env::var("NNSK_THREADS").ok()?.parse().ok().filter(|&t| t > 0)
}

pub fn run(config: &EvalConfig) -> Result<EvalReport, EvalError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count() {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().expect("thread pool");
    let trials = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, t))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(EvalReport {
        config: config.clone(),
        trials,
    })
}

fn build_roundtrip(points: &PointSet, params: &Params, opts: &BuildOptions) -> Result<(Sketch, SizeBreakdown, u64, f64), EvalError> {
    let start = Instant::now();
    let sketch = Sketch::build(points, params, opts)?;
    let (blob, breakdown) = sketch.encode_with_breakdown();
    let t_build_ms = start.elapsed().as_secs_f64() * 1e3;
    let decoded = Sketch::decode(&blob)?;
    Ok((decoded, breakdown, blob.len() as u64 * 8, t_build_ms))
}

pub fn run_trial(config: &EvalConfig, trial: usize) -> Result<TrialResult, EvalError> {
    let seed = config.seed.wrapping_add(trial as u64);
    match config.problem {
        Problem::Hard => return hard_trial(config, trial, seed),
        Problem::Ann | Problem::Distances => {}
    }
    let points = gen_random(config.n, config.d, config.phi, config.distribution, seed)?;
    let params = points.params(config.eps, config.delta, config.q, seed)?;
    let opts = BuildOptions {
        engine: config.engine,
        distances: config.problem == Problem::Distances,
        projection_c: config.projection_c,
        ..BuildOptions::default()
    };
    let (sketch, breakdown, bits_total, t_build_ms) = build_roundtrip(&points, &params, &opts)?;
    let queries = gen_queries(&points, config.q, seed);
    let bound = config.c * config.eps;
    let start = Instant::now();
    let (good, total, worst) = match config.problem {
        Problem::Ann => {
            let mut good = 0;
            let mut worst = 1.0f64;
            for y in &queries {
                let got = sketch.query_ann(y)?;
                let (_, best) = exact_nn(&points, y)?;
                let dist = (dist_sq_int(points.row(got), y) as f64).sqrt();
                let ratio = if best == 0.0 {
                    if dist == 0.0 { 1.0 } else { f64::INFINITY }
                } else {
                    dist / best
                };
                worst = worst.max(ratio);
                good += (ratio <= 1.0 + bound) as usize;
            }
            (good, queries.len(), worst)
        }
        _ => {
            let truth = exact_all_distances(&points, &queries);
            let mut good = 0;
            let mut worst = 0.0f64;
            for (y, row) in queries.iter().zip(&truth) {
                let est = sketch.query_all_distances(y)?;
                for (&e, &t) in est.iter().zip(row) {
                    let rel = if t == 0.0 {
                        if e == 0.0 { 0.0 } else { f64::INFINITY }
                    } else {
                        (e - t).abs() / t
                    };
                    worst = worst.max(rel);
                    good += (rel <= bound) as usize;
                }
            }
            (good, queries.len() * points.len(), worst)
        }
    };
    let t_query_us = start.elapsed().as_secs_f64() * 1e6 / queries.len().max(1) as f64;
    Ok(TrialResult {
        trial,
        success: good == total,
        answer_rate: good as f64 / total.max(1) as f64,
        worst,
        breakdown,
        bits_total,
        t_build_ms,
        t_query_us,
    })
}

/// Builds on the adversarial instance at accuracy `ε/8` and decodes every
/// planted bit with one nearest neighbor query.
fn hard_trial(config: &EvalConfig, trial: usize, seed: u64) -> Result<TrialResult, EvalError> {
    let inst = gen_hard_instance(config.n, config.eps, config.phi, seed, false)?;
    let q = inst.queries.len();
    let params = Params::new(
        inst.points.len(),
        inst.points.dim(),
        config.phi,
        config.eps / 8.0,
        config.delta,
        q.min(inst.points.len()),
        seed,
    )?;
    let opts = BuildOptions {
        engine: config.engine,
        ..BuildOptions::default()
    };
    let (sketch, breakdown, bits_total, t_build_ms) = build_roundtrip(&inst.points, &params, &opts)?;
    let start = Instant::now();
    let mut good = 0;
    for (y, k) in inst.queries.iter().zip(&inst.key) {
        good += (sketch.query_ann(y)? == k.expected) as usize;
    }
    let t_query_us = start.elapsed().as_secs_f64() * 1e6 / q.max(1) as f64;
    Ok(TrialResult {
        trial,
        success: good == q,
        answer_rate: good as f64 / q.max(1) as f64,
        worst: 0.0,
        breakdown,
        bits_total,
        t_build_ms,
        t_query_us,
    })
}
