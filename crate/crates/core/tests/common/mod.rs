#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use reclqr_core::dynamics::{assemble_system, validate_inter_topic, OpinionModel, VectorizedSystem};
use reclqr_core::graph::{DirectedGraph, Edge};
use reclqr_core::linalg::{Matrix, Vector};
use reclqr_core::performance::{assemble_stage_cost, PerformanceWeights, StageCostMatrices};

/// Random ring through all agents plus random chords, so always strongly connected.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize) -> DirectedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    if n > 1 {
        for k in 0..n {
            let (s, t) = (order[k], order[(k + 1) % n]);
            if seen.insert((s, t)) {
                edges.push(Edge { source: s, target: t, weight: rng.gen_range(0.2..2.0) });
            }
        }
        for s in 0..n {
            for t in 0..n {
                if s != t && rng.gen_bool(0.3) && seen.insert((s, t)) {
                    edges.push(Edge { source: s, target: t, weight: rng.gen_range(0.2..2.0) });
                }
            }
        }
    }
    DirectedGraph::new(n, edges).unwrap()
}

/// Inter-topic matrices meeting the model assumptions: identity, or row-stochastic
/// blocks (each block contributes one zero eigenvalue to `C − I`).
pub fn random_coupling<R: Rng>(rng: &mut R, m: usize) -> Matrix {
    loop {
        let mut c = Matrix::zeros(m, m);
        if rng.gen_bool(0.15) {
            c.fill_diagonal(1.0);
        } else {
            let split = if m > 1 && rng.gen_bool(0.3) { rng.gen_range(1..m) } else { m };
            for (lo, hi) in [(0, split), (split, m)] {
                for i in lo..hi {
                    let row: Vec<f64> = (lo..hi).map(|_| rng.gen_range(0.05..1.0)).collect();
                    let sum: f64 = row.iter().sum();
                    for (k, j) in (lo..hi).enumerate() {
                        c[(i, j)] = row[k] / sum;
                    }
                }
            }
        }
        if validate_inter_topic(&c).unwrap().passed() {
            return c;
        }
    }
}

pub struct RandomModel {
    pub model: OpinionModel,
    pub sys: VectorizedSystem,
}

pub fn random_model<R: Rng>(rng: &mut R, n_max: usize, m_max: usize, anchored: bool) -> RandomModel {
    let n = rng.gen_range(1..=n_max);
    let m = rng.gen_range(1..=m_max);
    random_model_sized(rng, n, m, anchored)
}

pub fn random_model_sized<R: Rng>(rng: &mut R, n: usize, m: usize, anchored: bool) -> RandomModel {
    let pair = random_graph(rng, n).balance().unwrap();
    let coupling = random_coupling(rng, m);
    let anchoring = Vector::from_fn(n, |_, _| rng.gen_range(0.2..3.0));
    let anchors = if anchored { Matrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0)) } else { Matrix::zeros(n, m) };
    let model = OpinionModel::new(pair, coupling, anchoring, anchors).unwrap();
    let sys = assemble_system(&model).unwrap();
    RandomModel { model, sys }
}

/// Weights whose per-index margins are positive, hence a strictly convex cost.
pub fn strictly_convex_weights<R: Rng>(rng: &mut R, nm: usize, with_deviation: bool) -> PerformanceWeights {
    let w_d = Vector::from_fn(nm, |_, _| if with_deviation { rng.gen_range(0.2..2.0) } else { 0.0 });
    let w_p = Vector::from_fn(nm, |_, _| rng.gen_range(0.2..2.0));
    let w_ex = Vector::from_fn(nm, |_, _| rng.gen_range(0.5..2.0));
    let w_en = Vector::from_fn(nm, |i, _| {
        let limit = 2.0 * ((w_d[i] + w_p[i]) * w_ex[i]).sqrt();
        rng.gen_range(0.0..0.9) * limit
    });
    PerformanceWeights::new(w_d, w_p, w_en, w_ex, rng.gen_range(0.0..0.5)).unwrap()
}

pub fn cost_matrices(rm: &RandomModel, w: &PerformanceWeights) -> StageCostMatrices {
    assemble_stage_cost(w, &rm.model.laplacians, &rm.sys).unwrap()
}

pub fn random_vector<R: Rng>(rng: &mut R, len: usize, scale: f64) -> Vector {
    Vector::from_fn(len, |_, _| rng.gen_range(-scale..scale))
}
