//! Decentralized parameter exchange: the chain communication graph, the
//! weight matrix, and the consensus update rules (with their quantized and
//! baseline variants).
//!
//! A round has barrier semantics: every message is produced from the
//! pre-round parameters before any agent applies its update, and each
//! message carries the round counter it was produced in.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::ParamVector;
use crate::quantizer::{
    decode, dequantize, encode, message_bits, quantize, QuantError, QuantSpec, QuantizedMessage,
    WireError, WireMode, RAW_BITS_PER_PARAM,
};

#[derive(Debug, Error, PartialEq)]
pub enum ConsensusError {
    #[error("graph needs at least 2 agents, got {0}")]
    InvalidSize(usize),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mean mode requires a non-empty neighborhood")]
    ModeRequiresNeighbors,
    #[error("consensus mode requires the agent's own payload")]
    MissingOwnPayload,
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Undirected communication graph with non-negative symmetric weights and no
/// self-loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommGraph {
    n: usize,
    weights: Vec<f64>, // n×n row-major
}

impl CommGraph {
    /// Path graph 1–2–…–V with unit weights: each vehicle talks to the ones
    /// ahead and behind.
    pub fn chain(v: usize) -> Result<Self, ConsensusError> {
        if v < 2 {
            return Err(ConsensusError::InvalidSize(v));
        }
        let mut weights = vec![0.0; v * v];
        for i in 0..v - 1 {
            weights[i * v + i + 1] = 1.0;
            weights[(i + 1) * v + i] = 1.0;
        }
        Ok(Self { n: v, weights })
    }

    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self, ConsensusError> {
        if n < 2 {
            return Err(ConsensusError::InvalidSize(n));
        }
        if weights.len() != n * n {
            return Err(ConsensusError::InvalidWeights(format!(
                "expected {} entries, got {}",
                n * n,
                weights.len()
            )));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(ConsensusError::InvalidWeights("self-loop".into()));
            }
            for j in 0..n {
                let w = weights[i * n + j];
                if !(w >= 0.0) {
                    return Err(ConsensusError::InvalidWeights(format!(
                        "negative or NaN weight at ({i}, {j})"
                    )));
                }
                if w != weights[j * n + i] {
                    return Err(ConsensusError::InvalidWeights("asymmetric".into()));
                }
            }
        }
        Ok(Self { n, weights })
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        (0..self.n)
            .filter(|&j| self.weight(i, j) > 0.0)
            .map(|j| (j, self.weight(i, j)))
            .collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.weight(i, j) > 0.0).count()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.weight(i, j) > 0.0 {
                    edges.push((i, j));
                }
            }
        }
        edges
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusMode {
    /// Eq.-9 style blend: x + ε·Σ w_ij (x_j − x_i) − λ·g, quantized when the
    /// resolution is non-zero.
    Macacc,
    /// Neighborhood mean replaces the own vector, then −λ·g.
    Mean,
    /// Purely local gradient step (independent learners).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    /// Collaboration scale ε on the neighbor differences.
    pub epsilon: f64,
    /// Gradient step λ.
    pub lambda: f64,
    pub mode: ConsensusMode,
    pub quant: QuantSpec,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0e-3,
            lambda: 2.5e-4,
            mode: ConsensusMode::Macacc,
            quant: QuantSpec::passthrough(),
        }
    }
}

/// What actually crosses the boundary between agents: the raw vector for
/// pass-through modes, or one quantized message per agent per round.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Raw(Vec<f64>),
    Quantized(QuantizedMessage),
}

impl Payload {
    pub fn dim(&self) -> usize {
        match self {
            Payload::Raw(v) => v.len(),
            Payload::Quantized(q) => q.dim(),
        }
    }

    pub fn to_values(&self) -> Vec<f64> {
        match self {
            Payload::Raw(v) => v.clone(),
            Payload::Quantized(q) => dequantize(q),
        }
    }
}

/// One agent's parameter update from its own payload, the neighbor payloads
/// (with edge weights), and its local gradient.
pub fn consensus_update(
    x: &ParamVector,
    own: Option<&Payload>,
    neighbors: &[(f64, &Payload)],
    grad: &ParamVector,
    cfg: &ConsensusConfig,
) -> Result<ParamVector, ConsensusError> {
    let d = x.len();
    if grad.len() != d {
        return Err(ConsensusError::DimensionMismatch(format!(
            "gradient has {} values, parameters {d}",
            grad.len()
        )));
    }
    for (_, p) in neighbors {
        if p.dim() != d {
            return Err(ConsensusError::DimensionMismatch(format!(
                "neighbor payload has {} values, parameters {d}",
                p.dim()
            )));
        }
    }

    let mut out = match cfg.mode {
        ConsensusMode::None => x.clone(),
        ConsensusMode::Macacc => {
            let own = own.ok_or(ConsensusError::MissingOwnPayload)?;
            if own.dim() != d {
                return Err(ConsensusError::DimensionMismatch(format!(
                    "own payload has {} values, parameters {d}",
                    own.dim()
                )));
            }
            let own_values = own.to_values();
            let mut out = x.clone();
            for (w, payload) in neighbors {
                let neighbor_values = payload.to_values();
                let slice = out.as_mut_slice();
                for k in 0..d {
                    slice[k] += cfg.epsilon * w * (neighbor_values[k] - own_values[k]);
                }
            }
            out
        }
        ConsensusMode::Mean => {
            if neighbors.is_empty() {
                return Err(ConsensusError::ModeRequiresNeighbors);
            }
            let mut sum = vec![0.0; d];
            for (_, payload) in neighbors {
                for (s, v) in sum.iter_mut().zip(payload.to_values()) {
                    *s += v;
                }
            }
            let scale = 1.0 / neighbors.len() as f64;
            for s in &mut sum {
                *s *= scale;
            }
            ParamVector::new(sum)
        }
    };
    out.axpy(-cfg.lambda, grad);
    Ok(out)
}

/// Max distance from any agent's vector to the across-agent mean.
pub fn disagreement(xs: &[ParamVector]) -> Result<f64, ConsensusError> {
    if xs.is_empty() {
        return Err(ConsensusError::InvalidSize(0));
    }
    let d = xs[0].len();
    if xs.iter().any(|x| x.len() != d) {
        return Err(ConsensusError::DimensionMismatch(
            "agents disagree on dimension".into(),
        ));
    }
    let refs: Vec<&ParamVector> = xs.iter().collect();
    let mean = ParamVector::mean_of(&refs);
    Ok(xs
        .iter()
        .map(|x| x.l2_distance(&mean))
        .fold(0.0, f64::max))
}

struct RoundMessage {
    round: u64,
    payload: Payload,
    wire_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome {
    pub round: u64,
    /// Exact wire bits summed over every directed send.
    pub bits_sent: u64,
    /// Directed sends this round (2·|edges| unless mode is `None`).
    pub messages_sent: u64,
    pub disagreement: f64,
}

/// One synchronous exchange round over the in-process loopback transport.
///
/// All payloads are produced from the pre-round `xs` (and, for quantized
/// exchange, pushed through the byte encoding and back) before any update is
/// applied.
pub fn run_round<R: Rng>(
    xs: &mut [ParamVector],
    grads: &[ParamVector],
    graph: &CommGraph,
    cfg: &ConsensusConfig,
    rngs: &mut [R],
    round: u64,
) -> Result<RoundOutcome, ConsensusError> {
    let v = graph.num_agents();
    if xs.len() != v || grads.len() != v || rngs.len() != v {
        return Err(ConsensusError::DimensionMismatch(format!(
            "{} agents on the graph, {} parameter vectors, {} gradients, {} rngs",
            v,
            xs.len(),
            grads.len(),
            rngs.len()
        )));
    }
    let d = xs[0].len();

    let exchanging = !matches!(cfg.mode, ConsensusMode::None);
    let messages: Vec<Option<RoundMessage>> = if !exchanging {
        (0..v).map(|_| None).collect()
    } else if cfg.mode == ConsensusMode::Macacc && !cfg.quant.is_passthrough() {
        let n = cfg.quant.resolution;
        xs.iter()
            .zip(rngs.iter_mut())
            .map(|(x, rng)| {
                let q = quantize(x.as_slice(), n, rng)?;
                // Per-message cheaper wire mode; decode on receipt.
                let mode = if message_bits(&q, WireMode::Sparse) < message_bits(&q, WireMode::Dense)
                {
                    WireMode::Sparse
                } else {
                    WireMode::Dense
                };
                let bytes = encode(&q, mode)?;
                let received = decode(&bytes, mode)?;
                Ok(Some(RoundMessage {
                    round,
                    payload: Payload::Quantized(received),
                    wire_bits: message_bits(&q, mode),
                }))
            })
            .collect::<Result<_, ConsensusError>>()?
    } else {
        xs.iter()
            .map(|x| {
                Some(RoundMessage {
                    round,
                    payload: Payload::Raw(x.as_slice().to_vec()),
                    wire_bits: RAW_BITS_PER_PARAM * d as u64,
                })
            })
            .collect()
    };

    let mut bits_sent = 0u64;
    let mut messages_sent = 0u64;
    if exchanging {
        for i in 0..v {
            let degree = graph.degree(i) as u64;
            let message = messages[i].as_ref().expect("payload produced above");
            bits_sent += degree * message.wire_bits;
            messages_sent += degree;
        }
    }

    let updated: Vec<ParamVector> = (0..v)
        .map(|i| {
            let own = messages[i].as_ref().map(|m| &m.payload);
            let neighbor_payloads: Vec<(f64, &Payload)> = if exchanging {
                graph
                    .neighbors(i)
                    .into_iter()
                    .map(|(j, w)| {
                        let message = messages[j].as_ref().expect("payload produced above");
                        assert_eq!(message.round, round, "message from a different round");
                        (w, &message.payload)
                    })
                    .collect()
            } else {
                Vec::new()
            };
            consensus_update(&xs[i], own, &neighbor_payloads, &grads[i], cfg)
        })
        .collect::<Result<_, ConsensusError>>()?;

    for (slot, new) in xs.iter_mut().zip(updated) {
        *slot = new;
    }

    Ok(RoundOutcome {
        round,
        bits_sent,
        messages_sent,
        disagreement: disagreement(xs)?,
    })
}

/// Trajectory of the synthetic quadratic-objective diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDemo {
    /// Disagreement after each round (index 0 = before the first round).
    pub disagreement: Vec<f64>,
    /// Max distance from any agent to mean(c) after each round.
    pub dist_to_target_mean: Vec<f64>,
    pub target_mean: Vec<f64>,
}

/// Chain-graph consensus on local quadratics ½‖x − c_i‖² with random
/// c_i ~ U[−0.5, 0.5]^dim: the average objective's minimizer is mean(c_i).
///
/// Agents start at their own minimizers and take diminishing gradient steps
/// λ_k = λ/(1+k), which removes the constant-step bias so the iterates reach
/// the exact consensus optimum; the across-agent mean stays at mean(c)
/// throughout. λ = 0 degenerates to pure consensus over the initial values.
pub fn quadratic_demo(
    agents: usize,
    epsilon: f64,
    lambda: f64,
    resolution: u16,
    iters: u64,
    dim: usize,
    seed: u64,
) -> Result<QuadraticDemo, ConsensusError> {
    use rand::SeedableRng;
    let graph = CommGraph::chain(agents)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<Vec<f64>> = (0..agents)
        .map(|_| (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    let target_mean: Vec<f64> = (0..dim)
        .map(|k| targets.iter().map(|c| c[k]).sum::<f64>() / agents as f64)
        .collect();
    let target_mean_pv = ParamVector::new(target_mean.clone());

    let mut xs: Vec<ParamVector> = targets
        .iter()
        .map(|c| ParamVector::new(c.clone()))
        .collect();
    let mut comm_rngs: Vec<rand_chacha::ChaCha8Rng> = (0..agents)
        .map(|i| rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0000 + i as u64)))
        .collect();

    let max_dist = |xs: &[ParamVector]| {
        xs.iter()
            .map(|x| x.l2_distance(&target_mean_pv))
            .fold(0.0f64, f64::max)
    };

    let mut demo = QuadraticDemo {
        disagreement: vec![disagreement(&xs)?],
        dist_to_target_mean: vec![max_dist(&xs)],
        target_mean,
    };

    for k in 0..iters {
        let grads: Vec<ParamVector> = xs
            .iter()
            .zip(&targets)
            .map(|(x, c)| {
                ParamVector::new(
                    x.as_slice()
                        .iter()
                        .zip(c)
                        .map(|(xi, ci)| xi - ci)
                        .collect(),
                )
            })
            .collect();
        let cfg = ConsensusConfig {
            epsilon,
            lambda: lambda / (1.0 + k as f64),
            mode: ConsensusMode::Macacc,
            quant: QuantSpec {
                resolution,
            },
        };
        let outcome = run_round(&mut xs, &grads, &graph, &cfg, &mut comm_rngs, k)?;
        demo.disagreement.push(outcome.disagreement);
        demo.dist_to_target_mean.push(max_dist(&xs));
    }
    Ok(demo)
}
