//! Exchange-graph construction from global place descriptors: Euclidean
//! distances, a logistic match-probability model and a probability threshold.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeSpec, ExchangeGraph, VertexSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor {
    pub robot: usize,
    pub observation: u64,
    /// Size in bytes of the full observation, used as the vertex weight.
    pub weight: u64,
    pub vector: Vec<f64>,
}

pub fn euclidean_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// `p(d) = 1 / (1 + exp(-beta1 d - beta0))`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub beta0: f64,
    pub beta1: f64,
}

impl LogisticModel {
    pub fn new(beta0: f64, beta1: f64) -> Self {
        LogisticModel { beta0, beta1 }
    }

    pub fn predict(&self, d: f64) -> f64 {
        sigmoid(self.beta1 * d + self.beta0)
    }

    /// Distance at which the model crosses `p`; `None` for a flat model or
    /// `p` in {0, 1}.
    pub fn distance_threshold(&self, p: f64) -> Option<f64> {
        if self.beta1 == 0.0 || p <= 0.0 || p >= 1.0 {
            return None;
        }
        Some(((p / (1.0 - p)).ln() - self.beta0) / self.beta1)
    }
}

pub fn predict_probability(model: &LogisticModel, d: f64) -> f64 {
    model.predict(d)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub distance: f64,
    pub label: bool,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub lambda: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda: 1e-6,
            max_iterations: 100,
            tolerance: 1e-10,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FitReport {
    pub model: LogisticModel,
    pub iterations: usize,
    pub converged: bool,
}

/// Regularized negative log-likelihood `sum softplus(z) - y z + lambda |beta|^2`.
pub fn penalized_nll(model: &LogisticModel, pairs: &[LabeledPair], lambda: f64) -> f64 {
    let nll: f64 = pairs
        .iter()
        .map(|p| {
            let z = model.beta1 * p.distance + model.beta0;
            softplus(z) - if p.label { z } else { 0.0 }
        })
        .sum();
    nll + lambda * (model.beta0 * model.beta0 + model.beta1 * model.beta1)
}

/// Damped Newton (IRLS) on the two-parameter model.
pub fn fit_logistic(pairs: &[LabeledPair], cfg: FitConfig) -> Result<FitReport> {
    if pairs.len() < 2 {
        return Err(Error::DegenerateData("need at least 2 labeled pairs".into()));
    }
    if let Some(p) = pairs.iter().find(|p| !p.distance.is_finite()) {
        return Err(Error::DegenerateData(format!("non-finite distance {}", p.distance)));
    }
    let positives = pairs.iter().filter(|p| p.label).count();
    if positives == 0 || positives == pairs.len() {
        return Err(Error::DegenerateData("all labels are identical".into()));
    }

    let mut beta = [0.0f64; 2];
    let lam = cfg.lambda;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..cfg.max_iterations {
        let (mut g0, mut g1) = (2.0 * lam * beta[0], 2.0 * lam * beta[1]);
        let (mut h00, mut h01, mut h11) = (2.0 * lam, 0.0, 2.0 * lam);
        for p in pairs {
            let s = sigmoid(beta[1] * p.distance + beta[0]);
            let r = s - if p.label { 1.0 } else { 0.0 };
            let w = s * (1.0 - s);
            g0 += r;
            g1 += r * p.distance;
            h00 += w;
            h01 += w * p.distance;
            h11 += w * p.distance * p.distance;
        }
        if g0.hypot(g1) <= cfg.tolerance {
            converged = true;
            break;
        }
        iterations = it + 1;
        let det = h00 * h11 - h01 * h01;
        let (d0, d1) = if det > 0.0 {
            ((h11 * g0 - h01 * g1) / det, (h00 * g1 - h01 * g0) / det)
        } else {
            (g0, g1)
        };
        let current = penalized_nll(&LogisticModel::new(beta[0], beta[1]), pairs, lam);
        // near the optimum the predicted decrease drowns in rounding of the
        // objective, so the line search cannot judge the step
        if g0 * d0 + g1 * d1 <= 1e-12 * (1.0 + current.abs()) {
            beta = [beta[0] - d0, beta[1] - d1];
            continue;
        }
        let mut step = 1.0;
        loop {
            let cand = LogisticModel::new(beta[0] - step * d0, beta[1] - step * d1);
            if penalized_nll(&cand, pairs, lam) <= current || step < 1e-10 {
                beta = [cand.beta0, cand.beta1];
                break;
            }
            step *= 0.5;
        }
    }
    let model = LogisticModel::new(beta[0], beta[1]);
    if !converged {
        log::warn!("logistic fit did not converge in {} iterations", cfg.max_iterations);
    }
    if model.beta1 >= 0.0 {
        log::warn!("fitted beta1 = {} is not negative", model.beta1);
    }
    Ok(FitReport {
        model,
        iterations,
        converged,
    })
}

/// One vertex per descriptor; an edge for every cross-robot pair whose match
/// probability reaches `threshold`.
pub fn build_exchange_graph(descriptors: &[Descriptor], model: &LogisticModel, threshold: f64) -> Result<ExchangeGraph> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidThreshold(threshold));
    }
    let robots = descriptors.iter().map(|d| d.robot + 1).max().unwrap_or(0);
    if robots < 2 {
        return Err(Error::TooFewRobots(robots));
    }
    let dim = descriptors[0].vector.len();
    let mut order: Vec<&Descriptor> = descriptors.iter().collect();
    order.sort_by_key(|d| d.observation);
    let mut edges = Vec::new();
    for (i, a) in order.iter().enumerate() {
        if a.vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: a.vector.len(),
            });
        }
        for b in &order[i + 1..] {
            if a.robot == b.robot {
                continue;
            }
            let p = model.predict(euclidean_distance(&a.vector, &b.vector)?);
            if p >= threshold {
                edges.push(EdgeSpec::new(edges.len() as u64, a.observation, b.observation, p));
            }
        }
    }
    let vertices = descriptors
        .iter()
        .map(|d| VertexSpec {
            key: d.observation,
            robot: d.robot,
            weight: d.weight,
        })
        .collect();
    ExchangeGraph::build(robots, vertices, edges)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    /// Absent when the data has no positives.
    pub recall: Option<f64>,
}

/// Precision and recall of `p >= t` for each threshold.
pub fn precision_recall(model: &LogisticModel, pairs: &[LabeledPair], thresholds: &[f64]) -> Result<Vec<PrPoint>> {
    if pairs.is_empty() {
        return Err(Error::DegenerateData("no labeled pairs".into()));
    }
    let probs: Vec<f64> = pairs.iter().map(|p| model.predict(p.distance)).collect();
    let positives = pairs.iter().filter(|p| p.label).count();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for (pair, &p) in pairs.iter().zip(&probs) {
                if p >= t {
                    if pair.label {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            PrPoint {
                threshold: t,
                precision: if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 },
                recall: (positives > 0).then(|| tp as f64 / positives as f64),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorFile {
    pub dim: usize,
    pub robots: Vec<RobotDescriptors>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDescriptors {
    pub robot: usize,
    pub observations: Vec<ObservationRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub id: u64,
    pub weight_bytes: u64,
    pub vector: Vec<f64>,
}

impl DescriptorFile {
    pub fn descriptors(&self) -> Result<Vec<Descriptor>> {
        let mut out = Vec::new();
        for r in &self.robots {
            for o in &r.observations {
                if o.vector.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: o.vector.len(),
                    });
                }
                out.push(Descriptor {
                    robot: r.robot,
                    observation: o.id,
                    weight: o.weight_bytes,
                    vector: o.vector.clone(),
                });
            }
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
struct PairRow {
    distance: f64,
    label: String,
}

/// Reads `distance,label` CSV; labels are `0/1` or `true/false`.
pub fn read_labeled_pairs(reader: impl Read) -> Result<Vec<LabeledPair>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<PairRow>() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let label = match row.label.trim() {
            "1" | "true" | "True" => true,
            "0" | "false" | "False" => false,
            other => return Err(Error::Parse(format!("bad label {other:?}"))),
        };
        out.push(LabeledPair {
            distance: row.distance,
            label,
        });
    }
    Ok(out)
}
