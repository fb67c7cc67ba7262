//! Relevance of each input variable for one class score.
//!
//! LRP decomposes the score `f_c(x)` backwards layer by layer with the
//! epsilon-stabilized rule, so the input relevances sum to `f_c(x)`.
//! Sensitivity analysis scores inputs by squared partial derivatives, which
//! sum to the squared gradient norm instead.

use std::fmt;

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{ForwardTrace, Model, WINDOW};

/// Stabilizer magnitude used unless the caller picks another.
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "LRP")]
    Lrp,
    #[serde(rename = "SA")]
    Sa,
    /// Sensitivity pooled per word with the plain l2 norm.
    #[serde(rename = "SA(l2)")]
    SaL2,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Lrp => "LRP",
            Method::Sa => "SA",
            Method::SaL2 => "SA(l2)",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lrp" => Ok(Method::Lrp),
            "sa" => Ok(Method::Sa),
            "sa-l2" | "sa(l2)" | "sal2" => Ok(Method::SaL2),
            other => Err(Error::Config(format!("unknown relevance method {other:?}"))),
        }
    }
}

/// Total relevance present after each backward stage of LRP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTotals {
    pub output: f64,
    pub pooled: f64,
    pub activations: f64,
    pub pre_activations: f64,
    pub input: f64,
}

impl StageTotals {
    pub fn as_array(&self) -> [f64; 5] {
        [self.output, self.pooled, self.activations, self.pre_activations, self.input]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMap {
    /// `D x N` relevance of every input variable. For SA these are the
    /// squared partial derivatives.
    pub per_dim: Array2<f64>,
    pub per_word: Vec<f64>,
    pub target_class: usize,
    pub method: Method,
    /// Stabilizer, LRP only.
    pub epsilon: Option<f64>,
    /// The explained score `f_c(x)`.
    pub f_value: f64,
    /// LRP only.
    pub stages: Option<StageTotals>,
    /// Squared gradient norm `||grad f_c||^2`, SA only.
    pub gradient_norm_sq: Option<f64>,
}

impl RelevanceMap {
    pub fn total(&self) -> f64 {
        self.per_dim.sum()
    }

    /// Difference between the summed relevance and the quantity the method
    /// conserves (`f_c(x)` for LRP, the squared gradient norm for SA).
    pub fn conservation_residual(&self) -> f64 {
        let target = match self.method {
            Method::Lrp => self.f_value,
            Method::Sa | Method::SaL2 => self.gradient_norm_sq.unwrap_or(0.0),
        };
        self.total() - target
    }
}

/// Absolute tolerance allowed on LRP conservation for a score of `value`.
pub fn conservation_tolerance(value: f64) -> f64 {
    1e-6 * value.abs() + 1e-9
}

fn stabilizer(z: f64, epsilon: f64) -> f64 {
    if z >= 0.0 {
        epsilon
    } else {
        -epsilon
    }
}

/// Turns `contributions[i] = x_i * w_i` into relevance messages in place.
/// Returns `None` when the stabilized denominator is zero or not finite.
fn redistribute_in_place(contributions: &mut [f64], bias: f64, relevance: f64, epsilon: f64) -> Option<()> {
    let n = contributions.len() as f64;
    let bias_share = bias / n;
    let mut z = 0.0;
    for c in contributions.iter_mut() {
        *c += bias_share;
        z += *c;
    }
    let s = stabilizer(z, epsilon);
    let denominator = z + s;
    if denominator == 0.0 || !denominator.is_finite() {
        return None;
    }
    let s_share = s / n;
    for c in contributions.iter_mut() {
        *c = (*c + s_share) / denominator * relevance;
    }
    Some(())
}

/// Splits the relevance of one linear neuron `z = sum_i x_i w_i + b` over
/// its inputs. The bias and the stabilizer are shared equally, so the
/// returned messages sum to `relevance`.
pub fn redistribute_linear(
    inputs: &[f64],
    weights: &[f64],
    bias: f64,
    relevance: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if inputs.len() != weights.len() {
        return Err(Error::DimMismatch { expected: inputs.len(), found: weights.len() });
    }
    if inputs.is_empty() {
        return Err(Error::DimMismatch { expected: 1, found: 0 });
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    let mut messages: Vec<f64> = inputs.iter().zip(weights).map(|(x, w)| x * w).collect();
    redistribute_in_place(&mut messages, bias, relevance, epsilon)
        .ok_or(Error::DegenerateDenominator { layer: "linear", neuron: 0 })?;
    Ok(messages)
}

fn check_trace(model: &Model, trace: &ForwardTrace) -> Result<()> {
    let dims = model.dims();
    let (rows, cols) = trace.input.dim();
    let problem = if rows != dims.embedding {
        Some("input rows differ from the embedding dimension")
    } else if cols < WINDOW || trace.conv_pre.dim() != (dims.filters, cols - 1) {
        Some("convolution output shape differs from the model")
    } else if trace.activations.dim() != trace.conv_pre.dim() {
        Some("activation shape differs from the convolution output")
    } else if trace.pooled.len() != dims.filters || trace.argmax.len() != dims.filters {
        Some("pooled vector length differs from the filter count")
    } else if trace.scores.len() != dims.classes {
        Some("score vector length differs from the class count")
    } else if trace.argmax.iter().any(|&t| t >= cols - 1) {
        Some("pooling winner outside the convolution output")
    } else {
        None
    };
    match problem {
        Some(p) => Err(Error::TraceMismatch(p.into())),
        None => Ok(()),
    }
}

/// Relevance held by every layer during one LRP backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LrpLayers {
    pub pooled: Vec<f64>,
    /// `F x (N-1)`, nonzero only at each filter's pooling winner.
    pub activations: Array2<f64>,
    pub pre_activations: Array2<f64>,
    /// `D x N`.
    pub input: Array2<f64>,
}

impl LrpLayers {
    fn totals(&self, output: f64) -> StageTotals {
        StageTotals {
            output,
            pooled: self.pooled.iter().sum(),
            activations: self.activations.sum(),
            pre_activations: self.pre_activations.sum(),
            input: self.input.sum(),
        }
    }
}

/// The LRP backward pass, keeping every intermediate layer.
pub fn lrp_layers(model: &Model, trace: &ForwardTrace, target: usize, epsilon: f64) -> Result<LrpLayers> {
    check_trace(model, trace)?;
    let dims = model.dims();
    if target >= dims.classes {
        return Err(Error::UnknownClass(target.to_string()));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    let f_value = trace.scores[target];

    // output layer -> pooled vector
    let mut pooled: Vec<f64> = trace.pooled.iter().zip(model.fc_weights.row(target)).map(|(p, w)| p * w).collect();
    redistribute_in_place(&mut pooled, model.fc_bias[target], f_value, epsilon)
        .ok_or(Error::DegenerateDenominator { layer: "fully-connected", neuron: target })?;

    // max pooling: everything to the winner
    let mut activations = Array2::zeros(trace.activations.raw_dim());
    for (f, &t) in trace.argmax.iter().enumerate() {
        activations[[f, t]] = pooled[f];
    }
    // ReLU: relevance stays on the neuron
    let pre_activations = activations.clone();

    let mut input = Array2::zeros(trace.input.raw_dim());
    let mut window = vec![0.0; WINDOW * dims.embedding];
    for ((f, t), &relevance) in pre_activations.indexed_iter() {
        if relevance == 0.0 {
            continue;
        }
        for k in 0..WINDOW {
            let x = trace.input.column(t + k);
            let w = model.conv_weights.slice(s![f, .., k]);
            let part = &mut window[k * dims.embedding..(k + 1) * dims.embedding];
            for ((slot, xi), wi) in part.iter_mut().zip(x).zip(w) {
                *slot = xi * wi;
            }
        }
        redistribute_in_place(&mut window, model.conv_bias[f], relevance, epsilon)
            .ok_or(Error::DegenerateDenominator { layer: "convolution", neuron: f })?;
        for k in 0..WINDOW {
            let mut column = input.column_mut(t + k);
            for (slot, m) in column.iter_mut().zip(&window[k * dims.embedding..(k + 1) * dims.embedding]) {
                *slot += m;
            }
        }
    }
    Ok(LrpLayers { pooled, activations, pre_activations, input })
}

/// LRP with the epsilon rule on the linear layers and winner-take-all on the
/// max pooling. Only the target output neuron is seeded, with its logit.
pub fn lrp(model: &Model, trace: &ForwardTrace, target: usize, epsilon: f64) -> Result<RelevanceMap> {
    let layers = lrp_layers(model, trace, target, epsilon)?;
    let f_value = trace.scores[target];
    let stages = layers.totals(f_value);
    let per_word = pool_words(layers.input.view(), Method::Lrp);
    Ok(RelevanceMap {
        per_dim: layers.input,
        per_word,
        target_class: target,
        method: Method::Lrp,
        epsilon: Some(epsilon),
        f_value,
        stages: Some(stages),
        gradient_norm_sq: None,
    })
}

/// Sensitivity analysis from a recorded trace. `method` selects the word
/// pooling (`Sa` or `SaL2`); per-dimension values are squared partials either way.
pub fn sensitivity_from_trace(
    model: &Model,
    trace: &ForwardTrace,
    target: usize,
    method: Method,
) -> Result<RelevanceMap> {
    if method == Method::Lrp {
        return Err(Error::Config("sensitivity requires SA or SA(l2)".into()));
    }
    check_trace(model, trace)?;
    let gradient = model.input_gradient_from_trace(trace, target)?;
    let per_dim = gradient.mapv(|g| g * g);
    let gradient_norm_sq = gradient.iter().map(|g| g * g).sum();
    let per_word = pool_words(per_dim.view(), method);
    Ok(RelevanceMap {
        per_dim,
        per_word,
        target_class: target,
        method,
        epsilon: None,
        f_value: trace.scores[target],
        stages: None,
        gradient_norm_sq: Some(gradient_norm_sq),
    })
}

pub fn sensitivity(model: &Model, x: ArrayView2<f64>, target: usize) -> Result<RelevanceMap> {
    let trace = model.forward(x)?;
    sensitivity_from_trace(model, &trace, target, Method::Sa)
}

/// Runs the forward pass and the chosen method in one call.
pub fn explain(model: &Model, x: ArrayView2<f64>, target: usize, method: Method, epsilon: f64) -> Result<RelevanceMap> {
    let trace = model.forward(x)?;
    match method {
        Method::Lrp => lrp(model, &trace, target, epsilon),
        Method::Sa | Method::SaL2 => sensitivity_from_trace(model, &trace, target, method),
    }
}

/// Word relevance from per-dimension relevance: column sums, or the square
/// root of the column sum for `SaL2` (whose input holds squared partials).
pub fn pool_words(per_dim: ArrayView2<f64>, method: Method) -> Vec<f64> {
    let sums = per_dim.sum_axis(Axis(0));
    match method {
        Method::Lrp | Method::Sa => sums.to_vec(),
        Method::SaL2 => sums.iter().map(|v| v.sqrt()).collect(),
    }
}
