//! Word-deletion evaluation of relevance models, relevance-weighted
//! document vectors, and their 2-D PCA projection.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddedDoc;
use crate::error::{Error, Result};
use crate::net::Model;
use crate::relevance::{explain, Method, RelevanceMap};

pub const DEFAULT_HORIZON: usize = 50;
pub const DEFAULT_MIN_LEN: usize = 100;
pub const RANDOM_RUNS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Decreasing,
    Increasing,
    Random,
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order::Decreasing => "decreasing",
            Order::Increasing => "increasing",
            Order::Random => "random",
        })
    }
}

/// Which test documents a deletion curve starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Population {
    #[serde(rename = "correct")]
    CorrectInitial,
    #[serde(rename = "wrong")]
    WrongInitial,
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Population::CorrectInitial => "correct",
            Population::WrongInitial => "wrong",
        })
    }
}

/// How words are picked for deletion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ranking {
    /// By word relevance w.r.t. the true class, computed once on the intact document.
    Relevance { method: Method, order: Order, epsilon: f64 },
    /// Uniformly random positions; run `r` uses seed `seed + r`.
    Random { seed: u64, runs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeletionCurve {
    pub method: String,
    pub order: Order,
    pub population: Population,
    /// Index `k` is the accuracy after `k` deletions.
    pub accuracies: Vec<f64>,
    /// Per-run curves of the random baseline.
    pub runs: Vec<Vec<f64>>,
    /// Population standard deviation across runs, random baseline only.
    pub std: Option<Vec<f64>>,
}

impl DeletionCurve {
    pub fn horizon(&self) -> usize {
        self.accuracies.len() - 1
    }

    pub fn label(&self) -> String {
        format!("{} {}", self.method, self.order)
    }

    /// `k,accuracy[,std]` with one row per deletion count.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.std.is_some() { "k,accuracy,std\n" } else { "k,accuracy\n" });
        for (k, acc) in self.accuracies.iter().enumerate() {
            match &self.std {
                Some(std) => out.push_str(&format!("{k},{acc},{}\n", std[k])),
                None => out.push_str(&format!("{k},{acc}\n")),
            }
        }
        out
    }
}

/// Zeroes the columns at `positions`; every other entry is copied unchanged.
pub fn delete_words(x: ArrayView2<f64>, positions: &[usize]) -> Result<Array2<f64>> {
    let mut out = x.to_owned();
    for &p in positions {
        if p >= x.ncols() {
            return Err(Error::OutOfRange { position: p, len: x.ncols() });
        }
        out.column_mut(p).fill(0.0);
    }
    Ok(out)
}

/// Positions sorted by relevance; ties keep the earlier position first.
pub fn deletion_order(word_relevances: &[f64], order: Order) -> Vec<usize> {
    let mut positions: Vec<usize> = (0..word_relevances.len()).collect();
    match order {
        Order::Decreasing => positions.sort_by(|&a, &b| word_relevances[b].total_cmp(&word_relevances[a])),
        Order::Increasing => positions.sort_by(|&a, &b| word_relevances[a].total_cmp(&word_relevances[b])),
        Order::Random => {}
    }
    positions
}

/// Documents of at least `min_len` words whose initial prediction is right
/// (or wrong, depending on `population`).
pub fn select_population<'a>(
    model: &Model,
    docs: &'a [EmbeddedDoc],
    min_len: usize,
    population: Population,
) -> Result<Vec<&'a EmbeddedDoc>> {
    let flags = docs
        .par_iter()
        .map(|d| {
            if d.len() < min_len {
                return Ok(false);
            }
            let (class, _) = model.predict(d.matrix.view())?;
            Ok((class == d.label_index) == (population == Population::CorrectInitial))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(docs.iter().zip(flags).filter(|(_, keep)| *keep).map(|(d, _)| d).collect())
}

/// Correctness after each of `0..=k` cumulative deletions along `order`.
fn doc_trajectory(model: &Model, doc: &EmbeddedDoc, order: &[usize], k: usize) -> Result<Vec<bool>> {
    let mut x = doc.matrix.clone();
    let mut out = Vec::with_capacity(k + 1);
    for step in 0..=k {
        if step > 0 {
            x.column_mut(order[step - 1]).fill(0.0);
        }
        let (class, _) = model.predict(x.view())?;
        out.push(class == doc.label_index);
    }
    Ok(out)
}

fn mean_curve(trajectories: &[Vec<bool>], k: usize) -> Vec<f64> {
    let n = trajectories.len() as f64;
    (0..=k).map(|step| trajectories.iter().filter(|t| t[step]).count() as f64 / n).collect()
}

pub fn deletion_experiment(
    model: &Model,
    docs: &[&EmbeddedDoc],
    population: Population,
    ranking: Ranking,
    k: usize,
) -> Result<DeletionCurve> {
    if docs.is_empty() {
        return Err(Error::EmptyPopulation(format!("no {population}-initial documents")));
    }
    let min_len = docs.iter().map(|d| d.len()).min().unwrap_or(0);
    if k > min_len {
        return Err(Error::HorizonTooLong { k, min_len });
    }
    for doc in docs {
        let (class, _) = model.predict(doc.matrix.view())?;
        if (class == doc.label_index) != (population == Population::CorrectInitial) {
            return Err(Error::EmptyPopulation(format!(
                "document {} does not belong to the {population}-initial population",
                doc.id
            )));
        }
    }

    match ranking {
        Ranking::Relevance { method, order, epsilon } => {
            if order == Order::Random {
                return Err(Error::Config("relevance ranking needs a decreasing or increasing order".into()));
            }
            let trajectories = docs
                .par_iter()
                .map(|doc| {
                    let relevance = explain(model, doc.matrix.view(), doc.label_index, method, epsilon)?;
                    let positions = deletion_order(&relevance.per_word, order);
                    doc_trajectory(model, doc, &positions, k)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DeletionCurve {
                method: method.label().to_owned(),
                order,
                population,
                accuracies: mean_curve(&trajectories, k),
                runs: Vec::new(),
                std: None,
            })
        }
        Ranking::Random { seed, runs } => {
            if runs == 0 {
                return Err(Error::Config("random baseline needs at least one run".into()));
            }
            let mut per_run = Vec::with_capacity(runs);
            for run in 0..runs {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(run as u64));
                let orders: Vec<Vec<usize>> = docs
                    .iter()
                    .map(|d| {
                        let mut p: Vec<usize> = (0..d.len()).collect();
                        p.shuffle(&mut rng);
                        p
                    })
                    .collect();
                let trajectories = docs
                    .par_iter()
                    .zip(orders.par_iter())
                    .map(|(doc, order)| doc_trajectory(model, doc, order, k))
                    .collect::<Result<Vec<_>>>()?;
                per_run.push(mean_curve(&trajectories, k));
            }
            let n = runs as f64;
            let mean: Vec<f64> = (0..=k).map(|s| per_run.iter().map(|r| r[s]).sum::<f64>() / n).collect();
            let std =
                (0..=k).map(|s| (per_run.iter().map(|r| (r[s] - mean[s]).powi(2)).sum::<f64>() / n).sqrt()).collect();
            Ok(DeletionCurve {
                method: "random".to_owned(),
                order: Order::Random,
                population,
                accuracies: mean,
                runs: per_run,
                std: Some(std),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// `sum_t R(w_t) * w_t`
    #[serde(rename = "word-level")]
    WordLevel,
    /// `sum_t R_{.,t} (elementwise) w_t`
    #[serde(rename = "element-wise")]
    ElementWise,
    /// `sum_t w_t`
    #[serde(rename = "SUM")]
    Sum,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::WordLevel => "word-level",
            Scheme::ElementWise => "element-wise",
            Scheme::Sum => "SUM",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    pub id: String,
    pub scheme: Scheme,
    pub method: Option<Method>,
    /// Unit l2 norm, or exactly zero when `is_zero`.
    pub vector: Array1<f64>,
    pub is_zero: bool,
}

/// Combines the document's word embeddings into one vector and normalizes it.
/// `relevance` is required for the word-level and element-wise schemes.
pub fn doc_vector(doc: &EmbeddedDoc, relevance: Option<&RelevanceMap>, scheme: Scheme) -> Result<DocVector> {
    let x = &doc.matrix;
    let need = |r: Option<&RelevanceMap>| -> Result<RelevanceMap> {
        let r = r.ok_or_else(|| Error::Config(format!("{scheme} document vectors need relevances")))?;
        if r.per_dim.dim() != x.dim() {
            return Err(Error::DimMismatch { expected: x.len(), found: r.per_dim.len() });
        }
        Ok(r.clone())
    };
    let (vector, method) = match scheme {
        Scheme::Sum => (x.sum_axis(ndarray::Axis(1)), None),
        Scheme::WordLevel => {
            let r = need(relevance)?;
            (x.dot(&Array1::from(r.per_word.clone())), Some(r.method))
        }
        Scheme::ElementWise => {
            let r = need(relevance)?;
            ((x * &r.per_dim).sum_axis(ndarray::Axis(1)), Some(r.method))
        }
    };
    let norm = vector.dot(&vector).sqrt();
    let is_zero = norm == 0.0;
    let vector = if is_zero { vector } else { vector / norm };
    Ok(DocVector { id: doc.id.clone(), scheme, method, vector, is_zero })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    /// Variance along each of the two components (covariance eigenvalues).
    pub explained_variance: [f64; 2],
    pub components: [Array1<f64>; 2],
    pub mean: Array1<f64>,
}

/// Projects onto the top two principal components of the sample covariance.
/// Each component is oriented so its largest-magnitude entry is positive.
pub fn pca_2d(vectors: &[Array1<f64>]) -> Result<Projection> {
    if vectors.len() < 3 {
        return Err(Error::DegenerateData(format!("need at least 3 vectors, got {}", vectors.len())));
    }
    let dim = vectors[0].len();
    if dim < 2 {
        return Err(Error::DegenerateData("vectors need at least 2 dimensions".into()));
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimMismatch { expected: dim, found: v.len() });
    }
    let n = vectors.len();
    let mut mean = Array1::zeros(dim);
    for v in vectors {
        mean += v;
    }
    mean /= n as f64;
    let centered = DMatrix::from_fn(n, dim, |r, c| vectors[r][c] - mean[c]);
    let covariance = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eigen = SymmetricEigen::new(covariance);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));
    let top = eigen.eigenvalues[order[0]];
    if top.is_nan() || top <= 1e-14 {
        return Err(Error::DegenerateData("covariance has rank 0".into()));
    }

    let component = |idx: usize| -> Array1<f64> {
        let col = eigen.eigenvectors.column(idx);
        let mut v = Array1::from_iter(col.iter().copied());
        let pivot = v.iter().fold(0.0f64, |best, &x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        v
    };
    let components = [component(order[0]), component(order[1])];
    let coords = (0..n)
        .map(|r| {
            let row = Array1::from_iter(centered.row(r).iter().copied());
            [row.dot(&components[0]), row.dot(&components[1])]
        })
        .collect();
    Ok(Projection { coords, explained_variance: [top, eigen.eigenvalues[order[1]].max(0.0)], components, mean })
}

/// Mean silhouette coefficient of 2-D points under Euclidean distance.
/// Points in singleton groups score 0.
pub fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::LengthMismatch { tokens: points.len(), relevances: labels.len() });
    }
    let mut groups: Vec<usize> = labels.to_vec();
    groups.sort_unstable();
    groups.dedup();
    if groups.len() < 2 {
        return Err(Error::DegenerateData("silhouette needs at least two groups".into()));
    }
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let scores: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut sums = vec![0.0; groups.len()];
            let mut counts = vec![0usize; groups.len()];
            for j in 0..points.len() {
                if i == j {
                    continue;
                }
                let g = groups.binary_search(&labels[j]).unwrap();
                sums[g] += dist(points[i], points[j]);
                counts[g] += 1;
            }
            let own = groups.binary_search(&labels[i]).unwrap();
            if counts[own] == 0 {
                return 0.0;
            }
            let a = sums[own] / counts[own] as f64;
            let b = (0..groups.len())
                .filter(|&g| g != own && counts[g] > 0)
                .map(|g| sums[g] / counts[g] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
