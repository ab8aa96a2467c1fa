//! Closed-form reference decoder: ridge regression from conditioning frames
//! to target mel frames.
//!
//! This deliberately is not a neural vocoder stand-in with training dynamics;
//! it is the cheapest decoder whose objective moves monotonically when the
//! conditioning gets more informative, which is what the ablation and
//! benchmark tooling need. The normal equations are solved by a hand-rolled
//! Cholesky factorization, so fits are deterministic for identical input.

use ndarray::{Array1, Array2, Axis};

use crate::conditioning::Condition;
use crate::error::{Error, Result};
use crate::feature_store::FeatureSequence;

/// Matched (condition, target) sequences for fitting.
#[derive(Debug, Clone)]
pub struct PairedDataset {
    pairs: Vec<(Condition, FeatureSequence)>,
}

impl PairedDataset {
    pub fn new(pairs: Vec<(Condition, FeatureSequence)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("dataset needs at least one pair"));
        }
        let d = pairs[0].0.dim();
        let m = pairs[0].1.dim();
        for (i, (cond, target)) in pairs.iter().enumerate() {
            if cond.n_frames() != target.n_frames() {
                return Err(Error::dims(
                    format!("{} target frames in pair {i}", cond.n_frames()),
                    format!("{}", target.n_frames()),
                ));
            }
            if cond.dim() != d {
                return Err(Error::dims(
                    format!("condition dim {d} in pair {i}"),
                    format!("{}", cond.dim()),
                ));
            }
            if target.dim() != m {
                return Err(Error::dims(
                    format!("target dim {m} in pair {i}"),
                    format!("{}", target.dim()),
                ));
            }
        }
        Ok(PairedDataset { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.pairs[0].0.dim()
    }

    pub fn target_dim(&self) -> usize {
        self.pairs[0].1.dim()
    }

    pub fn total_frames(&self) -> usize {
        self.pairs.iter().map(|(c, _)| c.n_frames()).sum()
    }

    pub fn pairs(&self) -> &[(Condition, FeatureSequence)] {
        &self.pairs
    }
}

/// Fitted decoder: mel = condition * matrix + bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderWeights {
    matrix: Array2<f64>,
    bias: Array1<f64>,
    lambda: f64,
}

impl DecoderWeights {
    pub fn new(matrix: Array2<f64>, bias: Array1<f64>, lambda: f64) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::invalid("empty decoder matrix"));
        }
        if bias.len() != matrix.ncols() {
            return Err(Error::dims(
                format!("bias of length {}", matrix.ncols()),
                format!("{}", bias.len()),
            ));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid("lambda must be non-negative"));
        }
        if matrix.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite decoder weight"));
        }
        Ok(DecoderWeights { matrix, bias, lambda })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    /// Absolute ridge strength the fit used.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn to_feature(&self) -> FeatureSequence {
        let d = self.dim();
        let mut rows = Array2::zeros((d + 1, self.target_dim()));
        rows.slice_mut(ndarray::s![..d, ..]).assign(&self.matrix);
        rows.row_mut(d).assign(&self.bias);
        FeatureSequence::new(rows, 1.0, "decoder:ridge").expect("weights are finite")
    }

    /// The container stores only matrix and bias; the ridge strength is a
    /// fit-time parameter and comes back as 0.
    pub fn from_feature(seq: &FeatureSequence) -> Result<Self> {
        if seq.source_tag() != "decoder:ridge" {
            return Err(Error::format(format!(
                "expected decoder weights, found tag {:?}",
                seq.source_tag()
            )));
        }
        if seq.n_frames() < 2 {
            return Err(Error::format("decoder needs at least one weight row plus bias"));
        }
        let d = seq.n_frames() - 1;
        let matrix = seq.data().slice(ndarray::s![..d, ..]).to_owned();
        let bias = seq.data().row(d).to_owned();
        DecoderWeights::new(matrix, bias, 0.0)
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Returns None when a pivot falls below the noise floor, which is how
/// rank-deficient normal equations (e.g. more dims than frames at lambda 0)
/// show up.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mean_diag = a.diag().sum() / n as f64;
    let tol = mean_diag.abs().max(f64::MIN_POSITIVE) * 1e-13;
    let mut l: Array2<f64> = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > tol) {
                    return None;
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves L L^T x = b for one right-hand side.
fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

enum Ridge {
    Absolute(f64),
    Relative(f64),
}

fn fit_inner(data: &PairedDataset, ridge: Ridge) -> Result<DecoderWeights> {
    let d = data.dim();
    let m = data.target_dim();
    let n = data.total_frames();

    let mut x = Array2::zeros((n, d));
    let mut y = Array2::zeros((n, m));
    let mut row = 0;
    for (cond, target) in data.pairs() {
        for t in 0..cond.n_frames() {
            x.row_mut(row).assign(&cond.data().row(t));
            y.row_mut(row).assign(&target.data().row(t));
            row += 1;
        }
    }

    let x_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let y_mean = y.mean_axis(Axis(0)).expect("n > 0");
    let xc = &x - &x_mean;
    let yc = &y - &y_mean;

    let gram = xc.t().dot(&xc);
    let lambda = match ridge {
        Ridge::Absolute(l) => l,
        Ridge::Relative(rel) => {
            if !(rel.is_finite() && rel >= 0.0) {
                return Err(Error::invalid("relative lambda must be non-negative"));
            }
            rel * gram.diag().sum() / d as f64
        }
    };
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid("lambda must be non-negative"));
    }

    let mut a = gram;
    for i in 0..d {
        a[[i, i]] += lambda;
    }
    let l = cholesky(&a).ok_or_else(|| {
        Error::SingularSystem(format!(
            "normal equations are rank-deficient ({n} frames, {d} dims, lambda {lambda:.3e}); \
             add data or increase lambda"
        ))
    })?;

    let rhs = xc.t().dot(&yc);
    let mut w = Array2::zeros((d, m));
    for j in 0..m {
        let col = rhs.column(j).to_owned();
        w.column_mut(j).assign(&cholesky_solve(&l, &col));
    }
    let bias = &y_mean - &x_mean.dot(&w);
    DecoderWeights::new(w, bias, lambda)
}

/// Minimizes sum ||X W + b - Y||^2 + lambda ||W||^2 in closed form
/// (mean-centered normal equations; the bias is not penalized).
pub fn fit_ridge(data: &PairedDataset, lambda: f64) -> Result<DecoderWeights> {
    fit_inner(data, Ridge::Absolute(lambda))
}

/// Same fit with lambda expressed relative to mean(diag(Gram)), which makes
/// one config value usable across feature scales.
pub fn fit_ridge_relative(data: &PairedDataset, lambda_rel: f64) -> Result<DecoderWeights> {
    fit_inner(data, Ridge::Relative(lambda_rel))
}

/// Applies the decoder to a condition stream, yielding mel frames on the
/// same grid.
pub fn decode(cond: &Condition, w: &DecoderWeights) -> Result<FeatureSequence> {
    if cond.dim() != w.dim() {
        return Err(Error::dims(
            format!("{} condition dims", w.dim()),
            format!("{}", cond.dim()),
        ));
    }
    let out = cond.data().dot(&w.matrix) + &w.bias;
    FeatureSequence::new(out, cond.frame_rate(), "mel:decoded")
}

/// The fitted objective: residual sum of squares plus lambda ||W||^2,
/// accumulated in a fixed order so repeated evaluation is bit-identical.
pub fn regularized_objective(w: &DecoderWeights, data: &PairedDataset) -> Result<f64> {
    if data.dim() != w.dim() || data.target_dim() != w.target_dim() {
        return Err(Error::dims(
            format!("{} -> {} decoder", data.dim(), data.target_dim()),
            format!("{} -> {}", w.dim(), w.target_dim()),
        ));
    }
    let mut rss = 0.0;
    for (cond, target) in data.pairs() {
        let pred = cond.data().dot(&w.matrix) + &w.bias;
        let diff = &pred - target.data();
        for v in diff.iter() {
            rss += v * v;
        }
    }
    let mut penalty = 0.0;
    for v in w.matrix.iter() {
        penalty += v * v;
    }
    Ok(rss + w.lambda * penalty)
}
