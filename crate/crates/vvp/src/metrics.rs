//! Prediction-error metrics and k-fold cross-validation scoring.
//!
//! Per-step RMSE compares a forecast against the velocities that actually
//! followed; ARMSE averages those over a run. The k-fold score is the fitness
//! the swarm optimizer minimizes: the training columns are split into k
//! seeded folds and each fold is predicted from the other k−1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grnn::{self, GrnnParams, TrainingSet};

/// One prediction step's error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepError {
    pub step: u64,
    pub rmse: f64,
}

/// One cross-validation fold's held-out error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldScore {
    pub fold_index: usize,
    pub rmse: f64,
}

/// Root mean squared error between a forecast and the realized velocities.
///
/// ```
/// use vvp::metrics::rmse;
///
/// assert!((rmse(&[1.0, 2.0], &[3.0, 2.0]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
/// ```
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidInput("rmse over empty sequences".into()));
    }
    let mse = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / predicted.len() as f64;
    Ok(mse.sqrt())
}

/// Average RMSE over a run's prediction steps.
pub fn armse(step_errors: &[StepError]) -> Result<f64> {
    if step_errors.is_empty() {
        return Err(Error::InvalidInput("armse over an empty run".into()));
    }
    Ok(step_errors.iter().map(|e| e.rmse).sum::<f64>() / step_errors.len() as f64)
}

/// Seeded partition of `m` column indices into `k` disjoint folds whose
/// sizes differ by at most one.
///
/// ```
/// use vvp::metrics::kfold_partition;
///
/// let folds = kfold_partition(23, 5, 7).unwrap();
/// assert_eq!(folds.len(), 5);
/// let total: usize = folds.iter().map(Vec::len).sum();
/// assert_eq!(total, 23);            // covering
/// assert!(folds.iter().all(|f| f.len() == 4 || f.len() == 5)); // balanced
/// ```
pub fn kfold_partition(m: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k = {k}, need k >= 2")));
    }
    if m < k {
        return Err(Error::InsufficientData { have: m, need: k });
    }
    let mut indices: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let base = m / k;
    let extra = m % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        folds.push(indices[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Per-fold held-out RMSEs for `training` under `params`.
///
/// Fold errors are computed in the normalized velocity space the network
/// operates in; the reported end-result RMSE (in m/s) lives in the replay
/// layer instead.
pub fn kfold_scores(
    training: &TrainingSet,
    params: &GrnnParams,
    k: usize,
    seed: u64,
) -> Result<Vec<FoldScore>> {
    let folds = kfold_partition(training.len(), k, seed)?;
    let mut scores = Vec::with_capacity(k);
    for (fold_index, fold) in folds.iter().enumerate() {
        let train_indices: Vec<usize> = (0..training.len())
            .filter(|i| !fold.contains(i))
            .collect();
        let model = training.subset(&train_indices);
        let mut sum = 0.0;
        for &i in fold {
            let predicted = grnn::predict(training.pattern(i), &model, params.sigma)?;
            sum += rmse(&predicted, training.target(i))?;
        }
        scores.push(FoldScore {
            fold_index: fold_index + 1,
            rmse: sum / fold.len() as f64,
        });
    }
    Ok(scores)
}

/// The cross-validation score E: the mean of the k fold RMSEs. This is the
/// swarm optimizer's fitness function.
pub fn kfold_score(
    training: &TrainingSet,
    params: &GrnnParams,
    k: usize,
    seed: u64,
) -> Result<f64> {
    let scores = kfold_scores(training, params, k, seed)?;
    Ok(scores.iter().map(|s| s.rmse).sum::<f64>() / scores.len() as f64)
}
