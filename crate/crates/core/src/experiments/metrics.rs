//! Evaluation metrics for fitted DAGs.

use crate::error::{Error, Result};
use crate::model::{CovarianceMatrix, DagModel};
use crate::representation::gram_schmidt_representation;
use crate::search::FitResult;

/// `‖B̂ − B̃₀(π̂)‖_F² + ‖Ω̂ − Ω̃₀(π̂)‖_F²`, the target being the representation
/// of the population covariance under the fitted ordering.
pub fn frobenius_error(fit: &FitResult, sigma0: &CovarianceMatrix) -> Result<f64> {
    if fit.model.p() != sigma0.p() {
        return Err(Error::Dimension(format!(
            "fit has {} nodes, covariance has {}",
            fit.model.p(),
            sigma0.p()
        )));
    }
    let target = gram_schmidt_representation(sigma0, &fit.pi_hat, 0.0)?;
    Ok(squared_distance(&fit.model, &target))
}

/// `‖B₁ − B₂‖_F² + ‖Ω₁ − Ω₂‖²`.
pub fn squared_distance(a: &DagModel, b: &DagModel) -> f64 {
    (a.b() - b.b()).norm_squared() + (a.omega() - b.omega()).norm_squared()
}

/// `‖B₁ − B₂‖_F²`.
pub fn weight_distance(a: &DagModel, b: &DagModel) -> f64 {
    (a.b() - b.b()).norm_squared()
}

pub fn support_matches(a: &DagModel, b: &DagModel) -> bool {
    a.p() == b.p() && a.support() == b.support()
}

/// Precision and recall of the estimated edge set against the true one.
pub fn support_precision_recall(estimate: &DagModel, truth: &DagModel) -> (f64, f64) {
    let est = estimate.support();
    let tru = truth.support();
    let hits = est.iter().filter(|e| tru.contains(e)).count() as f64;
    let precision = if est.is_empty() {
        1.0
    } else {
        hits / est.len() as f64
    };
    let recall = if tru.is_empty() {
        1.0
    } else {
        hits / tru.len() as f64
    };
    (precision, recall)
}
