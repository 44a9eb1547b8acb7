//! 1-nearest-neighbor classifier, the comparison interpolating method.
//!
//! Brute-force Euclidean scan; distance ties break toward the lowest stored
//! index. Brute force is exact and fast enough at desk scale.

use thiserror::Error;

use crate::population::{Label, TrainingSet};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training set must be non-empty")]
    EmptyTrainingSet,
}

#[derive(Debug, Clone)]
pub struct NearestNeighbor {
    features: Vec<f64>,
    labels: Vec<Label>,
    dimension: usize,
}

/// Store `t` verbatim.
pub fn fit_1nn(t: &TrainingSet) -> Result<NearestNeighbor, BaselineError> {
    if t.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    let mut features = Vec::with_capacity(t.len() * t.dimension());
    for i in 0..t.len() {
        features.extend_from_slice(t.point(i));
    }
    Ok(NearestNeighbor {
        features,
        labels: t.labels().to_vec(),
        dimension: t.dimension(),
    })
}

impl NearestNeighbor {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Label of the Euclidean-nearest stored point.
    pub fn predict(&self, x: &[f64]) -> Label {
        assert_eq!(
            x.len(),
            self.dimension,
            "point has dimension {}, model expects {}",
            x.len(),
            self.dimension
        );
        let d = self.dimension;
        let mut best = f64::INFINITY;
        let mut best_label = 1;
        for (i, chunk) in self.features.chunks_exact(d).enumerate() {
            let mut dist = 0.0;
            for (a, b) in chunk.iter().zip(x) {
                let diff = a - b;
                dist += diff * diff;
            }
            // Strict `<` keeps the earliest index on exact ties.
            if dist < best {
                best = dist;
                best_label = self.labels[i];
            }
        }
        best_label
    }
}
