//! Brute-force k-nearest-neighbour classifier over [`FeatureVector`]s.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::features::FeatureVector;
use crate::taxonomy::SurfaceClass;

#[derive(Debug, Clone, PartialEq)]
pub enum KnnError {
    EmptyTrainingSet,
    InvalidK(usize),
    MixedDescriptors { expected: String, found: String },
    LengthMismatch { expected: usize, found: usize },
}

impl fmt::Display for KnnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KnnError::EmptyTrainingSet => f.write_str("training set is empty"),
            KnnError::InvalidK(k) => write!(f, "k must be at least 1, got {k}"),
            KnnError::MixedDescriptors { expected, found } => {
                write!(f, "descriptor {found:?} does not match {expected:?}")
            }
            KnnError::LengthMismatch { expected, found } => {
                write!(f, "feature length {found} does not match {expected}")
            }
        }
    }
}

impl core::error::Error for KnnError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: SurfaceClass,
    /// Share of the k votes won by `class`.
    pub confidence: f64,
}

/// Immutable after training; share freely across threads.
///
/// Prediction takes the majority class among the `k` nearest references by
/// Euclidean distance. Tied vote counts go to the class whose closest member
/// is nearer, then to the class earlier in canonical order. Use an odd `k`
/// to make vote ties rarer; even values are accepted.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    k: usize,
    descriptor_id: String,
    references: Vec<(FeatureVector, SurfaceClass)>,
}

impl KnnClassifier {
    pub fn train(
        training: Vec<(FeatureVector, SurfaceClass)>,
        k: usize,
    ) -> Result<Self, KnnError> {
        if k == 0 {
            return Err(KnnError::InvalidK(k));
        }
        let (first, _) = training.first().ok_or(KnnError::EmptyTrainingSet)?;
        let descriptor_id = first.descriptor_id.clone();
        let len = first.len();
        for (v, _) in &training {
            if v.descriptor_id != descriptor_id {
                return Err(KnnError::MixedDescriptors {
                    expected: descriptor_id,
                    found: v.descriptor_id.clone(),
                });
            }
            if v.len() != len {
                return Err(KnnError::LengthMismatch {
                    expected: len,
                    found: v.len(),
                });
            }
        }
        Ok(KnnClassifier {
            k,
            descriptor_id,
            references: training,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn descriptor_id(&self) -> &str {
        &self.descriptor_id
    }

    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }

    pub fn predict(&self, query: &FeatureVector) -> Result<Prediction, KnnError> {
        if query.descriptor_id != self.descriptor_id {
            return Err(KnnError::MixedDescriptors {
                expected: self.descriptor_id.clone(),
                found: query.descriptor_id.clone(),
            });
        }
        let expected = self.references[0].0.len();
        if query.len() != expected {
            return Err(KnnError::LengthMismatch {
                expected,
                found: query.len(),
            });
        }

        let mut scored: Vec<(f64, usize)> = self
            .references
            .iter()
            .enumerate()
            .map(|(i, (v, _))| (v.squared_distance(query), i))
            .collect();
        let k = self.k.min(scored.len());
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_distance);
            scored.truncate(k);
        }
        scored.sort_by(by_distance);

        let mut votes = [0usize; SurfaceClass::COUNT];
        let mut nearest = [f64::INFINITY; SurfaceClass::COUNT];
        for &(d, i) in &scored {
            let c = self.references[i].1.index();
            votes[c] += 1;
            if d < nearest[c] {
                nearest[c] = d;
            }
        }
        let winner = SurfaceClass::ALL
            .into_iter()
            .filter(|c| votes[c.index()] > 0)
            .min_by(|a, b| {
                votes[b.index()]
                    .cmp(&votes[a.index()])
                    .then(nearest[a.index()].total_cmp(&nearest[b.index()]))
                    .then(a.cmp(b))
            })
            .expect("k >= 1 neighbours");
        Ok(Prediction {
            class: winner,
            confidence: votes[winner.index()] as f64 / k as f64,
        })
    }
}

/// Per-dimension z-scoring fitted on a training set. Dimensions that are
/// constant in training are only centred.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a, I>(vectors: I) -> Result<Self, KnnError>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        for v in vectors {
            if n == 0 {
                sum = alloc::vec![0.0; v.len()];
                sum_sq = alloc::vec![0.0; v.len()];
            } else if v.len() != sum.len() {
                return Err(KnnError::LengthMismatch {
                    expected: sum.len(),
                    found: v.len(),
                });
            }
            for (i, x) in v.values.iter().enumerate() {
                sum[i] += x;
                sum_sq[i] += x * x;
            }
            n += 1;
        }
        if n == 0 {
            return Err(KnnError::EmptyTrainingSet);
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let inv_std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let var = (sq / nf - m * m).max(0.0);
                if var > 1e-18 { 1.0 / libm::sqrt(var) } else { 1.0 }
            })
            .collect();
        Ok(Standardizer { mean, inv_std })
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector, KnnError> {
        if v.len() != self.mean.len() {
            return Err(KnnError::LengthMismatch {
                expected: self.mean.len(),
                found: v.len(),
            });
        }
        let values = v
            .values
            .iter()
            .zip(self.mean.iter().zip(&self.inv_std))
            .map(|(x, (m, s))| (x - m) * s)
            .collect();
        Ok(FeatureVector::new(values, v.descriptor_id.clone()))
    }
}
