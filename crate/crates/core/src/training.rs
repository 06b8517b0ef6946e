//! Concentration training for subspace samplers.
//!
//! The concentration parameter is chosen so the spread of the random
//! reduced solutions matches the reduction error actually observed on
//! training cases: the objective is the squared mismatch between the
//! sampled distance to the reference solution and the observed one,
//! averaged over cases and Monte Carlo replicates. All candidate
//! concentrations are evaluated on common random streams, which removes
//! sampling noise from their comparison.

use rayon::prelude::*;
use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::{cast, to_f64, Scalar};
use crate::Vector;

/// Multiplier decorrelating the replicate streams of different seeds.
pub const STREAM_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// Generator stream of one Monte Carlo replicate.
pub fn replicate_stream(seed: u64, replicate: usize) -> u64 {
    seed.wrapping_mul(STREAM_MIX).wrapping_add(replicate as u64)
}

/// Root-sum-square distance between two output series. With a step the
/// sum approximates the continuous squared-error integral; without one it
/// is the plain Euclidean distance.
pub fn series_distance<T: Scalar>(a: &Vector<T>, b: &Vector<T>, step: Option<T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "series_distance",
            expected: a.len().to_string(),
            got: b.len().to_string(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("distance of empty series"));
    }
    let weight = match step {
        Some(h) => {
            if h <= T::zero() {
                return Err(Error::invalid("series step must be positive"));
            }
            h
        }
        None => T::one(),
    };
    let mut sum = T::zero();
    for i in 0..a.len() {
        let d = a[i] - b[i];
        sum += d * d;
    }
    Ok((sum * weight).sqrt())
}

/// Training cases: per-case reference outputs and the observed distance of
/// the truth from each reference.
#[derive(Debug, Clone)]
pub struct TrainingSet<T: Scalar> {
    reference: Vec<Vector<T>>,
    observed: Vec<T>,
    step: Option<T>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(truth: &[Vector<T>], reference: Vec<Vector<T>>, step: Option<T>) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::invalid("training set needs at least one case"));
        }
        if truth.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                context: "training set cases",
                expected: truth.len().to_string(),
                got: reference.len().to_string(),
            });
        }
        let mut observed = Vec::with_capacity(truth.len());
        for (t, r) in truth.iter().zip(reference.iter()) {
            observed.push(series_distance(t, r, step)?);
        }
        Ok(Self {
            reference,
            observed,
            step,
        })
    }

    pub fn case_count(&self) -> usize {
        self.reference.len()
    }

    /// Observed distance of the truth from the reference, per case.
    pub fn observed(&self) -> &[T] {
        &self.observed
    }

    pub fn reference(&self) -> &[Vector<T>] {
        &self.reference
    }

    pub fn step(&self) -> Option<T> {
        self.step
    }
}

/// Produces random reduced outputs for the training cases. One call
/// yields one draw per case; equal streams must give equal outputs.
pub trait SromPipeline<T: Scalar>: Sync {
    fn case_count(&self) -> usize;
    fn draw_outputs(&self, concentration: usize, stream: u64) -> Result<Vec<Vector<T>>>;
}

/// Monte Carlo estimate of the training objective at one concentration.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveEstimate<T: Scalar> {
    pub mean: T,
    pub se: T,
    pub n_mc: usize,
}

/// Estimates the objective at one concentration with `n_mc` replicates.
/// Replicate `j` uses stream [`replicate_stream`]`(seed, j)`, so repeated
/// calls and calls at other concentrations share their randomness.
pub fn estimate_objective<T: Scalar + Send + Sync>(
    pipeline: &dyn SromPipeline<T>,
    training: &TrainingSet<T>,
    concentration: usize,
    n_mc: usize,
    seed: u64,
) -> Result<ObjectiveEstimate<T>> {
    if n_mc < 2 {
        return Err(Error::invalid(
            "objective estimation needs at least two replicates",
        ));
    }
    if pipeline.case_count() != training.case_count() {
        return Err(Error::DimensionMismatch {
            context: "pipeline cases",
            expected: training.case_count().to_string(),
            got: pipeline.case_count().to_string(),
        });
    }
    let replicates: Result<Vec<T>> = (0..n_mc)
        .into_par_iter()
        .map(|j| {
            let outputs = pipeline.draw_outputs(concentration, replicate_stream(seed, j))?;
            if outputs.len() != training.case_count() {
                return Err(Error::DimensionMismatch {
                    context: "pipeline draw outputs",
                    expected: training.case_count().to_string(),
                    got: outputs.len().to_string(),
                });
            }
            let mut acc = T::zero();
            for (c, out) in outputs.iter().enumerate() {
                let sampled = series_distance(out, &training.reference[c], training.step)?;
                let mismatch = sampled - training.observed[c];
                acc += mismatch * mismatch;
            }
            let y = acc / cast(training.case_count() as f64);
            if !y.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite objective replicate at concentration {concentration}"
                )));
            }
            Ok(y)
        })
        .collect();
    let replicates = replicates?;

    let n = cast::<T>(n_mc as f64);
    let mean = replicates.iter().fold(T::zero(), |a, &y| a + y) / n;
    let var = replicates
        .iter()
        .fold(T::zero(), |a, &y| a + (y - mean) * (y - mean))
        / (n - T::one());
    let se = (var / n).sqrt();
    Ok(ObjectiveEstimate { mean, se, n_mc })
}

/// One evaluated candidate in a concentration search.
#[derive(Debug, Clone, Copy)]
pub struct TraceEntry<T: Scalar> {
    pub concentration: usize,
    pub estimate: ObjectiveEstimate<T>,
    pub seconds: f64,
}

/// Outcome of a concentration search.
#[derive(Debug, Clone)]
pub struct TrainingResult<T: Scalar> {
    pub best_concentration: usize,
    pub best: ObjectiveEstimate<T>,
    /// Every evaluated concentration with its estimate, ascending.
    pub trace: Vec<TraceEntry<T>>,
}

impl<T: Scalar> TrainingResult<T> {
    /// Writes the evaluation trace as CSV with a leading comment line.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# objective: squared mismatch between sampled and observed \
             distances to the reference, averaged over cases"
        )?;
        writeln!(
            w,
            "concentration,objective,standard_error,replicates,seconds"
        )?;
        for entry in &self.trace {
            writeln!(
                w,
                "{},{},{},{},{:.6}",
                entry.concentration,
                to_f64(entry.estimate.mean),
                to_f64(entry.estimate.se),
                entry.estimate.n_mc,
                entry.seconds
            )?;
        }
        Ok(())
    }
}

/// Searches the integer range `[min_concentration, max_concentration]`
/// for the concentration minimizing the training objective.
///
/// A geometric coarse grid brackets the minimum, golden-section narrows
/// the bracket to a handful of integers, and the remainder is evaluated
/// exhaustively. The final choice scans every evaluated candidate in
/// ascending order and moves only on an improvement exceeding one
/// combined standard error, so noise-level differences resolve to the
/// smallest concentration.
pub fn optimize_concentration<T: Scalar + Send + Sync>(
    pipeline: &dyn SromPipeline<T>,
    training: &TrainingSet<T>,
    min_concentration: usize,
    max_concentration: usize,
    n_mc: usize,
    seed: u64,
) -> Result<TrainingResult<T>> {
    if min_concentration == 0 {
        return Err(Error::invalid("concentration must be positive"));
    }
    if max_concentration < min_concentration {
        return Err(Error::invalid(format!(
            "empty concentration range [{min_concentration}, {max_concentration}]"
        )));
    }

    let mut cache: BTreeMap<usize, (ObjectiveEstimate<T>, f64)> = BTreeMap::new();
    let eval = |c: usize, cache: &mut BTreeMap<usize, (ObjectiveEstimate<T>, f64)>| -> Result<T> {
        if let Some((est, _)) = cache.get(&c) {
            return Ok(est.mean);
        }
        let start = std::time::Instant::now();
        let est = estimate_objective(pipeline, training, c, n_mc, seed)?;
        cache.insert(c, (est, start.elapsed().as_secs_f64()));
        Ok(est.mean)
    };

    // Coarse geometric grid, always including both endpoints.
    let mut grid = vec![min_concentration];
    let three_halves = min_concentration + min_concentration.div_ceil(2);
    if three_halves < max_concentration {
        grid.push(three_halves);
    }
    let mut c = min_concentration.saturating_mul(2);
    while c < max_concentration {
        grid.push(c);
        c = c.saturating_mul(2);
    }
    grid.push(max_concentration);
    grid.dedup();

    for &c in &grid {
        eval(c, &mut cache)?;
    }

    // Bracket the grid minimizer with its neighbors.
    let (argmin_pos, _) = grid
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let fa = cache[*a].0.mean;
            let fb = cache[*b].0.mean;
            fa.partial_cmp(&fb).expect("finite objectives")
        })
        .expect("non-empty grid");
    let mut lo = if argmin_pos == 0 {
        grid[0]
    } else {
        grid[argmin_pos - 1]
    };
    let mut hi = if argmin_pos + 1 == grid.len() {
        grid[argmin_pos]
    } else {
        grid[argmin_pos + 1]
    };

    // Golden-section on integers until the bracket is small.
    while hi - lo > 4 {
        let step = (((hi - lo) as f64) * 0.381_966).round().max(1.0) as usize;
        let x1 = lo + step;
        let x2 = hi - step;
        if x1 >= x2 {
            break;
        }
        let f1 = eval(x1, &mut cache)?;
        let f2 = eval(x2, &mut cache)?;
        if f1 <= f2 {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    for c in lo..=hi {
        eval(c, &mut cache)?;
    }

    // Ascending incumbent scan with a one-standard-error improvement rule.
    let mut entries = cache.iter();
    let (&first_c, (first_est, _)) = entries.next().expect("at least one candidate");
    let mut best_c = first_c;
    let mut best = *first_est;
    for (&c, (est, _)) in entries {
        let combined = (best.se * best.se + est.se * est.se).sqrt();
        if est.mean < best.mean - combined {
            best_c = c;
            best = *est;
        }
    }
    if !best.mean.is_finite() {
        return Err(Error::NoViableCandidate);
    }

    Ok(TrainingResult {
        best_concentration: best_c,
        best,
        trace: cache
            .into_iter()
            .map(|(concentration, (estimate, seconds))| TraceEntry {
                concentration,
                estimate,
                seconds,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pipeline whose sampled distance from the reference is an exact
    /// function of the concentration: output = reference + g(c) * e_0.
    struct Synthetic {
        reference: Vec<Vector<f64>>,
        g: fn(usize) -> f64,
    }

    impl SromPipeline<f64> for Synthetic {
        fn case_count(&self) -> usize {
            self.reference.len()
        }

        fn draw_outputs(&self, concentration: usize, _stream: u64) -> Result<Vec<Vector<f64>>> {
            Ok(self
                .reference
                .iter()
                .map(|r| {
                    let mut out = r.clone();
                    out[0] += (self.g)(concentration);
                    out
                })
                .collect())
        }
    }

    fn flat_training(
        cases: usize,
        dim: usize,
        offset: f64,
    ) -> (Vec<Vector<f64>>, Vec<Vector<f64>>) {
        let reference: Vec<Vector<f64>> = (0..cases)
            .map(|c| Vector::from_fn(dim, |i, _| (c * dim + i) as f64 * 0.1))
            .collect();
        let truth: Vec<Vector<f64>> = reference
            .iter()
            .map(|r| {
                let mut t = r.clone();
                t[0] += offset;
                t
            })
            .collect();
        (truth, reference)
    }

    #[test]
    fn distance_matches_hand_computation() {
        let a = Vector::from_row_slice(&[1.0, 2.0, 3.0]);
        let b = Vector::from_row_slice(&[0.0, 4.0, 3.0]);
        let plain = series_distance(&a, &b, None).unwrap();
        assert!((plain - 5.0f64.sqrt()).abs() < 1e-15);
        let stepped = series_distance(&a, &b, Some(0.25)).unwrap();
        assert!((stepped - (5.0f64 * 0.25).sqrt()).abs() < 1e-15);
        assert!(series_distance(&a, &b, Some(0.0)).is_err());
        let short = Vector::from_row_slice(&[1.0]);
        assert!(series_distance(&a, &short, None).is_err());
    }

    #[test]
    fn objective_is_exact_for_deterministic_pipelines() {
        let (truth, reference) = flat_training(3, 4, 1.0);
        let training = TrainingSet::new(&truth, reference.clone(), None).unwrap();
        assert!(training.observed().iter().all(|&d| (d - 1.0).abs() < 1e-15));

        let pipeline = Synthetic {
            reference,
            g: |_| 2.5,
        };
        let est = estimate_objective(&pipeline, &training, 5, 8, 7).unwrap();
        // Sampled distance 2.5 vs observed 1.0 in every case and replicate.
        assert!((est.mean - 2.25).abs() < 1e-12, "mean {}", est.mean);
        assert!(est.se.abs() < 1e-12);
    }

    #[test]
    fn search_refines_to_an_off_grid_minimum() {
        let (truth, reference) = flat_training(2, 3, 1.0);
        let training = TrainingSet::new(&truth, reference.clone(), None).unwrap();
        // Sampled distance 1 at c = 12 exactly, growing quadratically away
        // from it; the coarse grid does not contain 12.
        let pipeline = Synthetic {
            reference,
            g: |c| 1.0 + ((c as f64) - 12.0).powi(2) / 50.0,
        };
        let result = optimize_concentration(&pipeline, &training, 4, 64, 2, 1).unwrap();
        assert_eq!(result.best_concentration, 12);
        assert!(result.best.mean.abs() < 1e-15);
        let evaluated: Vec<usize> = result.trace.iter().map(|e| e.concentration).collect();
        assert!(evaluated.contains(&4) && evaluated.contains(&64));
        assert!(evaluated.windows(2).all(|w| w[0] < w[1]), "trace sorted");
    }

    #[test]
    fn flat_objective_resolves_to_the_smallest_concentration() {
        let (truth, reference) = flat_training(2, 3, 1.0);
        let training = TrainingSet::new(&truth, reference.clone(), None).unwrap();
        let pipeline = Synthetic {
            reference,
            g: |_| 1.7,
        };
        let result = optimize_concentration(&pipeline, &training, 3, 40, 2, 9).unwrap();
        assert_eq!(result.best_concentration, 3);
    }

    #[test]
    fn endpoint_minimum_is_found() {
        let (truth, reference) = flat_training(2, 3, 1.0);
        let training = TrainingSet::new(&truth, reference.clone(), None).unwrap();
        // Monotone decreasing mismatch: minimum sits at the upper end.
        let pipeline = Synthetic {
            reference,
            g: |c| 1.0 + 10.0 / (c as f64),
        };
        let result = optimize_concentration(&pipeline, &training, 2, 30, 2, 3).unwrap();
        assert_eq!(result.best_concentration, 30);
    }

    #[test]
    fn trace_csv_has_comment_and_header() {
        let (truth, reference) = flat_training(1, 2, 0.5);
        let training = TrainingSet::new(&truth, reference.clone(), None).unwrap();
        let pipeline = Synthetic {
            reference,
            g: |_| 1.0,
        };
        let result = optimize_concentration(&pipeline, &training, 2, 6, 2, 1).unwrap();
        let mut buf = Vec::new();
        result.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with('#'));
        assert_eq!(
            lines.next().unwrap(),
            "concentration,objective,standard_error,replicates,seconds"
        );
        assert!(lines.count() >= 2);
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let (truth, reference) = flat_training(1, 2, 0.5);
        let training = TrainingSet::new(&truth, reference.clone(), None).unwrap();
        let pipeline = Synthetic {
            reference,
            g: |_| 1.0,
        };
        assert!(optimize_concentration(&pipeline, &training, 0, 5, 2, 1).is_err());
        assert!(optimize_concentration(&pipeline, &training, 6, 5, 2, 1).is_err());
        assert!(estimate_objective(&pipeline, &training, 4, 1, 1).is_err());
    }

    #[test]
    fn common_streams_make_estimates_reproducible() {
        let (truth, reference) = flat_training(2, 3, 1.0);
        let training = TrainingSet::new(&truth, reference.clone(), None).unwrap();
        let pipeline = Synthetic {
            reference,
            g: |c| c as f64,
        };
        let a = estimate_objective(&pipeline, &training, 7, 16, 42).unwrap();
        let b = estimate_objective(&pipeline, &training, 7, 16, 42).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.se, b.se);
        assert_ne!(replicate_stream(1, 0), replicate_stream(2, 0));
        assert_ne!(replicate_stream(1, 0), replicate_stream(1, 1));
    }
}
