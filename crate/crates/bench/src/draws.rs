//! Sampling and band-assembly helpers shared by the two benchmarks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srom::ensemble::EnsembleDraw;
use srom::linalg::{CompactSvd, SubspaceBasis};
use srom::metrics::{empirical_band, PredictionBand};
use srom::sampling::{sample_bootstrap_reduced, sample_ppca_reduced, ResampleIndices, SamplerKind};
use srom::training::STREAM_MIX;
use srom::{Error, Matrix64, Vector64};

/// Attempts before a persistently degenerate training draw propagates.
const MAX_ATTEMPTS: usize = 8;

/// Stream-addressed frame sampler for the training stage: equal
/// `(concentration, stream)` pairs give equal frames, and all
/// concentrations share the randomness of a stream, so objective curves
/// are compared under common random numbers.
pub struct TrainingSampler<'a> {
    svd: &'a CompactSvd<f64>,
    kind: SamplerKind,
    subspace_dim: usize,
    seed: u64,
    scales: Vector64,
}

impl<'a> TrainingSampler<'a> {
    pub fn new(
        svd: &'a CompactSvd<f64>,
        kind: SamplerKind,
        subspace_dim: usize,
        seed: u64,
    ) -> Self {
        let inv_sqrt_m = 1.0 / (svd.snapshot_count() as f64).sqrt();
        let scales = svd.singular_values() * inv_sqrt_m;
        Self {
            svd,
            kind,
            subspace_dim,
            seed,
            scales,
        }
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    /// One frame in the r snapshot coordinates. A degenerate resample is
    /// retried on a shifted stream a few times; discrete bootstrap draws
    /// at small concentrations can momentarily lack the rank for the
    /// subspace dimension.
    pub fn draw_frame(
        &self,
        concentration: usize,
        stream: u64,
    ) -> srom::Result<SubspaceBasis<f64>> {
        let mut last = None;
        for attempt in 0..MAX_ATTEMPTS {
            let shifted = stream.wrapping_add((attempt as u64).wrapping_mul(STREAM_MIX));
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(shifted);
            let drawn = match self.kind {
                SamplerKind::Bootstrap => {
                    let m = self.svd.snapshot_count();
                    let indices = ResampleIndices::new(
                        (0..concentration).map(|_| rng.random_range(0..m)).collect(),
                    );
                    sample_bootstrap_reduced(
                        self.svd.singular_values(),
                        self.svd.right(),
                        self.subspace_dim,
                        &indices,
                    )
                }
                SamplerKind::Ppca => {
                    sample_ppca_reduced(&self.scales, self.subspace_dim, concentration, &mut rng)
                }
            };
            match drawn {
                Ok(frame) => return Ok(frame),
                Err(e @ Error::DegenerateResample(_)) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("loop stored the degenerate error"))
    }
}

/// Ensemble values of one quantity row as a draws-by-nodes matrix, the
/// layout the band estimator consumes.
pub fn samples_matrix(draws: &[EnsembleDraw<f64>], row: usize) -> Matrix64 {
    let nodes = draws.first().map_or(0, |d| d.qoi.ncols());
    DMatrix::from_fn(draws.len(), nodes, |d, j| draws[d].qoi[(row, j)])
}

/// Per-row prediction bands of an ensemble.
pub fn band_per_row(
    draws: &[EnsembleDraw<f64>],
    rows: usize,
    level: f64,
) -> srom::Result<Vec<PredictionBand<f64>>> {
    (0..rows)
        .map(|r| empirical_band(&samples_matrix(draws, r), level))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};
    use srom::linalg::{center, compact_svd_default, largest_principal_angle};

    fn small_svd(seed: u64) -> CompactSvd<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(12, 9, |_, _| StandardNormal.sample(&mut rng));
        compact_svd_default(center(&raw).unwrap().data()).unwrap()
    }

    #[test]
    fn frames_are_reproducible_per_stream() {
        let svd = small_svd(3);
        for kind in [SamplerKind::Bootstrap, SamplerKind::Ppca] {
            let sampler = TrainingSampler::new(&svd, kind, 2, 11);
            let a = sampler.draw_frame(6, 4).unwrap();
            let b = sampler.draw_frame(6, 4).unwrap();
            assert_eq!(a.matrix(), b.matrix());
            let c = sampler.draw_frame(6, 5).unwrap();
            let angle = largest_principal_angle(&a, &c).unwrap();
            assert!(angle > 1e-6, "distinct streams gave the same frame");
        }
    }

    #[test]
    fn degenerate_bootstrap_draws_are_retried() {
        // Subspace dimension 2 with a single resampled column can never
        // reach rank 2; concentration 2 draws duplicate columns often
        // enough that retries must kick in across many streams.
        // Without retries roughly one stream in nine would fail here (a
        // duplicated pair); with them a failure needs eight duplicates in
        // a row, so every stream must produce a frame.
        let svd = small_svd(4);
        let sampler = TrainingSampler::new(&svd, SamplerKind::Bootstrap, 2, 7);
        let produced = (0..200)
            .filter(|&stream| sampler.draw_frame(2, stream).is_ok())
            .count();
        assert_eq!(produced, 200);
    }

    #[test]
    fn sample_layout_matches_draw_storage() {
        let draws = vec![
            EnsembleDraw {
                stream: 0,
                redraws: 0,
                frame: SubspaceBasis::new(DMatrix::identity(2, 1)).unwrap(),
                qoi: DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            },
            EnsembleDraw {
                stream: 1,
                redraws: 0,
                frame: SubspaceBasis::new(DMatrix::identity(2, 1)).unwrap(),
                qoi: DMatrix::from_row_slice(2, 3, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]),
            },
        ];
        let m = samples_matrix(&draws, 1);
        assert_eq!(m.nrows(), 2);
        assert_eq!(m[(0, 0)], 4.0);
        assert_eq!(m[(1, 2)], 12.0);
        let bands = band_per_row(&draws, 2, 0.5).unwrap();
        assert_eq!(bands.len(), 2);
        assert_eq!(bands[0].len(), 3);
    }
}
