//! Random subspace samplers concentrated around the principal subspace.
//!
//! Both samplers operate entirely in the r-dimensional coordinates of the
//! snapshot SVD: a draw factors as `W = V_r U_k` where `U_k` is the sampled
//! r-by-k frame. The bootstrap sampler resamples snapshot columns with
//! replacement; the Gaussian-scale sampler replaces the right factor with
//! independent normals scaled by the snapshot covariance. The concentration
//! parameter beta is the number of resampled columns; larger beta tightens
//! the draws around the deterministic subspace.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{principal_subspace, CompactSvd, SubspaceBasis};
use crate::scalar::{cast, Scalar};
use crate::{Matrix, Vector};

/// Which randomization generates the subspace draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Column resampling with replacement.
    Bootstrap,
    /// Independent Gaussians scaled by the snapshot covariance spectrum.
    Ppca,
}

impl SamplerKind {
    pub fn label(&self) -> &'static str {
        match self {
            SamplerKind::Bootstrap => "bootstrap",
            SamplerKind::Ppca => "ppca",
        }
    }
}

/// Fitted random-subspace model: the snapshot SVD plus the sampler
/// configuration.
#[derive(Debug, Clone)]
pub struct SubspaceModel<T: Scalar> {
    svd: CompactSvd<T>,
    snapshot_count: usize,
    subspace_dim: usize,
    concentration: usize,
    kind: SamplerKind,
}

impl<T: Scalar> SubspaceModel<T> {
    /// Builds a model around the compact SVD of the snapshot matrix.
    ///
    /// Requires `1 <= subspace_dim <= rank` and `concentration >=
    /// subspace_dim`, since fewer resampled columns than the subspace
    /// dimension could never reach rank k.
    pub fn new(
        svd: CompactSvd<T>,
        subspace_dim: usize,
        concentration: usize,
        kind: SamplerKind,
    ) -> Result<Self> {
        let rank = svd.rank();
        if subspace_dim == 0 {
            return Err(Error::invalid("subspace dimension must be positive"));
        }
        if subspace_dim > rank {
            return Err(Error::invalid(format!(
                "subspace dimension {subspace_dim} exceeds snapshot rank {rank}"
            )));
        }
        if concentration < subspace_dim {
            return Err(Error::invalid(format!(
                "concentration {concentration} is below subspace dimension {subspace_dim}"
            )));
        }
        let snapshot_count = svd.snapshot_count();
        Ok(Self {
            svd,
            snapshot_count,
            subspace_dim,
            concentration,
            kind,
        })
    }

    pub fn svd(&self) -> &CompactSvd<T> {
        &self.svd
    }

    /// Number of original snapshot columns m.
    pub fn snapshot_count(&self) -> usize {
        self.snapshot_count
    }

    /// Dimension k of the sampled subspaces.
    pub fn subspace_dim(&self) -> usize {
        self.subspace_dim
    }

    /// Number of resampled columns beta.
    pub fn concentration(&self) -> usize {
        self.concentration
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    /// Rank r of the snapshot SVD; every draw lives in these coordinates.
    pub fn reduced_rank(&self) -> usize {
        self.svd.rank()
    }

    /// Per-direction scales of the Gaussian model: singular value over
    /// sqrt(m), the square roots of the snapshot covariance eigenvalues.
    pub fn gaussian_scales(&self) -> Vector<T> {
        let inv_sqrt_m = T::one() / cast::<T>(self.snapshot_count as f64).sqrt();
        self.svd.singular_values() * inv_sqrt_m
    }

    /// Same model at a different concentration.
    pub fn with_concentration(&self, concentration: usize) -> Result<Self> {
        Self::new(
            self.svd.clone(),
            self.subspace_dim,
            concentration,
            self.kind,
        )
    }

    /// Serializable description of the fitted model.
    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            kind: self.kind.label().to_string(),
            state_dim: self.svd.state_dim(),
            reduced_rank: self.reduced_rank(),
            subspace_dim: self.subspace_dim,
            concentration: self.concentration,
            snapshot_count: self.snapshot_count,
            singular_values: self
                .svd
                .singular_values()
                .iter()
                .map(|&v| crate::scalar::to_f64(v))
                .collect(),
        }
    }
}

/// Serializable model description for manifests and reports.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelSummary {
    pub kind: String,
    pub state_dim: usize,
    pub reduced_rank: usize,
    pub subspace_dim: usize,
    pub concentration: usize,
    pub snapshot_count: usize,
    pub singular_values: Vec<f64>,
}

/// Zero-based snapshot column indices of one bootstrap resample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResampleIndices {
    indices: Vec<usize>,
}

impl ResampleIndices {
    pub fn new(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draws beta column indices uniformly with replacement.
pub fn draw_indices<T: Scalar>(model: &SubspaceModel<T>, rng: &mut impl Rng) -> ResampleIndices {
    let m = model.snapshot_count();
    let indices = (0..model.concentration())
        .map(|_| rng.random_range(0..m))
        .collect();
    ResampleIndices::new(indices)
}

/// Bootstrap subspace draw in reduced coordinates.
///
/// Consumes only r-sized objects: the singular values (length r) and the
/// right factor (m-by-r) of the snapshot SVD. The resampled matrix is
/// `M[i, j] = sigma_i * right[b_j, i]`, the principal subspace of which
/// equals that of the corresponding resampled snapshot columns because the
/// left factor is orthonormal. Nothing here touches the ambient dimension.
pub fn sample_bootstrap_reduced<T: Scalar>(
    singular_values: &Vector<T>,
    right: &Matrix<T>,
    subspace_dim: usize,
    indices: &ResampleIndices,
) -> Result<SubspaceBasis<T>> {
    let r = singular_values.len();
    if right.ncols() != r {
        return Err(Error::DimensionMismatch {
            context: "sample_bootstrap_reduced right factor",
            expected: r.to_string(),
            got: right.ncols().to_string(),
        });
    }
    if indices.is_empty() {
        return Err(Error::invalid("resample index list must be non-empty"));
    }
    let m = right.nrows();
    if let Some(&bad) = indices.as_slice().iter().find(|&&b| b >= m) {
        return Err(Error::invalid(format!(
            "resample index {bad} out of range for {m} snapshots"
        )));
    }
    let beta = indices.len();
    let resampled = Matrix::from_fn(r, beta, |i, j| {
        singular_values[i] * right[(indices.as_slice()[j], i)]
    });
    truncate_to_subspace(&resampled, subspace_dim)
}

/// Bootstrap subspace draw for a fitted model; see
/// [`sample_bootstrap_reduced`].
pub fn sample_bootstrap<T: Scalar>(
    model: &SubspaceModel<T>,
    indices: &ResampleIndices,
) -> Result<SubspaceBasis<T>> {
    if indices.len() != model.concentration() {
        return Err(Error::invalid(format!(
            "resample has {} indices, model concentration is {}",
            indices.len(),
            model.concentration()
        )));
    }
    sample_bootstrap_reduced(
        model.svd().singular_values(),
        model.svd().right(),
        model.subspace_dim(),
        indices,
    )
}

/// Gaussian-scale subspace draw in reduced coordinates.
///
/// The resampled matrix is `diag(scales) * Z` with `Z` an r-by-beta matrix
/// of independent standard normals. A draw without a usable singular value
/// gap is retried with fresh normals up to three times before erroring;
/// with a continuous distribution this is a roundoff safeguard only.
pub fn sample_ppca_reduced<T: Scalar>(
    scales: &Vector<T>,
    subspace_dim: usize,
    concentration: usize,
    rng: &mut impl Rng,
) -> Result<SubspaceBasis<T>>
where
    StandardNormal: Distribution<T>,
{
    if concentration == 0 {
        return Err(Error::invalid("concentration must be positive"));
    }
    let r = scales.len();
    let mut last_err = None;
    for _attempt in 0..4 {
        let resampled = Matrix::from_fn(r, concentration, |i, _| {
            let z: T = StandardNormal.sample(rng);
            scales[i] * z
        });
        match truncate_to_subspace(&resampled, subspace_dim) {
            Ok(basis) => return Ok(basis),
            Err(e @ Error::DegenerateResample(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop stored the degenerate error"))
}

/// Gaussian-scale subspace draw for a fitted model; see
/// [`sample_ppca_reduced`].
pub fn sample_ppca<T: Scalar>(
    model: &SubspaceModel<T>,
    rng: &mut impl Rng,
) -> Result<SubspaceBasis<T>>
where
    StandardNormal: Distribution<T>,
{
    sample_ppca_reduced(
        &model.gaussian_scales(),
        model.subspace_dim(),
        model.concentration(),
        rng,
    )
}

/// Lifts a reduced-coordinate draw to the ambient space: `W = V_r U_k`.
pub fn lift_to_ambient<T: Scalar>(
    model: &SubspaceModel<T>,
    reduced: &SubspaceBasis<T>,
) -> Result<SubspaceBasis<T>> {
    if reduced.ambient_dim() != model.reduced_rank() {
        return Err(Error::DimensionMismatch {
            context: "lift_to_ambient",
            expected: model.reduced_rank().to_string(),
            got: reduced.ambient_dim().to_string(),
        });
    }
    let lifted = model.svd().left() * reduced.matrix();
    Ok(SubspaceBasis::from_orthonormal_unchecked(lifted))
}

fn truncate_to_subspace<T: Scalar>(resampled: &Matrix<T>, k: usize) -> Result<SubspaceBasis<T>> {
    match principal_subspace(resampled, k) {
        Ok(basis) => Ok(basis),
        Err(Error::ZeroMatrix) => Err(Error::DegenerateResample(
            "resampled matrix is zero".to_string(),
        )),
        Err(Error::IllDefinedSubspace { gap, index }) => Err(Error::DegenerateResample(format!(
            "no usable singular value gap after index {index} (relative gap {gap:.3e})"
        ))),
        Err(e) => Err(e),
    }
}

/// Draws reduced-coordinate bases reproducibly: equal streams give equal
/// draws for a fixed sampler.
pub trait BasisSampler<T: Scalar>: Sync {
    fn sample_reduced(&self, stream: u64) -> Result<SubspaceBasis<T>>;
}

/// Sampler for a fitted [`SubspaceModel`], dispatching on its kind. Each
/// stream seeds an independent generator, so draws are reproducible and
/// order-free.
#[derive(Debug, Clone, Copy)]
pub struct ModelSampler<'a, T: Scalar> {
    model: &'a SubspaceModel<T>,
    seed: u64,
}

impl<'a, T: Scalar> ModelSampler<'a, T> {
    pub fn new(model: &'a SubspaceModel<T>, seed: u64) -> Self {
        Self { model, seed }
    }

    pub fn model(&self) -> &SubspaceModel<T> {
        self.model
    }
}

impl<T: Scalar> BasisSampler<T> for ModelSampler<'_, T>
where
    StandardNormal: Distribution<T>,
{
    fn sample_reduced(&self, stream: u64) -> Result<SubspaceBasis<T>> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        match self.model.kind() {
            SamplerKind::Bootstrap => {
                let indices = draw_indices(self.model, &mut rng);
                sample_bootstrap(self.model, &indices)
            }
            SamplerKind::Ppca => sample_ppca(self.model, &mut rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{center, compact_svd_default, largest_principal_angle};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seeded_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn fitted_model(
        n: usize,
        m: usize,
        k: usize,
        beta: usize,
        kind: SamplerKind,
    ) -> SubspaceModel<f64> {
        let snapshots = center(&seeded_matrix(n, m, 42)).unwrap();
        let svd = compact_svd_default(snapshots.data()).unwrap();
        SubspaceModel::new(svd, k, beta, kind).unwrap()
    }

    #[test]
    fn model_validates_dimensions() {
        let snapshots = center(&seeded_matrix(10, 6, 1)).unwrap();
        let svd = compact_svd_default(snapshots.data()).unwrap();
        let rank = svd.rank();
        assert!(SubspaceModel::new(svd.clone(), 0, 4, SamplerKind::Bootstrap).is_err());
        assert!(
            SubspaceModel::new(svd.clone(), rank + 1, rank + 1, SamplerKind::Bootstrap).is_err()
        );
        assert!(SubspaceModel::new(svd.clone(), 2, 1, SamplerKind::Bootstrap).is_err());
        assert!(SubspaceModel::new(svd, 2, 2, SamplerKind::Bootstrap).is_ok());
    }

    #[test]
    fn centered_snapshot_rank_drops_by_one() {
        // Centering removes one direction from a generic snapshot set.
        let snapshots = center(&seeded_matrix(10, 6, 2)).unwrap();
        let svd = compact_svd_default(snapshots.data()).unwrap();
        assert_eq!(svd.rank(), 5);
    }

    #[test]
    fn draw_indices_is_deterministic_and_in_range() {
        let model = fitted_model(10, 6, 2, 8, SamplerKind::Bootstrap);
        let mut rng_a = ChaCha8Rng::seed_from_u64(7);
        let mut rng_b = ChaCha8Rng::seed_from_u64(7);
        let a = draw_indices(&model, &mut rng_a);
        let b = draw_indices(&model, &mut rng_b);
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        assert!(a.as_slice().iter().all(|&i| i < 6));
    }

    #[test]
    fn draw_indices_covers_all_columns() {
        let model = fitted_model(10, 6, 2, 8, SamplerKind::Bootstrap);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 6];
        for _ in 0..2000 {
            for &i in draw_indices(&model, &mut rng).as_slice() {
                counts[i] += 1;
            }
        }
        // 16000 draws over 6 columns: each expects ~2667.
        for (i, &c) in counts.iter().enumerate() {
            assert!(c > 2200 && c < 3200, "column {i} drawn {c} times");
        }
    }

    #[test]
    fn bootstrap_draw_is_orthonormal_in_reduced_coordinates() {
        let model = fitted_model(12, 8, 2, 10, SamplerKind::Bootstrap);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let indices = draw_indices(&model, &mut rng);
        let basis = sample_bootstrap(&model, &indices).unwrap();
        assert_eq!(basis.ambient_dim(), model.reduced_rank());
        assert_eq!(basis.subspace_dim(), 2);
        assert!(crate::linalg::orthonormality_defect(basis.matrix()) < 1e-10);
    }

    #[test]
    fn bootstrap_rejects_constant_resample_at_k_two() {
        // Every index equal: the resampled matrix has rank one.
        let model = fitted_model(12, 8, 2, 10, SamplerKind::Bootstrap);
        let indices = ResampleIndices::new(vec![3; 10]);
        match sample_bootstrap(&model, &indices) {
            Err(Error::DegenerateResample(_)) => {}
            other => panic!("expected degenerate resample, got {other:?}"),
        }
    }

    #[test]
    fn bootstrap_full_rank_subspace_spans_everything() {
        // k equal to r: any non-degenerate draw spans all reduced coordinates.
        let snapshots = center(&seeded_matrix(12, 4, 9)).unwrap();
        let svd = compact_svd_default(snapshots.data()).unwrap();
        let r = svd.rank();
        let model = SubspaceModel::new(svd, r, 8, SamplerKind::Bootstrap).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let indices = draw_indices(&model, &mut rng);
        let basis = sample_bootstrap(&model, &indices).unwrap();
        let identity = SubspaceBasis::new(Matrix::identity(r, r)).unwrap();
        let angle = largest_principal_angle(&basis, &identity).unwrap();
        assert!(angle < 1e-10, "angle {angle}");
    }

    #[test]
    fn bootstrap_low_rank_route_matches_naive_column_resampling() {
        // Anti-drift check: the reduced-coordinate draw lifted to ambient
        // space must equal the principal subspace of the resampled snapshot
        // columns themselves.
        for seed in 0..50u64 {
            let raw = seeded_matrix(30, 12, 500 + seed);
            let snapshots = center(&raw).unwrap();
            let svd = compact_svd_default(snapshots.data()).unwrap();
            let k = 3;
            let beta = 9;
            let model = SubspaceModel::new(svd, k, beta, SamplerKind::Bootstrap).unwrap();

            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let indices = draw_indices(&model, &mut rng);
            let reduced = sample_bootstrap(&model, &indices).unwrap();
            let lifted = lift_to_ambient(&model, &reduced).unwrap();

            let naive_cols = Matrix::from_fn(30, beta, |i, j| {
                snapshots.data()[(i, indices.as_slice()[j])]
            });
            let naive = principal_subspace(&naive_cols, k).unwrap();

            let angle = largest_principal_angle(&lifted, &naive).unwrap();
            assert!(angle < 1e-8, "seed {seed}: angle {angle}");
        }
    }

    #[test]
    fn ppca_draw_is_orthonormal_and_deterministic() {
        let model = fitted_model(12, 8, 2, 16, SamplerKind::Ppca);
        let mut rng_a = ChaCha8Rng::seed_from_u64(13);
        let mut rng_b = ChaCha8Rng::seed_from_u64(13);
        let a = sample_ppca(&model, &mut rng_a).unwrap();
        let b = sample_ppca(&model, &mut rng_b).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert!(crate::linalg::orthonormality_defect(a.matrix()) < 1e-10);
        assert_eq!(a.ambient_dim(), model.reduced_rank());
    }

    #[test]
    fn gaussian_scales_divide_by_sqrt_snapshot_count() {
        let model = fitted_model(12, 9, 2, 16, SamplerKind::Ppca);
        let scales = model.gaussian_scales();
        let s = model.svd().singular_values();
        for i in 0..s.len() {
            approx::assert_relative_eq!(scales[i], s[i] / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn lift_preserves_zero_rows_exactly() {
        // Rows absent from every snapshot stay absent from every draw.
        let mut raw = seeded_matrix(14, 8, 77);
        for j in 0..8 {
            raw[(0, j)] = 0.0;
            raw[(13, j)] = 0.0;
        }
        let snapshots = center(&raw).unwrap();
        let svd = compact_svd_default(snapshots.data()).unwrap();
        let model = SubspaceModel::new(svd, 2, 12, SamplerKind::Bootstrap).unwrap();
        let sampler = ModelSampler::new(&model, 99);
        for stream in 0..20 {
            let lifted = lift_to_ambient(&model, &sampler.sample_reduced(stream).unwrap()).unwrap();
            for c in 0..2 {
                assert!(lifted.matrix()[(0, c)].abs() < 1e-12);
                assert!(lifted.matrix()[(13, c)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn model_sampler_streams_are_reproducible_and_distinct() {
        let model = fitted_model(12, 8, 2, 10, SamplerKind::Bootstrap);
        let sampler = ModelSampler::new(&model, 4);
        let a = sampler.sample_reduced(0).unwrap();
        let b = sampler.sample_reduced(0).unwrap();
        let c = sampler.sample_reduced(1).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn with_concentration_keeps_model_but_changes_beta() {
        let model = fitted_model(12, 8, 2, 10, SamplerKind::Ppca);
        let wider = model.with_concentration(40).unwrap();
        assert_eq!(wider.concentration(), 40);
        assert_eq!(wider.subspace_dim(), 2);
        assert!(model.with_concentration(1).is_err());
    }

    #[test]
    fn summary_round_trips_through_json() {
        let model = fitted_model(12, 8, 2, 10, SamplerKind::Ppca);
        let summary = model.summary();
        let text = serde_json::to_string(&summary).unwrap();
        let back: ModelSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(summary, back);
        assert_eq!(back.kind, "ppca");
        assert_eq!(back.reduced_rank, model.reduced_rank());
    }
}
