//! Ensembles of reduced solutions under random projection bases.
//!
//! Each draw samples a frame in the r snapshot coordinates, reduces the
//! stage-one operators with it, solves, and maps the result to the
//! requested quantities of interest. Draws are independent and identified
//! by generator streams, so the ensemble is reproducible regardless of
//! scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::SubspaceBasis;
use crate::rom::{two_stage_reduce, QoiQuantity, QoiSelector, TwoStageOperators};
use crate::sampling::{BasisSampler, ModelSampler, SubspaceModel};
use crate::scalar::Scalar;
use crate::solvers::{newmark_integrate, NewmarkConfig, Trajectory};
use crate::system::LinearSecondOrderSystem;
use crate::{Matrix, Vector};

/// Redraw attempts per draw before the draw is declared unusable.
pub const MAX_ATTEMPTS_PER_DRAW: usize = 8;

/// How each draw's reduced system is solved.
#[derive(Debug, Clone)]
pub enum SolverSpec<'a, T: Scalar> {
    /// Static solve against the system's constant load.
    Static,
    /// Newmark time integration from the given ambient initial state, or
    /// from rest when `initial` is `None`.
    Dynamic {
        config: &'a NewmarkConfig<T>,
        initial: Option<(&'a Vector<T>, &'a Vector<T>)>,
    },
}

/// One reduced solution and the sampling bookkeeping behind it.
#[derive(Debug, Clone)]
pub struct EnsembleDraw<T: Scalar> {
    /// Generator stream of the accepted draw.
    pub stream: u64,
    /// Degenerate frames discarded before this draw succeeded.
    pub redraws: usize,
    /// Accepted frame in the r snapshot coordinates.
    pub frame: SubspaceBasis<T>,
    /// Quantities of interest, one row per selector row and one column per
    /// time node (a single column for static solves).
    pub qoi: Matrix<T>,
}

/// Reproducibility record of an ensemble run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedManifest {
    pub base_seed: u64,
    pub n_draws: usize,
    pub sampler: String,
    pub state_dim: usize,
    pub reduced_rank: usize,
    pub subspace_dim: usize,
    pub concentration: usize,
    pub total_redraws: usize,
    /// Stream of each accepted draw, in draw order.
    pub streams: Vec<u64>,
}

impl SeedManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("seed manifest: {e}")))
    }
}

/// Ensemble of reduced solutions with its reproducibility manifest.
#[derive(Debug, Clone)]
pub struct SromEnsemble<T: Scalar> {
    pub draws: Vec<EnsembleDraw<T>>,
    pub manifest: SeedManifest,
}

impl<T: Scalar> SromEnsemble<T> {
    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    /// Ensemble values of one quantity at one time node, in draw order.
    pub fn sample_values(&self, row: usize, node: usize) -> Vec<T> {
        self.draws.iter().map(|d| d.qoi[(row, node)]).collect()
    }

    /// Writes the per-draw quantities as CSV, one line per draw and
    /// quantity row, nodes across the columns.
    pub fn write_qoi_csv<W: Write>(&self, mut w: W, labels: &[String]) -> Result<()> {
        let nodes = self.draws.first().map_or(0, |d| d.qoi.ncols());
        write!(w, "draw,quantity")?;
        for j in 0..nodes {
            write!(w, ",node_{j}")?;
        }
        writeln!(w)?;
        for (i, draw) in self.draws.iter().enumerate() {
            for (r, label) in labels.iter().enumerate() {
                write!(w, "{i},{label}")?;
                for j in 0..nodes {
                    write!(w, ",{}", crate::scalar::to_f64(draw.qoi[(r, j)]))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Builds an ensemble of reduced solutions for a fitted model.
///
/// Draw `i` uses generator streams `attempt * n_draws + i`, advancing
/// `attempt` past degenerate frames. The run aborts when more than a tenth
/// of the requested draws needed redraws, or any single draw stays
/// degenerate for [`MAX_ATTEMPTS_PER_DRAW`] attempts.
pub fn build_ensemble<T: Scalar + Send + Sync>(
    system: &LinearSecondOrderSystem<T>,
    model: &SubspaceModel<T>,
    seed: u64,
    n_draws: usize,
    solver: &SolverSpec<T>,
    selector: &QoiSelector,
) -> Result<SromEnsemble<T>>
where
    rand_distr::StandardNormal: rand_distr::Distribution<T>,
{
    let sampler = ModelSampler::new(model, seed);
    let operators = two_stage_reduce(system, model.svd())?;
    let draws = run_draws(system, operators, &sampler, n_draws, solver, selector)?;
    let total_redraws: usize = draws.iter().map(|d| d.redraws).sum();
    let manifest = SeedManifest {
        base_seed: seed,
        n_draws,
        sampler: model.kind().label().to_string(),
        state_dim: system.dim(),
        reduced_rank: model.reduced_rank(),
        subspace_dim: model.subspace_dim(),
        concentration: model.concentration(),
        total_redraws,
        streams: draws.iter().map(|d| d.stream).collect(),
    };
    Ok(SromEnsemble { draws, manifest })
}

/// Ensemble construction with an externally supplied sampler; used to
/// exercise the redraw accounting with deliberately failing samplers.
pub fn build_ensemble_with_sampler<T: Scalar + Send + Sync>(
    system: &LinearSecondOrderSystem<T>,
    operators: &TwoStageOperators<T>,
    sampler: &dyn BasisSampler<T>,
    n_draws: usize,
    solver: &SolverSpec<T>,
    selector: &QoiSelector,
) -> Result<Vec<EnsembleDraw<T>>> {
    run_draws(
        system,
        operators.clone(),
        sampler,
        n_draws,
        solver,
        selector,
    )
}

fn run_draws<T: Scalar + Send + Sync>(
    system: &LinearSecondOrderSystem<T>,
    operators: TwoStageOperators<T>,
    sampler: &dyn BasisSampler<T>,
    n_draws: usize,
    solver: &SolverSpec<T>,
    selector: &QoiSelector,
) -> Result<Vec<EnsembleDraw<T>>> {
    if n_draws == 0 {
        return Err(Error::invalid("ensemble needs at least one draw"));
    }
    selector.validate(system.dim())?;
    if matches!(solver, SolverSpec::Static) && selector.needs_time_derivatives() {
        return Err(Error::invalid("static solves produce displacements only"));
    }

    // Initial state projected once into the r snapshot coordinates; each
    // draw then restricts it to its own frame.
    let stage_initial = match solver {
        SolverSpec::Dynamic {
            initial: Some((d0, v0)),
            ..
        } => {
            if d0.len() != system.dim() || v0.len() != system.dim() {
                return Err(Error::DimensionMismatch {
                    context: "ensemble initial state",
                    expected: system.dim().to_string(),
                    got: format!("{}, {}", d0.len(), v0.len()),
                });
            }
            let lt = operators.left().transpose();
            Some((&lt * *d0, &lt * *v0))
        }
        _ => None,
    };

    let draws: Result<Vec<EnsembleDraw<T>>> = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut last_degenerate = String::new();
            for attempt in 0..MAX_ATTEMPTS_PER_DRAW {
                let stream = (attempt as u64) * (n_draws as u64) + i as u64;
                match sampler.sample_reduced(stream) {
                    Ok(frame) => {
                        let qoi = solve_draw(
                            &operators,
                            &frame,
                            solver,
                            selector,
                            stage_initial.as_ref(),
                        )?;
                        return Ok(EnsembleDraw {
                            stream,
                            redraws: attempt,
                            frame,
                            qoi,
                        });
                    }
                    Err(Error::DegenerateResample(msg)) => last_degenerate = msg,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::DegenerateResample(format!(
                "draw {i} stayed degenerate for {MAX_ATTEMPTS_PER_DRAW} attempts: {last_degenerate}"
            )))
        })
        .collect();
    let draws = draws?;

    let total_redraws: usize = draws.iter().map(|d| d.redraws).sum();
    let limit = n_draws / 10;
    if total_redraws > limit {
        return Err(Error::TooManyDegenerate {
            redraws: total_redraws,
            draws: n_draws,
            limit,
        });
    }
    Ok(draws)
}

fn solve_draw<T: Scalar>(
    operators: &TwoStageOperators<T>,
    frame: &SubspaceBasis<T>,
    solver: &SolverSpec<T>,
    selector: &QoiSelector,
    stage_initial: Option<&(Vector<T>, Vector<T>)>,
) -> Result<Matrix<T>> {
    let reduced = operators.reduce(frame)?;
    match solver {
        SolverSpec::Static => {
            let coords = reduced.solve_static()?;
            extract_static(operators, frame, &coords, selector)
        }
        SolverSpec::Dynamic { config, initial: _ } => {
            let reduced_system = reduced.to_system()?;
            let (q0, qv0) = match stage_initial {
                Some((d_r, v_r)) => (
                    frame.matrix().transpose() * d_r,
                    frame.matrix().transpose() * v_r,
                ),
                None => (
                    Vector::zeros(frame.subspace_dim()),
                    Vector::zeros(frame.subspace_dim()),
                ),
            };
            let trajectory = newmark_integrate(&reduced_system, config, &q0, &qv0)?;
            extract_series(operators, frame, &trajectory, selector)
        }
    }
}

fn extract_static<T: Scalar>(
    operators: &TwoStageOperators<T>,
    frame: &SubspaceBasis<T>,
    coords: &Vector<T>,
    selector: &QoiSelector,
) -> Result<Matrix<T>> {
    match selector {
        QoiSelector::FullDisplacement => {
            let lifted = operators.lift(frame)?;
            let x = lifted.matrix() * coords;
            Ok(Matrix::from_column_slice(x.len(), 1, x.as_slice()))
        }
        QoiSelector::Rows(rows) => {
            let dofs: Vec<usize> = rows.iter().map(|&(_, d)| d).collect();
            let map = operators.row_map(frame, &dofs)?;
            let x = map * coords;
            Ok(Matrix::from_column_slice(x.len(), 1, x.as_slice()))
        }
    }
}

fn extract_series<T: Scalar>(
    operators: &TwoStageOperators<T>,
    frame: &SubspaceBasis<T>,
    trajectory: &Trajectory<T>,
    selector: &QoiSelector,
) -> Result<Matrix<T>> {
    let nodes = trajectory.node_count();
    match selector {
        QoiSelector::FullDisplacement => {
            let lifted = operators.lift(frame)?;
            Ok(lifted.matrix() * &trajectory.displacement)
        }
        QoiSelector::Rows(rows) => {
            let dofs: Vec<usize> = rows.iter().map(|&(_, d)| d).collect();
            let map = operators.row_map(frame, &dofs)?;
            let mut out = Matrix::zeros(rows.len(), nodes);
            for (i, &(quantity, _)) in rows.iter().enumerate() {
                let field = match quantity {
                    QoiQuantity::Displacement => &trajectory.displacement,
                    QoiQuantity::Velocity => &trajectory.velocity,
                    QoiQuantity::Acceleration => &trajectory.acceleration,
                };
                for j in 0..nodes {
                    let mut acc = T::zero();
                    for c in 0..map.ncols() {
                        acc += map[(i, c)] * field[(c, j)];
                    }
                    out[(i, j)] = acc;
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{center, compact_svd_default};
    use crate::sampling::SamplerKind;
    use crate::system::{ConstraintSet, Forcing};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn seeded_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn random_spd(n: usize, seed: u64) -> Matrix<f64> {
        let a = seeded_matrix(n, n, seed);
        &a * a.transpose() + Matrix::identity(n, n) * 0.5
    }

    fn static_fixture(
        n: usize,
        m: usize,
    ) -> (LinearSecondOrderSystem<f64>, crate::linalg::CompactSvd<f64>) {
        let k = random_spd(n, 1);
        let force = seeded_matrix(n, 1, 2).column(0).clone_owned();
        let system =
            LinearSecondOrderSystem::new_static(k, force, ConstraintSet::Unconstrained).unwrap();
        let snapshots = center(&seeded_matrix(n, m, 3)).unwrap();
        let svd = compact_svd_default(snapshots.data()).unwrap();
        (system, svd)
    }

    struct FixedFrameSampler {
        frame: SubspaceBasis<f64>,
    }

    impl BasisSampler<f64> for FixedFrameSampler {
        fn sample_reduced(&self, _stream: u64) -> Result<SubspaceBasis<f64>> {
            Ok(self.frame.clone())
        }
    }

    struct FlakySampler {
        frame: SubspaceBasis<f64>,
        fail_below: u64,
    }

    impl BasisSampler<f64> for FlakySampler {
        fn sample_reduced(&self, stream: u64) -> Result<SubspaceBasis<f64>> {
            if stream < self.fail_below {
                Err(Error::DegenerateResample("forced".to_string()))
            } else {
                Ok(self.frame.clone())
            }
        }
    }

    struct AlwaysDegenerate;

    impl BasisSampler<f64> for AlwaysDegenerate {
        fn sample_reduced(&self, _stream: u64) -> Result<SubspaceBasis<f64>> {
            Err(Error::DegenerateResample("forced".to_string()))
        }
    }

    fn first_frame(svd: &crate::linalg::CompactSvd<f64>, k: usize) -> SubspaceBasis<f64> {
        SubspaceBasis::new(Matrix::identity(svd.rank(), k)).unwrap()
    }

    #[test]
    fn static_ensemble_is_deterministic_in_the_seed() {
        let (system, svd) = static_fixture(12, 6);
        let model = crate::sampling::SubspaceModel::new(svd, 2, 8, SamplerKind::Bootstrap).unwrap();
        let selector = QoiSelector::FullDisplacement;
        let a = build_ensemble(&system, &model, 7, 20, &SolverSpec::Static, &selector).unwrap();
        let b = build_ensemble(&system, &model, 7, 20, &SolverSpec::Static, &selector).unwrap();
        let c = build_ensemble(&system, &model, 8, 20, &SolverSpec::Static, &selector).unwrap();

        assert_eq!(a.n_draws(), 20);
        assert_eq!(a.draws[0].qoi.shape(), (12, 1));
        for (da, db) in a.draws.iter().zip(b.draws.iter()) {
            assert_eq!(da.qoi, db.qoi);
            assert_eq!(da.stream, db.stream);
        }
        let differs = a
            .draws
            .iter()
            .zip(c.draws.iter())
            .any(|(da, dc)| da.qoi != dc.qoi);
        assert!(differs, "changing the seed should change the ensemble");

        assert_eq!(a.manifest.sampler, "bootstrap");
        assert_eq!(a.manifest.n_draws, 20);
        assert_eq!(a.manifest.subspace_dim, 2);
        assert_eq!(a.manifest.concentration, 8);
        assert_eq!(a.manifest.streams.len(), 20);
        let round = SeedManifest::from_json(&a.manifest.to_json()).unwrap();
        assert_eq!(round.streams, a.manifest.streams);
    }

    #[test]
    fn full_rank_frames_give_identical_solutions() {
        // A Galerkin solution depends only on the span of the basis, so
        // with k equal to r every draw must reproduce the same result.
        let (system, svd) = static_fixture(10, 5);
        let r = svd.rank();
        let model = crate::sampling::SubspaceModel::new(svd, r, 4 * r, SamplerKind::Ppca).unwrap();
        let ensemble = build_ensemble(
            &system,
            &model,
            11,
            12,
            &SolverSpec::Static,
            &QoiSelector::FullDisplacement,
        )
        .unwrap();
        let reference = &ensemble.draws[0].qoi;
        for draw in &ensemble.draws[1..] {
            assert!((&draw.qoi - reference).amax() < 1e-9);
        }
    }

    #[test]
    fn dynamic_ensemble_produces_finite_series() {
        let n = 8;
        let system = LinearSecondOrderSystem::new(
            Matrix::identity(n, n),
            random_spd(n, 20) * 0.001,
            random_spd(n, 21),
            Forcing::Constant(seeded_matrix(n, 1, 22).column(0).clone_owned()),
            ConstraintSet::Unconstrained,
        )
        .unwrap();
        let snapshots = center(&seeded_matrix(n, 6, 23)).unwrap();
        let svd = compact_svd_default(snapshots.data()).unwrap();
        let model = crate::sampling::SubspaceModel::new(svd, 2, 6, SamplerKind::Bootstrap).unwrap();
        let config = NewmarkConfig::average_acceleration(0.01, 40);
        let selector = QoiSelector::Rows(vec![
            (QoiQuantity::Displacement, 3),
            (QoiQuantity::Velocity, 5),
            (QoiQuantity::Acceleration, 0),
        ]);
        let solver = SolverSpec::Dynamic {
            config: &config,
            initial: None,
        };
        let ensemble = build_ensemble(&system, &model, 3, 10, &solver, &selector).unwrap();
        assert_eq!(ensemble.draws[0].qoi.shape(), (3, 41));
        for draw in &ensemble.draws {
            assert!(draw.qoi.iter().all(|v| v.is_finite()));
        }

        let mut csv = Vec::new();
        ensemble
            .write_qoi_csv(&mut csv, &selector.labels(n))
            .unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("draw,quantity,node_0"));
        assert_eq!(text.lines().count(), 1 + 10 * 3);
    }

    #[test]
    fn initial_state_in_snapshot_span_is_reproduced_at_t_zero() {
        let n = 9;
        let system = LinearSecondOrderSystem::new(
            Matrix::identity(n, n),
            Matrix::zeros(n, n),
            random_spd(n, 30),
            Forcing::Constant(Vector::zeros(n)),
            ConstraintSet::Unconstrained,
        )
        .unwrap();
        let snapshots = center(&seeded_matrix(n, 7, 31)).unwrap();
        let svd = compact_svd_default(snapshots.data()).unwrap();
        let r = svd.rank();
        let d0 = svd.left() * seeded_matrix(r, 1, 32).column(0).clone_owned();
        let v0 = Vector::zeros(n);
        let model = crate::sampling::SubspaceModel::new(svd, r, 4 * r, SamplerKind::Ppca).unwrap();
        let config = NewmarkConfig::average_acceleration(0.01, 5);
        let solver = SolverSpec::Dynamic {
            config: &config,
            initial: Some((&d0, &v0)),
        };
        let ensemble = build_ensemble(
            &system,
            &model,
            5,
            6,
            &solver,
            &QoiSelector::FullDisplacement,
        )
        .unwrap();
        for draw in &ensemble.draws {
            let err = (draw.qoi.column(0) - &d0).amax();
            assert!(err < 1e-10, "initial reconstruction error {err}");
        }
    }

    #[test]
    fn redraw_accounting_and_abort_threshold() {
        let (system, svd) = static_fixture(10, 5);
        let ops = two_stage_reduce(&system, &svd).unwrap();
        let frame = first_frame(&svd, 2);
        let selector = QoiSelector::FullDisplacement;

        // One degenerate first attempt out of ten draws: under the limit.
        let flaky = FlakySampler {
            frame: frame.clone(),
            fail_below: 1,
        };
        let draws =
            build_ensemble_with_sampler(&system, &ops, &flaky, 10, &SolverSpec::Static, &selector)
                .unwrap();
        assert_eq!(draws[0].redraws, 1);
        assert_eq!(draws[0].stream, 10);
        assert!(draws[1..].iter().all(|d| d.redraws == 0));

        // Two degenerate draws out of ten crosses the ten percent limit.
        let flaky = FlakySampler {
            frame: frame.clone(),
            fail_below: 2,
        };
        let err =
            build_ensemble_with_sampler(&system, &ops, &flaky, 10, &SolverSpec::Static, &selector)
                .unwrap_err();
        assert!(matches!(
            err,
            Error::TooManyDegenerate {
                redraws: 2,
                draws: 10,
                limit: 1
            }
        ));

        // A draw that never converges errors out with the attempt count.
        let err = build_ensemble_with_sampler(
            &system,
            &ops,
            &AlwaysDegenerate,
            4,
            &SolverSpec::Static,
            &selector,
        )
        .unwrap_err();
        match err {
            Error::DegenerateResample(msg) => assert!(msg.contains("attempts")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn static_solver_rejects_derivative_quantities() {
        let (system, svd) = static_fixture(10, 5);
        let model = crate::sampling::SubspaceModel::new(svd, 2, 6, SamplerKind::Bootstrap).unwrap();
        let selector = QoiSelector::Rows(vec![(QoiQuantity::Velocity, 1)]);
        let err =
            build_ensemble(&system, &model, 1, 5, &SolverSpec::Static, &selector).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn monitored_rows_match_full_reconstruction() {
        let (system, svd) = static_fixture(14, 7);
        let ops = two_stage_reduce(&system, &svd).unwrap();
        let frame = first_frame(&svd, 3);
        let sampler = FixedFrameSampler { frame };
        let full = build_ensemble_with_sampler(
            &system,
            &ops,
            &sampler,
            1,
            &SolverSpec::Static,
            &QoiSelector::FullDisplacement,
        )
        .unwrap();
        let rows = build_ensemble_with_sampler(
            &system,
            &ops,
            &sampler,
            1,
            &SolverSpec::Static,
            &QoiSelector::Rows(vec![
                (QoiQuantity::Displacement, 0),
                (QoiQuantity::Displacement, 13),
            ]),
        )
        .unwrap();
        assert!((rows[0].qoi[(0, 0)] - full[0].qoi[(0, 0)]).abs() < 1e-13);
        assert!((rows[0].qoi[(1, 0)] - full[0].qoi[(13, 0)]).abs() < 1e-13);
    }
}
