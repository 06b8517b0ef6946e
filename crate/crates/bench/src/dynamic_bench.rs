//! Transient benchmark on a free-floating spring-mass chain: one heavy
//! node takes a half-sine impulse, the wave runs down the chain under
//! stiffness-proportional damping, and monitored nodes report
//! displacement, velocity, and acceleration histories. This is a desk
//! scale synthetic analogue of an impact on a large structure; every
//! report it produces is labeled as such.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use srom::ensemble::{build_ensemble, SeedManifest, SolverSpec};
use srom::linalg::{compact_svd_default, CompactSvd, SnapshotMatrix, SubspaceBasis};
use srom::metrics::{average_width, coverage, width_ratio, PredictionBand};
use srom::rom::{
    reconstruct_series, two_stage_reduce, QoiQuantity, QoiSelector, TwoStageOperators,
};
use srom::sampling::{SamplerKind, SubspaceModel};
use srom::solvers::{newmark_integrate, rayleigh_damping, NewmarkConfig, Trajectory};
use srom::system::{ConstraintSet, Forcing, LinearSecondOrderSystem};
use srom::training::{optimize_concentration, SromPipeline, TrainingResult, TrainingSet};
use srom::{Error, Matrix64, Vector64};

use crate::config::DynamicConfig;
use crate::draws::{band_per_row, TrainingSampler};
use crate::Result;

/// Reported rows, in order: displacement, velocity, and acceleration at
/// the monitored node, then velocity at the extra node.
pub const QOI_ROWS: usize = 4;
pub const ROW_DISPLACEMENT: usize = 0;
pub const ROW_VELOCITY: usize = 1;
pub const ROW_ACCELERATION: usize = 2;
pub const ROW_EXTRA_VELOCITY: usize = 3;

/// Diagonal mass of the chain: unit masses with one heavy node.
pub fn chain_mass(n: usize, heavy_dof: usize, heavy_ratio: f64) -> Matrix64 {
    let mut m = DMatrix::identity(n, n);
    m[(heavy_dof, heavy_dof)] = heavy_ratio;
    m
}

/// Tridiagonal stiffness of an unanchored chain of identical springs.
/// Row sums vanish exactly, so the uniform translation is a rigid-body
/// mode and the matrix is singular.
pub fn chain_stiffness(n: usize, spring: f64) -> Matrix64 {
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        k[(i, i)] += spring;
        k[(i + 1, i + 1)] += spring;
        k[(i, i + 1)] -= spring;
        k[(i + 1, i)] -= spring;
    }
    k
}

/// Half-sine impulse at one node: `amplitude * sin(pi t / duration)` for
/// `t` inside the pulse, zero after.
pub fn impulse_forcing(config: &DynamicConfig) -> srom::Result<Forcing<f64>> {
    let p = &config.problem;
    let n = p.dofs;
    let dof = p.heavy_dof;
    let amplitude = p.impulse_amplitude;
    let duration = p.impulse_duration;
    Forcing::from_time_fn(n, p.steps, p.dt, |t| {
        let mut f = DVector::zeros(n);
        if t <= duration {
            f[dof] = amplitude * (PI * t / duration).sin();
        }
        f
    })
}

/// Assembled transient benchmark: chain system, reference trajectory,
/// snapshot factorization, stage-one operators, and the deterministic
/// reduced solution on the reported rows.
pub struct DynamicAssembly {
    pub config: DynamicConfig,
    pub system: LinearSecondOrderSystem<f64>,
    pub newmark: NewmarkConfig<f64>,
    pub truth: Trajectory<f64>,
    pub svd: CompactSvd<f64>,
    pub operators: TwoStageOperators<f64>,
    pub selector: QoiSelector,
    /// Reference histories on the reported rows, one row per quantity.
    pub truth_qoi: Matrix64,
    /// Deterministic reduced-model histories on the same rows.
    pub rom_qoi: Matrix64,
}

impl DynamicAssembly {
    pub fn build(config: DynamicConfig) -> Result<Self> {
        config.validate()?;
        let p = &config.problem;
        let n = p.dofs;
        let k = p.subspace_dim;

        let mass = chain_mass(n, p.heavy_dof, p.heavy_mass_ratio);
        let stiffness = chain_stiffness(n, p.spring_stiffness);
        let damping = rayleigh_damping(&stiffness, p.rayleigh_beta);
        let force = impulse_forcing(&config)?;
        let system = LinearSecondOrderSystem::new(
            mass,
            damping,
            stiffness,
            force,
            ConstraintSet::Unconstrained,
        )?;

        let newmark = NewmarkConfig::average_acceleration(p.dt, p.steps);
        let rest = DVector::zeros(n);
        let truth = newmark_integrate(&system, &newmark, &rest, &rest)?;

        let n_snapshots = p.steps / p.snapshot_stride + 1;
        let raw = DMatrix::from_fn(n, n_snapshots, |i, j| {
            truth.displacement[(i, j * p.snapshot_stride)]
        });
        let snapshots = SnapshotMatrix::from_raw(raw)?;
        let svd = compact_svd_default(snapshots.data())?;
        if k > svd.rank() {
            return Err(Error::invalid(format!(
                "subspace dimension {k} exceeds the snapshot rank {}",
                svd.rank()
            ))
            .into());
        }

        let operators = two_stage_reduce(&system, &svd)?;
        let selector = QoiSelector::Rows(vec![
            (QoiQuantity::Displacement, p.monitored_dof),
            (QoiQuantity::Velocity, p.monitored_dof),
            (QoiQuantity::Acceleration, p.monitored_dof),
            (QoiQuantity::Velocity, p.extra_dof),
        ]);

        let truth_qoi = ambient_series(&truth, &selector)?;

        let r = svd.rank();
        let frame = SubspaceBasis::new(DMatrix::identity(r, k))?;
        let reduced = operators.reduce(&frame)?.to_system()?;
        let rest_k = DVector::zeros(k);
        let rom_trajectory = newmark_integrate(&reduced, &newmark, &rest_k, &rest_k)?;
        let lifted = operators.lift(&frame)?;
        let rom_qoi = reconstruct_series(&lifted, &rom_trajectory, &selector)?;

        Ok(Self {
            config,
            system,
            newmark,
            truth,
            svd,
            operators,
            selector,
            truth_qoi,
            rom_qoi,
        })
    }

    /// Row labels in report order.
    pub fn qoi_labels(&self) -> Vec<String> {
        self.selector.labels(self.system.dim())
    }

    /// Training case: the velocity history at the monitored node, truth
    /// against the deterministic reduced model, weighted by the step so
    /// distances approximate continuous-time norms.
    pub fn training_set(&self) -> srom::Result<TrainingSet<f64>> {
        let truth_vel = self.truth_qoi.row(ROW_VELOCITY).transpose();
        let rom_vel = self.rom_qoi.row(ROW_VELOCITY).transpose();
        TrainingSet::new(&[truth_vel], vec![rom_vel], Some(self.config.problem.dt))
    }

    pub fn pipeline(&self, kind: SamplerKind) -> DynamicPipeline<'_> {
        DynamicPipeline {
            assembly: self,
            kind,
            monitored: vec![self.config.problem.monitored_dof],
        }
    }
}

/// Gathers the selector rows directly from an ambient trajectory.
fn ambient_series(trajectory: &Trajectory<f64>, selector: &QoiSelector) -> srom::Result<Matrix64> {
    let QoiSelector::Rows(rows) = selector else {
        return Err(Error::invalid("ambient series needs explicit rows"));
    };
    let nodes = trajectory.node_count();
    let mut out = DMatrix::zeros(rows.len(), nodes);
    for (i, &(quantity, dof)) in rows.iter().enumerate() {
        let field = match quantity {
            QoiQuantity::Displacement => &trajectory.displacement,
            QoiQuantity::Velocity => &trajectory.velocity,
            QoiQuantity::Acceleration => &trajectory.acceleration,
        };
        for j in 0..nodes {
            out[(i, j)] = field[(dof, j)];
        }
    }
    Ok(out)
}

/// Training pipeline: each draw samples a frame, integrates the reduced
/// chain from rest, and returns the velocity history at the monitored
/// node.
pub struct DynamicPipeline<'a> {
    assembly: &'a DynamicAssembly,
    kind: SamplerKind,
    monitored: Vec<usize>,
}

impl DynamicPipeline<'_> {
    fn sampler(&self) -> TrainingSampler<'_> {
        TrainingSampler::new(
            &self.assembly.svd,
            self.kind,
            self.assembly.config.problem.subspace_dim,
            self.assembly.config.training_seed(),
        )
    }
}

impl SromPipeline<f64> for DynamicPipeline<'_> {
    fn case_count(&self) -> usize {
        1
    }

    fn draw_outputs(&self, concentration: usize, stream: u64) -> srom::Result<Vec<Vector64>> {
        let frame = self.sampler().draw_frame(concentration, stream)?;
        let reduced = self.assembly.operators.reduce(&frame)?.to_system()?;
        let k = self.assembly.config.problem.subspace_dim;
        let rest = DVector::zeros(k);
        let trajectory = newmark_integrate(&reduced, &self.assembly.newmark, &rest, &rest)?;
        let mapped = self.assembly.operators.row_map(&frame, &self.monitored)?;
        let series = mapped * &trajectory.velocity;
        Ok(vec![series.row(0).transpose()])
    }
}

/// Outcome of training plus band evaluation on every reported row for
/// one sampler.
pub struct DynamicMethodArtifacts {
    pub kind: SamplerKind,
    pub training: TrainingResult<f64>,
    pub training_seconds: f64,
    pub manifest: SeedManifest,
    pub bands: Vec<PredictionBand<f64>>,
    pub means: Vec<Vector64>,
    pub coverages: Vec<f64>,
    pub widths: Vec<f64>,
    pub ensemble_seconds: f64,
}

pub fn train_method(
    assembly: &DynamicAssembly,
    kind: SamplerKind,
) -> Result<(TrainingResult<f64>, f64)> {
    let training_set = assembly.training_set()?;
    let pipeline = assembly.pipeline(kind);
    let start = Instant::now();
    let result = optimize_concentration(
        &pipeline,
        &training_set,
        assembly.config.problem.subspace_dim,
        assembly.config.training.max_concentration,
        assembly.config.training.n_mc,
        assembly.config.training_seed(),
    )?;
    Ok((result, start.elapsed().as_secs_f64()))
}

pub fn run_method(assembly: &DynamicAssembly, kind: SamplerKind) -> Result<DynamicMethodArtifacts> {
    let (training, training_seconds) = train_method(assembly, kind)?;
    let model = SubspaceModel::new(
        assembly.svd.clone(),
        assembly.config.problem.subspace_dim,
        training.best_concentration,
        kind,
    )?;
    let start = Instant::now();
    let ensemble = build_ensemble(
        &assembly.system,
        &model,
        assembly.config.ensemble_seed(),
        assembly.config.ensemble.draws,
        &SolverSpec::Dynamic {
            config: &assembly.newmark,
            initial: None,
        },
        &assembly.selector,
    )?;
    let ensemble_seconds = start.elapsed().as_secs_f64();

    let level = assembly.config.ensemble.level;
    let bands = band_per_row(&ensemble.draws, QOI_ROWS, level)?;
    let nodes = assembly.truth.node_count();
    let mut means = Vec::with_capacity(QOI_ROWS);
    let mut coverages = Vec::with_capacity(QOI_ROWS);
    let mut widths = Vec::with_capacity(QOI_ROWS);
    for (row, band) in bands.iter().enumerate() {
        let truth_row = assembly.truth_qoi.row(row).transpose();
        coverages.push(coverage(band, &truth_row)?);
        widths.push(average_width(band)?);
        means.push(Vector64::from_fn(nodes, |j, _| {
            ensemble.draws.iter().map(|d| d.qoi[(row, j)]).sum::<f64>() / ensemble.n_draws() as f64
        }));
    }

    Ok(DynamicMethodArtifacts {
        kind,
        training,
        training_seconds,
        manifest: ensemble.manifest,
        bands,
        means,
        coverages,
        widths,
        ensemble_seconds,
    })
}

/// Full benchmark output: the assembly, one artifact set per sampler, and
/// per-row sharpness ratios when both ran.
pub struct DynamicArtifacts {
    pub assembly: DynamicAssembly,
    pub methods: Vec<DynamicMethodArtifacts>,
    /// Per-row mean pointwise width ratio, Gaussian model over bootstrap.
    pub width_ratios: Option<Vec<f64>>,
    pub wall_seconds: f64,
}

pub fn run(config: &DynamicConfig, only: Option<SamplerKind>) -> Result<DynamicArtifacts> {
    let start = Instant::now();
    let assembly = DynamicAssembly::build(config.clone())?;
    let kinds = match only {
        Some(kind) => vec![kind],
        None => vec![SamplerKind::Bootstrap, SamplerKind::Ppca],
    };
    let methods: Vec<DynamicMethodArtifacts> = kinds
        .into_iter()
        .map(|kind| run_method(&assembly, kind))
        .collect::<Result<_>>()?;

    let bootstrap = methods.iter().find(|m| m.kind == SamplerKind::Bootstrap);
    let ppca = methods.iter().find(|m| m.kind == SamplerKind::Ppca);
    let width_ratios = match (ppca, bootstrap) {
        (Some(p), Some(b)) => {
            let mut ratios = Vec::with_capacity(QOI_ROWS);
            for row in 0..QOI_ROWS {
                ratios.push(width_ratio(&p.bands[row], &b.bands[row])?);
            }
            Some(ratios)
        }
        _ => None,
    };

    Ok(DynamicArtifacts {
        assembly,
        methods,
        width_ratios,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
