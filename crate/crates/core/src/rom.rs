//! Galerkin reduction and reconstruction of reduced solutions.
//!
//! Reduction happens in two stages: the system is projected once onto the
//! full snapshot range (r coordinates), and each sampled frame then reduces
//! those r-by-r operators to k-by-k. Stage two never touches the ambient
//! dimension, which keeps the per-draw cost independent of the mesh size.

use crate::error::{Error, Result};
use crate::linalg::{CompactSvd, SubspaceBasis};
use crate::scalar::{cast, to_f64, Scalar};
use crate::solvers::{Factorization, Trajectory};
use crate::system::{ConstraintSet, Forcing, LinearSecondOrderSystem};
use crate::{Matrix, Vector};

/// Relative residual accepted by the reduced static solve.
pub const REDUCED_RESIDUAL_TOL: f64 = 1e-10;

/// System projected onto the span of `basis`: `basis^T A basis` for each
/// operator and `basis^T f` for the load. The basis maps reduced
/// coordinates back to its ambient space, which is the full state space
/// for one-stage reduction or the r snapshot coordinates for stage two.
#[derive(Debug, Clone)]
pub struct ReducedSystem<T: Scalar> {
    mass: Matrix<T>,
    damping: Matrix<T>,
    stiffness: Matrix<T>,
    force: Forcing<T>,
    basis: SubspaceBasis<T>,
}

impl<T: Scalar> ReducedSystem<T> {
    pub fn dim(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn mass(&self) -> &Matrix<T> {
        &self.mass
    }

    pub fn damping(&self) -> &Matrix<T> {
        &self.damping
    }

    pub fn stiffness(&self) -> &Matrix<T> {
        &self.stiffness
    }

    /// Load already projected into reduced coordinates.
    pub fn force(&self) -> &Forcing<T> {
        &self.force
    }

    pub fn basis(&self) -> &SubspaceBasis<T> {
        &self.basis
    }

    /// Repackages the reduced operators as a standalone system so the time
    /// integrators can run on them directly. The reduced system carries no
    /// constraints: bases built from constraint-satisfying snapshots vanish
    /// on the fixed degrees of freedom, so every reconstructed state
    /// satisfies the constraints automatically.
    pub fn to_system(&self) -> Result<LinearSecondOrderSystem<T>> {
        LinearSecondOrderSystem::new(
            self.mass.clone(),
            self.damping.clone(),
            self.stiffness.clone(),
            self.force.clone(),
            ConstraintSet::Unconstrained,
        )
    }

    /// Solves against the stored load, which is already in reduced
    /// coordinates. Fails on sampled loads and on a residual above
    /// [`REDUCED_RESIDUAL_TOL`].
    pub fn solve_static(&self) -> Result<Vector<T>> {
        match &self.force {
            Forcing::Constant(f) => checked_solve(&self.stiffness, f),
            Forcing::Samples(_) => Err(Error::invalid(
                "reduced static solve requires a constant load",
            )),
        }
    }
}

fn checked_solve<T: Scalar>(stiffness: &Matrix<T>, rhs: &Vector<T>) -> Result<Vector<T>> {
    let factor = Factorization::new(stiffness, "reduced stiffness")?;
    let q = factor.solve(rhs)?;
    let residual = (stiffness * &q - rhs).norm();
    let scale = rhs.norm().max(T::default_epsilon());
    if residual > cast::<T>(REDUCED_RESIDUAL_TOL) * scale {
        return Err(Error::SingularSystem {
            context: "reduced static residual",
            condition: to_f64(residual / scale),
        });
    }
    Ok(q)
}

/// Projects a system onto an ambient-space basis (one-stage reduction).
pub fn galerkin_project<T: Scalar>(
    system: &LinearSecondOrderSystem<T>,
    basis: &SubspaceBasis<T>,
) -> Result<ReducedSystem<T>> {
    if basis.ambient_dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            context: "galerkin basis",
            expected: system.dim().to_string(),
            got: basis.ambient_dim().to_string(),
        });
    }
    let bt = basis.matrix().transpose();
    Ok(ReducedSystem {
        mass: &bt * system.mass() * basis.matrix(),
        damping: &bt * system.damping() * basis.matrix(),
        stiffness: &bt * system.stiffness() * basis.matrix(),
        force: system.force().map(&bt)?,
        basis: basis.clone(),
    })
}

/// Stage-one operators: the system seen in the r snapshot coordinates,
/// plus the left factor for lifting results back to the ambient space.
#[derive(Debug, Clone)]
pub struct TwoStageOperators<T: Scalar> {
    mass: Matrix<T>,
    damping: Matrix<T>,
    stiffness: Matrix<T>,
    force: Forcing<T>,
    left: Matrix<T>,
}

/// Projects the system onto the full snapshot range once. Every subsequent
/// per-draw reduction is r-dimensional.
pub fn two_stage_reduce<T: Scalar>(
    system: &LinearSecondOrderSystem<T>,
    svd: &CompactSvd<T>,
) -> Result<TwoStageOperators<T>> {
    if svd.state_dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            context: "two_stage_reduce",
            expected: system.dim().to_string(),
            got: svd.state_dim().to_string(),
        });
    }
    let left = svd.left().clone();
    let lt = left.transpose();
    Ok(TwoStageOperators {
        mass: &lt * system.mass() * &left,
        damping: &lt * system.damping() * &left,
        stiffness: &lt * system.stiffness() * &left,
        force: system.force().map(&lt)?,
        left,
    })
}

impl<T: Scalar> TwoStageOperators<T> {
    /// Rank r of the stage-one projection.
    pub fn reduced_rank(&self) -> usize {
        self.stiffness.nrows()
    }

    /// Ambient dimension n of the original system.
    pub fn state_dim(&self) -> usize {
        self.left.nrows()
    }

    /// Stage-one load in r coordinates.
    pub fn force(&self) -> &Forcing<T> {
        &self.force
    }

    /// Lifting factor `V_r` from snapshot coordinates to the ambient space.
    pub fn left(&self) -> &Matrix<T> {
        &self.left
    }

    /// Stage two: reduces the r-by-r operators with a sampled frame. The
    /// result's basis is the frame itself, so its ambient space is the r
    /// snapshot coordinates.
    pub fn reduce(&self, frame: &SubspaceBasis<T>) -> Result<ReducedSystem<T>> {
        if frame.ambient_dim() != self.reduced_rank() {
            return Err(Error::DimensionMismatch {
                context: "stage-two frame",
                expected: self.reduced_rank().to_string(),
                got: frame.ambient_dim().to_string(),
            });
        }
        let ft = frame.matrix().transpose();
        Ok(ReducedSystem {
            mass: &ft * &self.mass * frame.matrix(),
            damping: &ft * &self.damping * frame.matrix(),
            stiffness: &ft * &self.stiffness * frame.matrix(),
            force: self.force.map(&ft)?,
            basis: frame.clone(),
        })
    }

    /// Composes the lifting factor with a frame: the ambient basis
    /// `V_r U_k` of one draw.
    pub fn lift(&self, frame: &SubspaceBasis<T>) -> Result<SubspaceBasis<T>> {
        if frame.ambient_dim() != self.reduced_rank() {
            return Err(Error::DimensionMismatch {
                context: "lift frame",
                expected: self.reduced_rank().to_string(),
                got: frame.ambient_dim().to_string(),
            });
        }
        Ok(SubspaceBasis::from_orthonormal_unchecked(
            &self.left * frame.matrix(),
        ))
    }

    /// Selected rows of the composed ambient basis, an s-by-k map from
    /// reduced coordinates straight to monitored degrees of freedom.
    pub fn row_map(&self, frame: &SubspaceBasis<T>, rows: &[usize]) -> Result<Matrix<T>> {
        if frame.ambient_dim() != self.reduced_rank() {
            return Err(Error::DimensionMismatch {
                context: "row_map frame",
                expected: self.reduced_rank().to_string(),
                got: frame.ambient_dim().to_string(),
            });
        }
        let n = self.state_dim();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::invalid(format!(
                "monitored degree of freedom {bad} out of range for dimension {n}"
            )));
        }
        let gathered = Matrix::from_fn(rows.len(), self.reduced_rank(), |i, j| {
            self.left[(rows[i], j)]
        });
        Ok(gathered * frame.matrix())
    }
}

/// Solves the reduced static problem `K_red q = basis^T f` and verifies
/// the reduced residual. The load is given in the basis's ambient space.
pub fn solve_reduced_static<T: Scalar>(
    reduced: &ReducedSystem<T>,
    force: &Vector<T>,
) -> Result<Vector<T>> {
    if force.len() != reduced.basis().ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "reduced static load",
            expected: reduced.basis().ambient_dim().to_string(),
            got: force.len().to_string(),
        });
    }
    let rhs = reduced.basis().matrix().transpose() * force;
    checked_solve(reduced.stiffness(), &rhs)
}

/// Which field of a trajectory a quantity-of-interest row reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QoiQuantity {
    Displacement,
    Velocity,
    Acceleration,
}

impl QoiQuantity {
    pub fn label(&self) -> &'static str {
        match self {
            QoiQuantity::Displacement => "displacement",
            QoiQuantity::Velocity => "velocity",
            QoiQuantity::Acceleration => "acceleration",
        }
    }
}

/// Output map from reduced solutions to reported quantities: either the
/// full displacement field or selected (quantity, degree of freedom) rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QoiSelector {
    FullDisplacement,
    Rows(Vec<(QoiQuantity, usize)>),
}

impl QoiSelector {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let QoiSelector::Rows(rows) = self {
            if rows.is_empty() {
                return Err(Error::invalid("quantity-of-interest row list is empty"));
            }
            if let Some(&(_, bad)) = rows.iter().find(|&&(_, d)| d >= dim) {
                return Err(Error::invalid(format!(
                    "monitored degree of freedom {bad} out of range for dimension {dim}"
                )));
            }
        }
        Ok(())
    }

    /// Number of output rows for a system of the given dimension.
    pub fn row_count(&self, dim: usize) -> usize {
        match self {
            QoiSelector::FullDisplacement => dim,
            QoiSelector::Rows(rows) => rows.len(),
        }
    }

    /// Human-readable row labels for report columns.
    pub fn labels(&self, dim: usize) -> Vec<String> {
        match self {
            QoiSelector::FullDisplacement => {
                (0..dim).map(|i| format!("displacement_{i}")).collect()
            }
            QoiSelector::Rows(rows) => rows
                .iter()
                .map(|(q, d)| format!("{}_{d}", q.label()))
                .collect(),
        }
    }

    /// True when some row reads a velocity or acceleration field.
    pub fn needs_time_derivatives(&self) -> bool {
        match self {
            QoiSelector::FullDisplacement => false,
            QoiSelector::Rows(rows) => rows
                .iter()
                .any(|(q, _)| !matches!(q, QoiQuantity::Displacement)),
        }
    }
}

/// Lifts reduced coordinates through a basis: `basis * coords`.
pub fn reconstruct<T: Scalar>(basis: &SubspaceBasis<T>, coords: &Vector<T>) -> Result<Vector<T>> {
    if coords.len() != basis.subspace_dim() {
        return Err(Error::DimensionMismatch {
            context: "reconstruct",
            expected: basis.subspace_dim().to_string(),
            got: coords.len().to_string(),
        });
    }
    Ok(basis.matrix() * coords)
}

/// Extracts quantity-of-interest rows from a reduced trajectory, lifting
/// each requested row through the basis. Output is rows-by-nodes.
pub fn reconstruct_series<T: Scalar>(
    basis: &SubspaceBasis<T>,
    trajectory: &Trajectory<T>,
    selector: &QoiSelector,
) -> Result<Matrix<T>> {
    if trajectory.state_dim() != basis.subspace_dim() {
        return Err(Error::DimensionMismatch {
            context: "reconstruct_series",
            expected: basis.subspace_dim().to_string(),
            got: trajectory.state_dim().to_string(),
        });
    }
    selector.validate(basis.ambient_dim())?;
    let nodes = trajectory.node_count();
    match selector {
        QoiSelector::FullDisplacement => Ok(basis.matrix() * &trajectory.displacement),
        QoiSelector::Rows(rows) => {
            let mut out = Matrix::zeros(rows.len(), nodes);
            for (i, &(quantity, dof)) in rows.iter().enumerate() {
                let field = match quantity {
                    QoiQuantity::Displacement => &trajectory.displacement,
                    QoiQuantity::Velocity => &trajectory.velocity,
                    QoiQuantity::Acceleration => &trajectory.acceleration,
                };
                let row = basis.matrix().row(dof);
                for j in 0..nodes {
                    out[(i, j)] = row.dot(&field.column(j).transpose());
                }
            }
            Ok(out)
        }
    }
}
