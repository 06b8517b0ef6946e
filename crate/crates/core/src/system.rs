//! Description of linear static and second-order dynamic systems.

use crate::error::{Error, Result};
use crate::linalg::check_finite;
use crate::scalar::{cast, to_f64, Scalar};
use crate::{Matrix, Vector};

/// Maximum relative asymmetry tolerated in mass and stiffness matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// External load: either constant in time or sampled on the integration
/// grid, one column per time node.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing<T: Scalar> {
    Constant(Vector<T>),
    Samples(Matrix<T>),
}

impl<T: Scalar> Forcing<T> {
    /// Builds sampled forcing from a time function on a uniform grid with
    /// `n_steps + 1` nodes.
    pub fn from_time_fn(
        dim: usize,
        n_steps: usize,
        dt: T,
        f: impl Fn(T) -> Vector<T>,
    ) -> Result<Self> {
        let mut samples = Matrix::zeros(dim, n_steps + 1);
        for j in 0..=n_steps {
            let t = dt * cast::<T>(j as f64);
            let col = f(t);
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "forcing time function",
                    expected: dim.to_string(),
                    got: col.len().to_string(),
                });
            }
            samples.set_column(j, &col);
        }
        Ok(Forcing::Samples(samples))
    }

    /// Spatial dimension of the load.
    pub fn dim(&self) -> usize {
        match self {
            Forcing::Constant(v) => v.len(),
            Forcing::Samples(m) => m.nrows(),
        }
    }

    /// Number of sampled time nodes, if sampled.
    pub fn sample_count(&self) -> Option<usize> {
        match self {
            Forcing::Constant(_) => None,
            Forcing::Samples(m) => Some(m.ncols()),
        }
    }

    /// Load vector at time node `step`.
    pub fn at_step(&self, step: usize) -> Result<Vector<T>> {
        match self {
            Forcing::Constant(v) => Ok(v.clone()),
            Forcing::Samples(m) => {
                if step >= m.ncols() {
                    return Err(Error::invalid(format!(
                        "forcing sampled at {} nodes has no step {step}",
                        m.ncols()
                    )));
                }
                Ok(m.column(step).clone_owned())
            }
        }
    }

    /// Applies a linear map columnwise: the forcing seen in projected
    /// coordinates.
    pub fn map(&self, projector: &Matrix<T>) -> Result<Forcing<T>> {
        if projector.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "forcing projection",
                expected: self.dim().to_string(),
                got: projector.ncols().to_string(),
            });
        }
        Ok(match self {
            Forcing::Constant(v) => Forcing::Constant(projector * v),
            Forcing::Samples(m) => Forcing::Samples(projector * m),
        })
    }

    /// Restricts the load to a subset of degrees of freedom.
    pub fn gather(&self, rows: &[usize]) -> Forcing<T> {
        match self {
            Forcing::Constant(v) => {
                Forcing::Constant(Vector::from_fn(rows.len(), |i, _| v[rows[i]]))
            }
            Forcing::Samples(m) => {
                Forcing::Samples(Matrix::from_fn(rows.len(), m.ncols(), |i, j| {
                    m[(rows[i], j)]
                }))
            }
        }
    }
}

/// Homogeneous single-point constraints: the listed degrees of freedom are
/// held at zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintSet {
    Unconstrained,
    FixedDofs(Vec<usize>),
}

impl ConstraintSet {
    /// Fixed-DOF constraints; indices are sorted and deduplicated.
    pub fn fixed(mut dofs: Vec<usize>) -> Self {
        dofs.sort_unstable();
        dofs.dedup();
        if dofs.is_empty() {
            ConstraintSet::Unconstrained
        } else {
            ConstraintSet::FixedDofs(dofs)
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let ConstraintSet::FixedDofs(dofs) = self {
            if let Some(&bad) = dofs.iter().find(|&&d| d >= dim) {
                return Err(Error::invalid(format!(
                    "constrained degree of freedom {bad} out of range for dimension {dim}"
                )));
            }
            if dofs.len() >= dim {
                return Err(Error::invalid("constraints fix every degree of freedom"));
            }
        }
        Ok(())
    }

    /// Constraint matrix with one unit column per fixed degree of freedom;
    /// `None` when unconstrained.
    pub fn matrix<T: Scalar>(&self, dim: usize) -> Option<Matrix<T>> {
        match self {
            ConstraintSet::Unconstrained => None,
            ConstraintSet::FixedDofs(dofs) => {
                let mut b = Matrix::zeros(dim, dofs.len());
                for (c, &d) in dofs.iter().enumerate() {
                    b[(d, c)] = T::one();
                }
                Some(b)
            }
        }
    }

    /// Degrees of freedom not fixed by the constraints.
    pub fn free_indices(&self, dim: usize) -> Vec<usize> {
        match self {
            ConstraintSet::Unconstrained => (0..dim).collect(),
            ConstraintSet::FixedDofs(dofs) => (0..dim).filter(|i| !dofs.contains(i)).collect(),
        }
    }

    pub fn fixed_indices(&self) -> &[usize] {
        match self {
            ConstraintSet::Unconstrained => &[],
            ConstraintSet::FixedDofs(dofs) => dofs,
        }
    }
}

/// Linear system `M x'' + C x' + K x = f(t)` with optional fixed-DOF
/// constraints. A static system has zero mass and damping and a constant
/// load.
#[derive(Debug, Clone)]
pub struct LinearSecondOrderSystem<T: Scalar> {
    mass: Matrix<T>,
    damping: Matrix<T>,
    stiffness: Matrix<T>,
    force: Forcing<T>,
    constraints: ConstraintSet,
}

impl<T: Scalar> LinearSecondOrderSystem<T> {
    pub fn new(
        mass: Matrix<T>,
        damping: Matrix<T>,
        stiffness: Matrix<T>,
        force: Forcing<T>,
        constraints: ConstraintSet,
    ) -> Result<Self> {
        let n = stiffness.nrows();
        for (m, name) in [
            (&mass, "mass"),
            (&damping, "damping"),
            (&stiffness, "stiffness"),
        ] {
            check_finite(m, name)?;
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: "system matrix",
                    expected: format!("{n}x{n}"),
                    got: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
        }
        if n == 0 {
            return Err(Error::invalid("system dimension must be positive"));
        }
        if force.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "system force",
                expected: n.to_string(),
                got: force.dim().to_string(),
            });
        }
        check_symmetric(&mass, "mass")?;
        check_symmetric(&stiffness, "stiffness")?;
        constraints.validate(n)?;
        Ok(Self {
            mass,
            damping,
            stiffness,
            force,
            constraints,
        })
    }

    /// Static system `K x = f` without inertia or damping.
    pub fn new_static(
        stiffness: Matrix<T>,
        force: Vector<T>,
        constraints: ConstraintSet,
    ) -> Result<Self> {
        let n = stiffness.nrows();
        Self::new(
            Matrix::zeros(n, n),
            Matrix::zeros(n, n),
            stiffness,
            Forcing::Constant(force),
            constraints,
        )
    }

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

    pub fn force(&self) -> &Forcing<T> {
        &self.force
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// True when the mass matrix has any nonzero entry.
    pub fn is_dynamic(&self) -> bool {
        self.mass.amax() > T::zero()
    }
}

fn check_symmetric<T: Scalar>(m: &Matrix<T>, name: &str) -> Result<()> {
    let scale = m.amax().max(T::one());
    let tol = cast::<T>(SYMMETRY_TOL) * scale;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)]).abs();
            if d > tol {
                return Err(Error::invalid(format!(
                    "{name} matrix is not symmetric: entry ({i}, {j}) differs by {:.3e}",
                    to_f64(d)
                )));
            }
        }
    }
    Ok(())
}
