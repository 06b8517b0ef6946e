//! Direct static solves and Newmark time integration.

use crate::error::{Error, Result};
use crate::scalar::{cast, to_f64, Scalar};
use crate::system::{Forcing, LinearSecondOrderSystem};
use crate::{Matrix, Vector};

/// Newmark integration parameters. The defaults `gamma = 1/2`,
/// `beta = 1/4` give the unconditionally stable average-acceleration
/// scheme, which conserves energy for undamped linear systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewmarkConfig<T: Scalar> {
    pub gamma: T,
    pub beta: T,
    pub dt: T,
    pub n_steps: usize,
}

impl<T: Scalar> NewmarkConfig<T> {
    /// Average-acceleration scheme on a uniform grid.
    pub fn average_acceleration(dt: T, n_steps: usize) -> Self {
        Self {
            gamma: cast(0.5),
            beta: cast(0.25),
            dt,
            n_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt <= T::zero() {
            return Err(Error::invalid("time step must be positive and finite"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("integration needs at least one step"));
        }
        let half = cast::<T>(0.5);
        if self.gamma < half {
            return Err(Error::invalid(
                "gamma below 1/2 makes the scheme unstable for some modes",
            ));
        }
        if self.beta + self.beta < self.gamma {
            return Err(Error::invalid(
                "unconditional stability requires 2 beta >= gamma",
            ));
        }
        Ok(())
    }
}

/// Integrated states on the uniform grid, one column per time node
/// including the initial one.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    pub times: Vector<T>,
    pub displacement: Matrix<T>,
    pub velocity: Matrix<T>,
    pub acceleration: Matrix<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn state_dim(&self) -> usize {
        self.displacement.nrows()
    }

    /// Number of stored time nodes, `n_steps + 1`.
    pub fn node_count(&self) -> usize {
        self.displacement.ncols()
    }

    /// Writes the series at selected degrees of freedom as CSV: a time
    /// column followed by displacement, velocity, and acceleration columns
    /// per degree of freedom.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, dofs: &[usize]) -> Result<()> {
        if let Some(&bad) = dofs.iter().find(|&&d| d >= self.state_dim()) {
            return Err(Error::invalid(format!(
                "degree of freedom {bad} out of range for dimension {}",
                self.state_dim()
            )));
        }
        write!(w, "time")?;
        for &d in dofs {
            write!(w, ",displacement_{d},velocity_{d},acceleration_{d}")?;
        }
        writeln!(w)?;
        for j in 0..self.node_count() {
            write!(w, "{}", to_f64(self.times[j]))?;
            for &d in dofs {
                write!(
                    w,
                    ",{},{},{}",
                    to_f64(self.displacement[(d, j)]),
                    to_f64(self.velocity[(d, j)]),
                    to_f64(self.acceleration[(d, j)])
                )?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Stiffness-proportional damping `C = beta_h K`.
pub fn rayleigh_damping<T: Scalar>(stiffness: &Matrix<T>, beta_h: T) -> Matrix<T> {
    debug_assert!(
        beta_h >= T::zero(),
        "damping coefficient must be non-negative"
    );
    stiffness * beta_h
}

/// SPD-first factorization with LU fallback for indefinite but invertible
/// operators. Construction fails with a condition estimate when the
/// operator is numerically singular.
pub(crate) enum Factorization<T: Scalar> {
    Cholesky(nalgebra::Cholesky<T, nalgebra::Dyn>),
    Lu(nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>),
}

impl<T: Scalar> Factorization<T> {
    pub fn new(a: &Matrix<T>, context: &'static str) -> Result<Self> {
        if let Some(chol) = a.clone().cholesky() {
            return Ok(Factorization::Cholesky(chol));
        }
        let svd = crate::linalg::robust_svd(a)?;
        let s = &svd.singular_values;
        let smax = s[0];
        let smin = s[s.len() - 1];
        let breakdown = cast::<T>(a.nrows() as f64) * T::default_epsilon() * smax;
        if smin <= breakdown {
            let condition = if smin > T::zero() {
                to_f64(smax / smin)
            } else {
                f64::INFINITY
            };
            return Err(Error::SingularSystem { context, condition });
        }
        Ok(Factorization::Lu(a.clone().lu()))
    }

    pub fn solve(&self, rhs: &Vector<T>) -> Result<Vector<T>> {
        match self {
            Factorization::Cholesky(chol) => Ok(chol.solve(rhs)),
            Factorization::Lu(lu) => lu.solve(rhs).ok_or(Error::SingularSystem {
                context: "lu backsolve",
                condition: f64::INFINITY,
            }),
        }
    }
}

/// Solves the static problem `K x = f`, eliminating fixed degrees of
/// freedom first so constrained entries are exactly zero in the result.
pub fn solve_static<T: Scalar>(system: &LinearSecondOrderSystem<T>) -> Result<Vector<T>> {
    let force = match system.force() {
        Forcing::Constant(f) => f.clone(),
        Forcing::Samples(_) => return Err(Error::invalid("static solve requires a constant load")),
    };
    let n = system.dim();
    let free = system.constraints().free_indices(n);
    let k_ff = gather_matrix(system.stiffness(), &free);
    let f_f = gather_vector(&force, &free);
    let factor = Factorization::new(&k_ff, "static stiffness")?;
    let x_f = factor.solve(&f_f)?;
    let residual = (&k_ff * &x_f - &f_f).norm();
    let scale = f_f.norm().max(T::default_epsilon());
    if residual > cast::<T>(1e-9) * scale {
        return Err(Error::SingularSystem {
            context: "static residual",
            condition: to_f64(residual / scale),
        });
    }
    Ok(scatter_vector(&x_f, &free, n))
}

/// Integrates `M x'' + C x' + K x = f(t)` with the Newmark scheme in
/// a-form: one factorization of the effective matrix
/// `M + gamma dt C + beta dt^2 K`, then a solve per step. The initial
/// acceleration comes from the equation of motion at `t = 0`.
pub fn newmark_integrate<T: Scalar>(
    system: &LinearSecondOrderSystem<T>,
    config: &NewmarkConfig<T>,
    initial_displacement: &Vector<T>,
    initial_velocity: &Vector<T>,
) -> Result<Trajectory<T>> {
    config.validate()?;
    if !system.is_dynamic() {
        return Err(Error::invalid(
            "time integration requires a nonzero mass matrix",
        ));
    }
    let n = system.dim();
    for (v, name) in [
        (initial_displacement, "initial displacement"),
        (initial_velocity, "initial velocity"),
    ] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                context: "newmark initial state",
                expected: n.to_string(),
                got: v.len().to_string(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "{name} contains non-finite entries"
            )));
        }
    }
    if let Some(count) = system.force().sample_count() {
        if count < config.n_steps + 1 {
            return Err(Error::invalid(format!(
                "forcing sampled at {count} nodes cannot cover {} steps",
                config.n_steps
            )));
        }
    }
    let free = system.constraints().free_indices(n);
    for &d in system.constraints().fixed_indices() {
        if initial_displacement[d] != T::zero() || initial_velocity[d] != T::zero() {
            return Err(Error::invalid(format!(
                "initial state is nonzero at fixed degree of freedom {d}"
            )));
        }
    }

    let mass = gather_matrix(system.mass(), &free);
    let damping = gather_matrix(system.damping(), &free);
    let stiffness = gather_matrix(system.stiffness(), &free);
    let force = system.force().gather(&free);

    let dt = config.dt;
    let dt2 = dt * dt;
    let effective = &mass + &damping * (config.gamma * dt) + &stiffness * (config.beta * dt2);
    let eff_factor = Factorization::new(&effective, "newmark effective matrix")?;
    let mass_factor = Factorization::new(&mass, "mass matrix")?;

    let mut d = gather_vector(initial_displacement, &free);
    let mut v = gather_vector(initial_velocity, &free);
    let f0 = force.at_step(0)?;
    let mut a = mass_factor.solve(&(f0 - &damping * &v - &stiffness * &d))?;

    let n_nodes = config.n_steps + 1;
    let mut trajectory = Trajectory {
        times: Vector::from_fn(n_nodes, |j, _| dt * cast::<T>(j as f64)),
        displacement: Matrix::zeros(n, n_nodes),
        velocity: Matrix::zeros(n, n_nodes),
        acceleration: Matrix::zeros(n, n_nodes),
    };
    store_node(&mut trajectory, 0, &d, &v, &a, &free);

    let half = cast::<T>(0.5);
    for step in 1..=config.n_steps {
        // Predictors hold the state extrapolated with the old acceleration.
        let d_star = &d + &v * dt + &a * ((half - config.beta) * dt2);
        let v_star = &v + &a * ((T::one() - config.gamma) * dt);
        let f_next = force.at_step(step)?;
        let rhs = f_next - &damping * &v_star - &stiffness * &d_star;
        a = eff_factor.solve(&rhs)?;
        d = d_star + &a * (config.beta * dt2);
        v = v_star + &a * (config.gamma * dt);
        store_node(&mut trajectory, step, &d, &v, &a, &free);
    }
    Ok(trajectory)
}

/// Total mechanical energy `(v^T M v + d^T K d) / 2` at one trajectory
/// node, using the unconstrained matrices.
pub fn mechanical_energy<T: Scalar>(
    system: &LinearSecondOrderSystem<T>,
    trajectory: &Trajectory<T>,
    node: usize,
) -> T {
    let d = trajectory.displacement.column(node);
    let v = trajectory.velocity.column(node);
    let kinetic = (system.mass() * v).dot(&v);
    let elastic = (system.stiffness() * d).dot(&d);
    (kinetic + elastic) * cast(0.5)
}

fn store_node<T: Scalar>(
    trajectory: &mut Trajectory<T>,
    node: usize,
    d: &Vector<T>,
    v: &Vector<T>,
    a: &Vector<T>,
    free: &[usize],
) {
    for (row, &dof) in free.iter().enumerate() {
        trajectory.displacement[(dof, node)] = d[row];
        trajectory.velocity[(dof, node)] = v[row];
        trajectory.acceleration[(dof, node)] = a[row];
    }
}

pub(crate) fn gather_matrix<T: Scalar>(m: &Matrix<T>, rows: &[usize]) -> Matrix<T> {
    Matrix::from_fn(rows.len(), rows.len(), |i, j| m[(rows[i], rows[j])])
}

pub(crate) fn gather_vector<T: Scalar>(v: &Vector<T>, rows: &[usize]) -> Vector<T> {
    Vector::from_fn(rows.len(), |i, _| v[rows[i]])
}

pub(crate) fn scatter_vector<T: Scalar>(v: &Vector<T>, rows: &[usize], dim: usize) -> Vector<T> {
    let mut out = Vector::zeros(dim);
    for (i, &row) in rows.iter().enumerate() {
        out[row] = v[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::ConstraintSet;
    use std::f64::consts::PI;

    fn sdof(omega: f64, damping: f64) -> LinearSecondOrderSystem<f64> {
        LinearSecondOrderSystem::new(
            Matrix::from_row_slice(1, 1, &[1.0]),
            Matrix::from_row_slice(1, 1, &[damping]),
            Matrix::from_row_slice(1, 1, &[omega * omega]),
            Forcing::Constant(Vector::zeros(1)),
            ConstraintSet::Unconstrained,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(NewmarkConfig::average_acceleration(0.1, 10)
            .validate()
            .is_ok());
        assert!(NewmarkConfig::average_acceleration(0.0, 10)
            .validate()
            .is_err());
        assert!(NewmarkConfig::average_acceleration(0.1, 0)
            .validate()
            .is_err());
        let unstable = NewmarkConfig {
            gamma: 0.4,
            beta: 0.25,
            dt: 0.1,
            n_steps: 10,
        };
        assert!(unstable.validate().is_err());
        let low_beta = NewmarkConfig {
            gamma: 0.6,
            beta: 0.25,
            dt: 0.1,
            n_steps: 10,
        };
        assert!(low_beta.validate().is_err());
    }

    #[test]
    fn undamped_sdof_tracks_the_cosine() {
        let omega = 2.0 * PI;
        let system = sdof(omega, 0.0);
        let period = 2.0 * PI / omega;
        let steps_per_period = 200;
        let config = NewmarkConfig::average_acceleration(
            period / steps_per_period as f64,
            5 * steps_per_period,
        );
        let d0 = Vector::from_row_slice(&[1.0]);
        let v0 = Vector::zeros(1);
        let trajectory = newmark_integrate(&system, &config, &d0, &v0).unwrap();
        let mut max_err = 0.0f64;
        for node in 0..trajectory.node_count() {
            let t = trajectory.times[node];
            let exact = (omega * t).cos();
            max_err = max_err.max((trajectory.displacement[(0, node)] - exact).abs());
        }
        assert!(max_err < 5e-3, "max displacement error {max_err}");
    }

    #[test]
    fn undamped_energy_is_conserved_over_long_runs() {
        let omega = 2.0 * PI;
        let system = sdof(omega, 0.0);
        let config = NewmarkConfig::average_acceleration(0.01, 10_000);
        let d0 = Vector::from_row_slice(&[1.0]);
        let v0 = Vector::zeros(1);
        let trajectory = newmark_integrate(&system, &config, &d0, &v0).unwrap();
        let e0 = mechanical_energy(&system, &trajectory, 0);
        let mut max_drift = 0.0f64;
        for node in 0..trajectory.node_count() {
            let e = mechanical_energy(&system, &trajectory, node);
            max_drift = max_drift.max(((e - e0) / e0).abs());
        }
        assert!(max_drift < 1e-6, "relative energy drift {max_drift}");
    }

    #[test]
    fn damped_sdof_matches_matrix_exponential_oracle() {
        let omega = 2.0 * PI;
        let zeta = 0.05;
        let c = 2.0 * zeta * omega;
        let system = sdof(omega, c);
        let period = 2.0 * PI / omega;
        let steps_per_period = 2000;
        let config = NewmarkConfig::average_acceleration(
            period / steps_per_period as f64,
            2 * steps_per_period,
        );
        let d0 = Vector::from_row_slice(&[0.7]);
        let v0 = Vector::from_row_slice(&[-0.3]);
        let trajectory = newmark_integrate(&system, &config, &d0, &v0).unwrap();

        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -(omega * omega), -c]);
        let mut max_err = 0.0f64;
        for node in 0..trajectory.node_count() {
            let t = trajectory.times[node];
            let phi = expm(&a, t);
            let exact = phi[(0, 0)] * d0[0] + phi[(0, 1)] * v0[0];
            max_err = max_err.max((trajectory.displacement[(0, node)] - exact).abs());
        }
        assert!(max_err < 1e-4, "max deviation from exponential {max_err}");
    }

    // Scaling-and-squaring Taylor exponential, accurate far beyond the
    // tolerances it certifies here.
    fn expm(a: &Matrix<f64>, t: f64) -> Matrix<f64> {
        let n = a.nrows();
        let norm = a.amax() * t.abs();
        let scalings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let b = a * (t / 2f64.powi(scalings));
        let mut term = Matrix::<f64>::identity(n, n);
        let mut sum = Matrix::<f64>::identity(n, n);
        for k in 1..30 {
            term = &term * &b / k as f64;
            sum += &term;
        }
        let mut result = sum;
        for _ in 0..scalings {
            result = &result * &result;
        }
        result
    }

    #[test]
    fn forced_response_is_linear_in_the_load() {
        let k = Matrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 2.0]);
        let m = Matrix::<f64>::identity(2, 2);
        let c = rayleigh_damping(&k, 0.01);
        let f = Vector::from_row_slice(&[1.0, -2.0]);
        let config = NewmarkConfig::average_acceleration(0.05, 200);
        let build = |scale: f64| {
            LinearSecondOrderSystem::new(
                m.clone(),
                c.clone(),
                k.clone(),
                Forcing::Constant(&f * scale),
                ConstraintSet::Unconstrained,
            )
            .unwrap()
        };
        let zero = Vector::zeros(2);
        let single = newmark_integrate(&build(1.0), &config, &zero, &zero).unwrap();
        let double = newmark_integrate(&build(2.0), &config, &zero, &zero).unwrap();
        let diff = (&double.displacement - &single.displacement * 2.0).amax();
        assert!(diff < 1e-12, "nonlinearity {diff}");
    }

    #[test]
    fn constrained_integration_pins_fixed_dofs() {
        let k = Matrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let system = LinearSecondOrderSystem::new(
            Matrix::identity(3, 3),
            Matrix::zeros(3, 3),
            k,
            Forcing::Constant(Vector::from_row_slice(&[0.0, 0.5, 0.0])),
            ConstraintSet::fixed(vec![0]),
        )
        .unwrap();
        let config = NewmarkConfig::average_acceleration(0.05, 100);
        let zero = Vector::zeros(3);
        let trajectory = newmark_integrate(&system, &config, &zero, &zero).unwrap();
        for node in 0..trajectory.node_count() {
            assert_eq!(trajectory.displacement[(0, node)], 0.0);
            assert_eq!(trajectory.velocity[(0, node)], 0.0);
        }
        assert!(trajectory.displacement.amax() > 0.0);
    }

    #[test]
    fn rejects_nonzero_initial_state_on_fixed_dof() {
        let system = LinearSecondOrderSystem::new(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 2),
            Matrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]),
            Forcing::Constant(Vector::zeros(2)),
            ConstraintSet::fixed(vec![0]),
        )
        .unwrap();
        let config = NewmarkConfig::average_acceleration(0.05, 10);
        let d0 = Vector::from_row_slice(&[0.1, 0.0]);
        let v0 = Vector::zeros(2);
        assert!(newmark_integrate(&system, &config, &d0, &v0).is_err());
    }

    #[test]
    fn static_solve_matches_dense_oracle() {
        let k = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let f = Vector::from_row_slice(&[1.0, 2.0]);
        let system =
            LinearSecondOrderSystem::new_static(k.clone(), f.clone(), ConstraintSet::Unconstrained)
                .unwrap();
        let x = solve_static(&system).unwrap();
        let residual = (&k * &x - &f).amax();
        assert!(residual < 1e-12, "residual {residual}");
    }

    #[test]
    fn constrained_static_solve_has_exact_zeros() {
        let k: Matrix<f64> =
            Matrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let f = Vector::from_row_slice(&[5.0, 1.0, 2.0]);
        let system =
            LinearSecondOrderSystem::new_static(k, f, ConstraintSet::fixed(vec![0, 2])).unwrap();
        let x = solve_static(&system).unwrap();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[2], 0.0);
        assert!((x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_static_system_reports_condition() {
        let k = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = Vector::from_row_slice(&[1.0, 1.0]);
        let system =
            LinearSecondOrderSystem::new_static(k, f, ConstraintSet::Unconstrained).unwrap();
        match solve_static(&system) {
            Err(Error::SingularSystem { condition, .. }) => {
                assert!(condition > 1e12);
            }
            other => panic!("expected singular system, got {other:?}"),
        }
    }

    #[test]
    fn rayleigh_damping_is_proportional() {
        let k = Matrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let c = rayleigh_damping(&k, 0.5);
        assert_eq!(c, &k * 0.5);
    }
}
