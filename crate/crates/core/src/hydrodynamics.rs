//! Rigid-body plus hydrodynamic equation of motion in the body frame:
//!
//! ```text
//! M * nu_r_dot + C(nu_r) * nu_r + D(nu_r) * nu_r + g(eta) = tau
//! ```
//!
//! The body origin sits at the center of mass, so `M_RB` is block diagonal
//! and only the center-of-buoyancy offset `r_b` is configurable. Added mass
//! and damping are diagonal. Ambient current is constant and irrotational,
//! which makes `nu_dot == nu_r_dot`.

use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};

use nalgebra::{Cholesky, Matrix3, Matrix6, Quaternion, UnitQuaternion, Vector3, Vector6, U6};
use thiserror::Error;

use crate::math::skew;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("system inertia matrix M is not symmetric positive definite")]
    InertiaNotPositiveDefinite,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ParamError {
    ParamError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Pose and body-frame velocity of the vehicle.
///
/// Position is world NED (z down, depth positive). `nu` is
/// `[u, v, w, p, q, r]` in the body frame (x forward, y starboard, z down).
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub position: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
    pub nu: Vector6<f64>,
}

impl Default for VehicleState {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            nu: Vector6::zeros(),
        }
    }
}

impl VehicleState {
    pub fn new(position: Vector3<f64>, euler: [f64; 3], nu: Vector6<f64>) -> Self {
        Self {
            position,
            attitude: UnitQuaternion::from_euler_angles(euler[0], euler[1], euler[2]),
            nu,
        }
    }

    /// ZYX Euler angles `(roll, pitch, yaw)`.
    pub fn euler(&self) -> (f64, f64, f64) {
        self.attitude.euler_angles()
    }

    pub fn roll(&self) -> f64 {
        self.euler().0
    }

    pub fn pitch(&self) -> f64 {
        self.euler().1
    }

    pub fn yaw(&self) -> f64 {
        self.euler().2
    }

    /// Rotation taking body-frame vectors into the world frame.
    pub fn rotation(&self) -> Matrix3<f64> {
        self.attitude.to_rotation_matrix().into_inner()
    }

    pub fn depth(&self) -> f64 {
        self.position.z
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.attitude.coords.iter().all(|v| v.is_finite())
            && self.nu.iter().all(|v| v.is_finite())
    }

    /// Rebuilds the state from a possibly non-unit quaternion.
    pub fn with_raw_attitude(
        position: Vector3<f64>,
        attitude: Quaternion<f64>,
        nu: Vector6<f64>,
    ) -> Self {
        Self {
            position,
            attitude: UnitQuaternion::from_quaternion(attitude),
            nu,
        }
    }
}

/// Mass, geometry and hydrodynamic coefficients of the hull.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroParams {
    pub mass: f64,
    /// Inertia tensor about the center of mass, kg m^2.
    pub inertia: Matrix3<f64>,
    pub length: f64,
    pub diameter: f64,
    /// Diagonal added mass `[X_udot, Y_vdot, Z_wdot, K_pdot, M_qdot, N_rdot]`
    /// as positive magnitudes. `None` derives them from a prolate spheroid
    /// of the configured length and diameter.
    pub added_mass: Option<[f64; 6]>,
    pub linear_damping: [f64; 6],
    pub quadratic_damping: [f64; 6],
    /// Weight W, newtons.
    pub weight: f64,
    /// Buoyancy B, newtons.
    pub buoyancy: f64,
    /// Center of buoyancy relative to the center of mass, body frame.
    pub r_b: Vector3<f64>,
}

impl HydroParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(invalid("mass", "must be positive"));
        }
        if self.inertia.iter().any(|v| !v.is_finite()) {
            return Err(invalid("inertia", "must be finite"));
        }
        if (self.inertia - self.inertia.transpose()).amax() > 1e-12 * self.inertia.amax().max(1.0) {
            return Err(invalid("inertia", "must be symmetric"));
        }
        if Cholesky::new(self.inertia).is_none() {
            return Err(invalid("inertia", "must be positive definite"));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(invalid("length", "must be positive"));
        }
        if !(self.diameter.is_finite() && self.diameter > 0.0) {
            return Err(invalid("diameter", "must be positive"));
        }
        match self.added_mass {
            Some(am) => {
                if am.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(invalid(
                        "added_mass",
                        "coefficients must be finite and >= 0",
                    ));
                }
            }
            None => {
                if self.diameter >= self.length {
                    return Err(invalid(
                        "added_mass",
                        "auto-derivation needs length > diameter (prolate spheroid)",
                    ));
                }
            }
        }
        if self
            .linear_damping
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(invalid(
                "linear_damping",
                "coefficients must be finite and >= 0",
            ));
        }
        if self
            .quadratic_damping
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(invalid(
                "quadratic_damping",
                "coefficients must be finite and >= 0",
            ));
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(invalid("weight", "must be finite and >= 0"));
        }
        if !(self.buoyancy.is_finite() && self.buoyancy >= 0.0) {
            return Err(invalid("buoyancy", "must be finite and >= 0"));
        }
        if self.r_b.iter().any(|v| !v.is_finite()) {
            return Err(invalid("r_b", "must be finite"));
        }
        Ok(())
    }

    /// Added mass actually used: explicit coefficients win over geometry.
    pub fn effective_added_mass(&self) -> [f64; 6] {
        self.added_mass.unwrap_or_else(|| {
            prolate_spheroid_added_mass(self.mass, self.length, self.diameter, &self.inertia)
        })
    }
}

/// Lamb's k-factors for a prolate spheroid with semi-axes `a = L/2` and
/// `b = D/2`, returned as `(k1, k2, k_prime)` for surge, sway/heave and the
/// transverse rotations.
pub fn lamb_k_factors(length: f64, diameter: f64) -> (f64, f64, f64) {
    let a = 0.5 * length;
    let b = 0.5 * diameter;
    let e = (1.0 - (b / a).powi(2)).sqrt();
    let e2 = e * e;
    let e3 = e2 * e;
    let log_term = ((1.0 + e) / (1.0 - e)).ln();
    let alpha0 = 2.0 * (1.0 - e2) / e3 * (0.5 * log_term - e);
    let beta0 = 1.0 / e2 - (1.0 - e2) / (2.0 * e3) * log_term;
    let k1 = alpha0 / (2.0 - alpha0);
    let k2 = beta0 / (2.0 - beta0);
    let k_prime =
        e2 * e2 * (beta0 - alpha0) / ((2.0 - e2) * (2.0 * e2 - (2.0 - e2) * (beta0 - alpha0)));
    (k1, k2, k_prime)
}

/// Diagonal added mass of a prolate spheroid. Roll added inertia is zero for
/// a body of revolution in potential flow.
pub fn prolate_spheroid_added_mass(
    mass: f64,
    length: f64,
    diameter: f64,
    inertia: &Matrix3<f64>,
) -> [f64; 6] {
    let (k1, k2, k_prime) = lamb_k_factors(length, diameter);
    [
        mass * k1,
        mass * k2,
        mass * k2,
        0.0,
        k_prime * inertia[(1, 1)],
        k_prime * inertia[(2, 2)],
    ]
}

/// Ambient water properties.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub rho: f64,
    pub gravity: f64,
    /// World-frame current, m/s.
    pub current: Vector3<f64>,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            rho: 1026.0,
            gravity: 9.81,
            current: Vector3::zeros(),
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(invalid("rho", "must be positive"));
        }
        if !(self.gravity.is_finite() && self.gravity > 0.0) {
            return Err(invalid("gravity", "must be positive"));
        }
        if self.current.iter().any(|v| !v.is_finite()) {
            return Err(invalid("current", "must be finite"));
        }
        Ok(())
    }
}

/// Generalized force in the body frame, torque about the center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            force: v.fixed_rows::<3>(0).into_owned(),
            torque: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.force);
        v.fixed_rows_mut::<3>(3).copy_from(&self.torque);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.force
            .iter()
            .chain(self.torque.iter())
            .all(|v| v.is_finite())
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench {
            force: self.force + rhs.force,
            torque: self.torque + rhs.torque,
        }
    }
}

impl AddAssign for Wrench {
    fn add_assign(&mut self, rhs: Wrench) {
        self.force += rhs.force;
        self.torque += rhs.torque;
    }
}

impl Mul<f64> for Wrench {
    type Output = Wrench;
    fn mul(self, rhs: f64) -> Wrench {
        Wrench {
            force: self.force * rhs,
            torque: self.torque * rhs,
        }
    }
}

impl Sum for Wrench {
    fn sum<I: Iterator<Item = Wrench>>(iter: I) -> Wrench {
        iter.fold(Wrench::zero(), |acc, w| acc + w)
    }
}

/// `M = M_RB + M_A` with `M_RB = blockdiag(m I3, I_g)`.
pub fn build_system_inertia(params: &HydroParams) -> Result<Matrix6<f64>, ParamError> {
    params.validate()?;
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(Matrix3::identity() * params.mass));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&params.inertia);
    let added = params.effective_added_mass();
    for (i, a) in added.iter().enumerate() {
        m[(i, i)] += a;
    }
    if Cholesky::new(m).is_none() {
        return Err(ParamError::InertiaNotPositiveDefinite);
    }
    Ok(m)
}

/// Coriolis-centripetal matrix from the momentum `M nu_r`.
///
/// The result is skew-symmetric for any symmetric `M`.
pub fn coriolis(m: &Matrix6<f64>, nu_r: &Vector6<f64>) -> Matrix6<f64> {
    let m = 0.5 * (m + m.transpose());
    let m11 = m.fixed_view::<3, 3>(0, 0);
    let m12 = m.fixed_view::<3, 3>(0, 3);
    let m21 = m.fixed_view::<3, 3>(3, 0);
    let m22 = m.fixed_view::<3, 3>(3, 3);
    let nu1 = nu_r.fixed_rows::<3>(0);
    let nu2 = nu_r.fixed_rows::<3>(3);
    let linear_momentum = m11 * nu1 + m12 * nu2;
    let angular_momentum = m21 * nu1 + m22 * nu2;
    let s1 = skew(&linear_momentum);
    let s2 = skew(&angular_momentum);

    let mut c = Matrix6::zeros();
    c.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-s1));
    c.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-s1));
    c.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-s2));
    c
}

/// `D(nu_r) nu_r` with diagonal linear plus diagonal quadratic damping.
/// This is a left-hand-side term: it opposes motion once moved across.
pub fn damping_wrench(params: &HydroParams, nu_r: &Vector6<f64>) -> Vector6<f64> {
    Vector6::from_fn(|i, _| {
        let v = nu_r[i];
        (params.linear_damping[i] + params.quadratic_damping[i] * v.abs()) * v
    })
}

/// Restoring vector `g(eta)` for a COM-origin body with buoyancy acting at `r_b`.
pub fn restoring_wrench(params: &HydroParams, attitude: &UnitQuaternion<f64>) -> Vector6<f64> {
    let (phi, theta, _) = attitude.euler_angles();
    let (sphi, cphi) = phi.sin_cos();
    let (sth, cth) = theta.sin_cos();
    let net = params.weight - params.buoyancy;
    let force = Vector3::new(net * sth, -net * cth * sphi, -net * cth * cphi);
    // Buoyancy (world -z) expressed in the body frame.
    let buoyancy_body = Vector3::new(
        params.buoyancy * sth,
        -params.buoyancy * cth * sphi,
        -params.buoyancy * cth * cphi,
    );
    let moment = -params.r_b.cross(&buoyancy_body);
    let mut g = Vector6::zeros();
    g.fixed_rows_mut::<3>(0).copy_from(&force);
    g.fixed_rows_mut::<3>(3).copy_from(&moment);
    g
}

/// Body velocity relative to the water.
pub fn relative_velocity(state: &VehicleState, env: &Environment) -> Vector6<f64> {
    let current_body = state.attitude.inverse_transform_vector(&env.current);
    let mut nu_r = state.nu;
    for i in 0..3 {
        nu_r[i] -= current_body[i];
    }
    nu_r
}

/// Validated hull model with the factored system inertia cached.
#[derive(Debug, Clone)]
pub struct HydroModel {
    params: HydroParams,
    m: Matrix6<f64>,
    m_chol: Cholesky<f64, U6>,
}

impl HydroModel {
    pub fn new(params: HydroParams) -> Result<Self, ParamError> {
        let m = build_system_inertia(&params)?;
        let m_chol = Cholesky::new(m).ok_or(ParamError::InertiaNotPositiveDefinite)?;
        Ok(Self { params, m, m_chol })
    }

    pub fn params(&self) -> &HydroParams {
        &self.params
    }

    pub fn system_inertia(&self) -> &Matrix6<f64> {
        &self.m
    }

    /// `tau - C nu_r - D nu_r - g`, the right-hand side before inverting `M`.
    fn forcing(&self, state: &VehicleState, tau: &Wrench, env: &Environment) -> Vector6<f64> {
        let nu_r = relative_velocity(state, env);
        let c = coriolis(&self.m, &nu_r);
        tau.to_vector()
            - c * nu_r
            - damping_wrench(&self.params, &nu_r)
            - restoring_wrench(&self.params, &state.attitude)
    }

    /// Body-frame acceleration `nu_dot`.
    pub fn acceleration(
        &self,
        state: &VehicleState,
        tau: &Wrench,
        env: &Environment,
    ) -> Vector6<f64> {
        self.m_chol.solve(&self.forcing(state, tau, env))
    }

    /// Infinity norm of `M nu_dot + C nu_r + D nu_r + g - tau`.
    pub fn residual(
        &self,
        state: &VehicleState,
        tau: &Wrench,
        env: &Environment,
        nu_dot: &Vector6<f64>,
    ) -> f64 {
        (self.m * nu_dot - self.forcing(state, tau, env)).amax()
    }

    /// `1/2 nu^T M nu`.
    pub fn kinetic_energy(&self, nu: &Vector6<f64>) -> f64 {
        0.5 * nu.dot(&(self.m * nu))
    }
}

/// Free-function form of [`HydroModel::acceleration`]; builds the model on
/// every call, so prefer the cached model in loops.
pub fn acceleration(
    state: &VehicleState,
    tau: &Wrench,
    params: &HydroParams,
    env: &Environment,
) -> Result<Vector6<f64>, ParamError> {
    Ok(HydroModel::new(params.clone())?.acceleration(state, tau, env))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn neutral(mass: f64, added: [f64; 6]) -> HydroParams {
        HydroParams {
            mass,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.2, 3.0, 3.0)),
            length: 1.6,
            diameter: 0.19,
            added_mass: Some(added),
            linear_damping: [0.0; 6],
            quadratic_damping: [0.0; 6],
            weight: 300.0,
            buoyancy: 300.0,
            r_b: Vector3::zeros(),
        }
    }

    #[test]
    fn inertia_is_block_diagonal_at_com() {
        let m = build_system_inertia(&neutral(30.0, [0.0; 6])).unwrap();
        let top = m.fixed_view::<3, 3>(0, 0);
        assert_eq!(top.into_owned(), Matrix3::identity() * 30.0);
        assert_eq!(m.fixed_view::<3, 3>(0, 3).amax(), 0.0);
        assert_eq!(m.fixed_view::<3, 3>(3, 0).amax(), 0.0);
        assert_eq!(m[(3, 3)], 0.2);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = neutral(30.0, [0.0; 6]);
        p.mass = -1.0;
        assert!(matches!(
            build_system_inertia(&p),
            Err(ParamError::Invalid { field: "mass", .. })
        ));
        let mut p = neutral(30.0, [0.0; 6]);
        p.inertia[(1, 1)] = -3.0;
        assert!(HydroModel::new(p).is_err());
        let mut p = neutral(30.0, [0.0; 6]);
        p.linear_damping[2] = -0.1;
        assert!(HydroModel::new(p).is_err());
    }

    #[test]
    fn coriolis_zero_at_rest() {
        let m = build_system_inertia(&neutral(30.0, [1.0; 6])).unwrap();
        assert_eq!(coriolis(&m, &Vector6::zeros()), Matrix6::zeros());
    }

    #[test]
    fn coriolis_pure_surge_produces_no_force() {
        let m = build_system_inertia(&neutral(30.0, [0.0; 6])).unwrap();
        let nu = Vector6::new(1.3, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!((coriolis(&m, &nu) * nu).amax(), 0.0);
    }

    #[test]
    fn damping_examples() {
        let mut p = neutral(30.0, [0.0; 6]);
        p.linear_damping[0] = 2.0;
        let d = damping_wrench(&p, &Vector6::new(1.5, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(d[0], 3.0);

        let mut p = neutral(30.0, [0.0; 6]);
        p.quadratic_damping[0] = 10.0;
        let d = damping_wrench(&p, &Vector6::new(-2.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(d[0], -40.0);
        assert!(-2.0 * -d[0] < 0.0);
        assert_eq!(damping_wrench(&p, &Vector6::zeros()), Vector6::zeros());
    }

    #[test]
    fn restoring_neutral_collocated_is_zero() {
        let p = neutral(30.0, [0.0; 6]);
        let q = UnitQuaternion::from_euler_angles(0.3, -0.2, 1.0);
        assert_eq!(restoring_wrench(&p, &q).amax(), 0.0);
    }

    #[test]
    fn restoring_pitch_moment_opposes_pitch() {
        let mut p = neutral(30.0, [0.0; 6]);
        p.r_b = Vector3::new(0.0, 0.0, -0.02);
        let q = UnitQuaternion::from_euler_angles(0.0, 0.1, 0.0);
        let g = restoring_wrench(&p, &q);
        assert_relative_eq!(g[4], 0.02 * 300.0 * 0.1f64.sin(), epsilon = 1e-12);
        assert_relative_eq!(g[4], 0.599, epsilon = 1e-3);
        // On the forcing side the moment is -g: nose-down for positive pitch.
        let model = HydroModel::new(p).unwrap();
        let state = VehicleState {
            attitude: q,
            ..VehicleState::default()
        };
        let acc = model.acceleration(&state, &Wrench::zero(), &Environment::default());
        assert!(acc[4] < 0.0);
    }

    #[test]
    fn restoring_heave_sign_when_positively_buoyant() {
        let mut p = neutral(30.0, [0.0; 6]);
        p.weight = 295.0;
        let g = restoring_wrench(&p, &UnitQuaternion::identity());
        assert_eq!(g[2], 5.0);
        // Net force on the vehicle (-g) points up (negative z).
        assert_eq!(-g[2], -5.0);
    }

    #[test]
    fn relative_velocity_examples() {
        let mut env = Environment::default();
        let state = VehicleState::new(
            Vector3::zeros(),
            [0.0, 0.0, 0.0],
            Vector6::new(0.1, 0.2, 0.3, 0.4, 0.5, 0.6),
        );
        assert_eq!(relative_velocity(&state, &env), state.nu);

        env.current = Vector3::new(0.5, 0.0, 0.0);
        let still = VehicleState::default();
        assert_eq!(
            relative_velocity(&still, &env),
            Vector6::new(-0.5, 0.0, 0.0, 0.0, 0.0, 0.0)
        );

        // Heading east in a northward current the hull slides south through
        // the water, which is to starboard.
        let turned = VehicleState::new(Vector3::zeros(), [0.0, 0.0, FRAC_PI_2], Vector6::zeros());
        let nu_r = relative_velocity(&turned, &env);
        assert_relative_eq!(
            nu_r,
            Vector6::new(0.0, 0.5, 0.0, 0.0, 0.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn acceleration_equilibrium_and_surge() {
        let p = neutral(30.0, [0.0; 6]);
        let env = Environment::default();
        let acc = acceleration(&VehicleState::default(), &Wrench::zero(), &p, &env).unwrap();
        assert_eq!(acc, Vector6::zeros());

        let p = neutral(30.0, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let tau = Wrench::new(Vector3::new(10.0, 0.0, 0.0), Vector3::zeros());
        let acc = acceleration(&VehicleState::default(), &tau, &p, &env).unwrap();
        assert_relative_eq!(acc[0], 10.0 / 31.0, epsilon = 1e-15);
        assert_relative_eq!(acc.remove_row(0).amax(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn k_factors_match_known_remus_values() {
        let (k1, k2, kp) = lamb_k_factors(1.6, 0.19);
        assert_relative_eq!(k1, 0.027035940093302797, epsilon = 1e-12);
        assert_relative_eq!(k2, 0.9487019042979944, epsilon = 1e-12);
        assert_relative_eq!(kp, 0.850647056783159, epsilon = 1e-12);
    }
}
