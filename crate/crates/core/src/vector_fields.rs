//! The vector fields `J(t) = x − 3t∂_x²` and `P = x∂_x + 3t∂_t`, the
//! auxiliary variable `v = Ju + 3μt|u|^{2α}u`, and residuals of the
//! equations they satisfy along a computed trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{projected_power, rhs_time_derivative, Trajectory};
use crate::field::RealField;
use crate::model::ModelParams;
use crate::spectral::{
    airy_propagate, derivative, forward_transform, inverse_transform, multiply_by_x,
    multiply_by_x_flagged, spatial_derivative, Weighted,
};

/// Floor added to every residual denominator.
pub const RESIDUAL_FLOOR: f64 = 1e-14;

/// `J(t)u = x·u − 3t·∂_x²u`.
pub fn apply_j_local(u: &RealField, t: f64) -> Result<RealField> {
    let xu = multiply_by_x(u);
    if t == 0.0 {
        return Ok(xu);
    }
    let uxx = derivative(u, 2)?;
    Ok(xu.axpby(1.0, &uxx, -3.0 * t))
}

/// [`apply_j_local`] with the boundary-mass advisory attached.
pub fn apply_j_local_flagged(u: &RealField, t: f64) -> Result<Weighted> {
    let w = multiply_by_x_flagged(u);
    Ok(Weighted {
        field: apply_j_local(u, t)?,
        ..w
    })
}

/// `J(t)u = V(t)·x·V(−t)u`.
pub fn apply_j_conjugated(u: &RealField, t: f64) -> Result<RealField> {
    if t == 0.0 {
        return Ok(multiply_by_x(u));
    }
    let back = inverse_transform(&airy_propagate(&forward_transform(u)?, -t))?;
    let weighted = multiply_by_x(&back);
    inverse_transform(&airy_propagate(&forward_transform(&weighted)?, t))
}

/// `v = J(t)u + 3μt|u|^{2α}u`.
pub fn compute_v(u: &RealField, t: f64, params: &ModelParams) -> Result<RealField> {
    let ju = apply_j_local(u, t)?;
    if t == 0.0 {
        return Ok(ju);
    }
    Ok(ju.axpby(1.0, &params.power_field(u), 3.0 * params.mu * t))
}

// `v` with the power taken through the solver's dealiasing projection, so
// that `∂_x³` of it does not amplify aliasing of the non-polynomial power.
fn solver_v(u: &RealField, t: f64, params: &ModelParams) -> Result<RealField> {
    let ju = apply_j_local(u, t)?;
    Ok(ju.axpby(1.0, &projected_power(u, params)?, 3.0 * params.mu * t))
}

/// `Pu = x∂_x u + 3t∂_t u` with `∂_t u` from the equation itself.
pub fn compute_pu(u: &RealField, t: f64, params: &ModelParams) -> Result<RealField> {
    let xux = multiply_by_x(&derivative(u, 1)?);
    if t == 0.0 {
        return Ok(xux);
    }
    let ut = rhs_time_derivative(u, params)?;
    Ok(xux.axpby(1.0, &ut, 3.0 * t))
}

/// `‖∂_x v − Pu − u‖ / max(‖Pu‖, ε)`.
pub fn identity_residual_puv(u: &RealField, t: f64, params: &ModelParams) -> Result<f64> {
    let vx = derivative(&compute_v(u, t, params)?, 1)?;
    let pu = compute_pu(u, t, params)?;
    let defect = vx.sub(&pu).sub(u).l2_norm();
    Ok(defect / pu.l2_norm().max(RESIDUAL_FLOOR))
}

/// The three derived evolution equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivedEquation {
    /// `v_t + v_xxx = (2α+1)μ|u|^{2α}v_x − 2(α−1)μ|u|^{2α}u`
    V,
    /// `(Ju)_t + (Ju)_xxx = (2α+1)μ|u|^{2α}Pu − 3μt(∂_t + ∂_x³)(|u|^{2α}u)`
    Ju,
    /// `(Pu)_t + (Pu)_xxx = (2α+1)μ∂_x(|u|^{2α}Pu) + 2μ∂_x(|u|^{2α}u)`
    Pu,
}

impl DerivedEquation {
    pub const ALL: [DerivedEquation; 3] = [Self::V, Self::Ju, Self::Pu];

    pub fn name(&self) -> &'static str {
        match self {
            Self::V => "v",
            Self::Ju => "Ju",
            Self::Pu => "Pu",
        }
    }
}

fn dxxx(u: &RealField) -> Result<RealField> {
    inverse_transform(&spatial_derivative(&forward_transform(u)?, 3)?)
}

fn centered(prev: &RealField, next: &RealField, span: f64) -> RealField {
    next.axpby(1.0 / span, prev, -1.0 / span)
}

fn relative(lhs: &RealField, rhs: &RealField, dispersive: &RealField) -> f64 {
    let defect = lhs.sub(rhs).l2_norm();
    defect / (rhs.l2_norm() + dispersive.l2_norm() + RESIDUAL_FLOOR)
}

/// Residual of `eq` at stored slice `i`, with time derivatives replaced by
/// centered differences between slices `i − lag` and `i + lag`.
///
/// Normalized by `‖RHS‖ + ‖∂_x³ W‖` where `W` is the evolved quantity.
pub fn equation_residual(traj: &Trajectory, eq: DerivedEquation, i: usize, lag: usize) -> Result<f64> {
    if lag == 0 || i < lag || i + lag >= traj.len() {
        return Err(Error::Resolution(format!(
            "slice {i} with lag {lag} needs neighbours inside 0..{}",
            traj.len()
        )));
    }
    if !traj.is_uniform() {
        return Err(Error::NonuniformStride);
    }
    let params = &traj.params;
    let (a, s, b) = (&traj.slices[i - lag], &traj.slices[i], &traj.slices[i + lag]);
    let span = b.t - a.t;
    let c = 2.0 * params.alpha + 1.0;
    let weight = params.weight_field(&s.u);

    match eq {
        DerivedEquation::V => {
            let v = solver_v(&s.u, s.t, params)?;
            let vt = centered(&solver_v(&a.u, a.t, params)?, &solver_v(&b.u, b.t, params)?, span);
            let v3 = dxxx(&v)?;
            let vx = derivative(&v, 1)?;
            let rhs = weight
                .zip_with(&vx, |w, d| c * params.mu * w * d)
                .axpby(1.0, &projected_power(&s.u, params)?, -2.0 * (params.alpha - 1.0) * params.mu);
            Ok(relative(&vt.add(&v3), &rhs, &v3))
        }
        DerivedEquation::Ju => {
            let ju = apply_j_local(&s.u, s.t)?;
            let jut = centered(&apply_j_local(&a.u, a.t)?, &apply_j_local(&b.u, b.t)?, span);
            let ju3 = dxxx(&ju)?;
            let pu = compute_pu(&s.u, s.t, params)?;
            let n = projected_power(&s.u, params)?;
            let nt = centered(&projected_power(&a.u, params)?, &projected_power(&b.u, params)?, span);
            let ln = nt.add(&dxxx(&n)?);
            let rhs = weight
                .zip_with(&pu, |w, p| c * params.mu * w * p)
                .axpby(1.0, &ln, -3.0 * params.mu * s.t);
            Ok(relative(&jut.add(&ju3), &rhs, &ju3))
        }
        DerivedEquation::Pu => {
            let pu = compute_pu(&s.u, s.t, params)?;
            let put = centered(&compute_pu(&a.u, a.t, params)?, &compute_pu(&b.u, b.t, params)?, span);
            let pu3 = dxxx(&pu)?;
            let wp = weight.zip_with(&pu, |w, p| w * p);
            let rhs = derivative(&wp, 1)?
                .axpby(c * params.mu, &derivative(&projected_power(&s.u, params)?, 1)?, 2.0 * params.mu);
            Ok(relative(&put.add(&pu3), &rhs, &pu3))
        }
    }
}

pub fn v_equation_residual(traj: &Trajectory, i: usize) -> Result<f64> {
    equation_residual(traj, DerivedEquation::V, i, 1)
}

pub fn ju_equation_residual(traj: &Trajectory, i: usize) -> Result<f64> {
    equation_residual(traj, DerivedEquation::Ju, i, 1)
}

pub fn pu_equation_residual(traj: &Trajectory, i: usize) -> Result<f64> {
    equation_residual(traj, DerivedEquation::Pu, i, 1)
}

/// Per-slice vector-field diagnostics.
#[derive(Clone, Debug)]
pub struct VectorFieldSlice {
    pub t: f64,
    pub ju: RealField,
    pub v: RealField,
    pub pu: RealField,
    pub residual_puv: f64,
    /// `None` at the first and last stored slice.
    pub residual_v_eq: Option<f64>,
    pub residual_ju_eq: Option<f64>,
    pub residual_pu_eq: Option<f64>,
}

pub fn vector_field_slice(traj: &Trajectory, i: usize) -> Result<VectorFieldSlice> {
    let s = &traj.slices[i];
    let p = &traj.params;
    let interior = i > 0 && i + 1 < traj.len() && traj.is_uniform();
    let eq = |e| -> Result<Option<f64>> {
        if interior {
            equation_residual(traj, e, i, 1).map(Some)
        } else {
            Ok(None)
        }
    };
    Ok(VectorFieldSlice {
        t: s.t,
        ju: apply_j_local(&s.u, s.t)?,
        v: compute_v(&s.u, s.t, p)?,
        pu: compute_pu(&s.u, s.t, p)?,
        residual_puv: identity_residual_puv(&s.u, s.t, p)?,
        residual_v_eq: eq(DerivedEquation::V)?,
        residual_ju_eq: eq(DerivedEquation::Ju)?,
        residual_pu_eq: eq(DerivedEquation::Pu)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{evolve, StepperConfig, StoreStride};
    use crate::grid::GridSpec;
    use crate::initial::make_gaussian;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 1.8).unwrap()
    }

    #[test]
    fn j_at_time_zero_is_x() {
        let g = GridSpec::test_default();
        let u = make_gaussian(g, 1.0, 0.3, 1.0).unwrap();
        let xu = multiply_by_x(&u);
        assert_eq!(apply_j_local(&u, 0.0).unwrap(), xu);
        assert_eq!(apply_j_conjugated(&u, 0.0).unwrap(), xu);
        assert_eq!(compute_v(&u, 0.0, &params()).unwrap(), xu);
        let z = RealField::zeros(g);
        assert_eq!(apply_j_local(&z, 2.0).unwrap().max_abs(), 0.0);
        assert_eq!(compute_v(&z, 2.0, &params()).unwrap().max_abs(), 0.0);
        assert_eq!(compute_pu(&z, 2.0, &params()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn pu_at_time_zero() {
        let g = GridSpec::test_default();
        let u = make_gaussian(g, 1.0, 0.0, 1.0).unwrap();
        let expect = multiply_by_x(&derivative(&u, 1).unwrap());
        assert_eq!(compute_pu(&u, 0.0, &params()).unwrap(), expect);
    }

    #[test]
    fn ju_of_even_data_is_odd() {
        let g = GridSpec::test_default();
        let u = make_gaussian(g, 1.0, 0.0, 1.0).unwrap();
        let ju = apply_j_local(&u, 0.0).unwrap();
        assert!(ju.inner(&u).abs() < 1e-12);
    }

    #[test]
    fn local_and_conjugated_agree() {
        let g = GridSpec::new(8192, 1024.0).unwrap();
        let u = make_gaussian(g, 1.0, 0.0, 1.0).unwrap();
        let a = apply_j_local(&u, 1.0).unwrap();
        let b = apply_j_conjugated(&u, 1.0).unwrap();
        let rel = a.sub(&b).l2_norm() / a.l2_norm();
        assert!(rel < 1e-8, "{rel:e}");
    }

    #[test]
    fn zero_identity_residual() {
        let z = RealField::zeros(GridSpec::test_default());
        assert_eq!(identity_residual_puv(&z, 1.0, &params()).unwrap(), 0.0);
    }

    #[test]
    fn zero_trajectory_residuals_vanish() {
        let g = GridSpec::new(128, 32.0).unwrap();
        let tr = evolve(&RealField::zeros(g), &params(), &StepperConfig::new(0.01), 0.1, StoreStride::Every(1))
            .unwrap();
        for eq in DerivedEquation::ALL {
            assert_eq!(equation_residual(&tr, eq, 3, 1).unwrap(), 0.0);
        }
        assert!(equation_residual(&tr, DerivedEquation::V, 0, 1).is_err());
    }
}
