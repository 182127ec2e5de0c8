use super::{Scheme, StepCoefficients};
use crate::secure::{SecureArithmetic, SecureArray, SecureMatrix, SecureVector};
use crate::{Error, Result};

/// Solution state of a 1D or 2D run.
#[derive(Debug, Clone, PartialEq)]
pub enum SecureField {
    Vector(SecureVector),
    Matrix(SecureMatrix),
}

impl SecureField {
    pub fn level(&self) -> usize {
        match self {
            SecureField::Vector(v) => v.level(),
            SecureField::Matrix(m) => m.level(),
        }
    }

    pub fn maybe_refresh(&self, sa: &SecureArithmetic, l_step: usize) -> Result<SecureField> {
        Ok(match self {
            SecureField::Vector(v) => SecureField::Vector(sa.maybe_refresh(v, l_step)?),
            SecureField::Matrix(m) => SecureField::Matrix(sa.maybe_refresh(m, l_step)?),
        })
    }

    /// Values in packing order.
    pub fn decrypt(&self, sa: &SecureArithmetic) -> Result<Vec<f64>> {
        match self {
            SecureField::Vector(v) => sa.dec_vector(v),
            SecureField::Matrix(m) => sa.dec_matrix_packed(m),
        }
    }
}

/// `u - cx·(u - circshift(u, 1))`
pub fn step_upwind_1d(sa: &SecureArithmetic, u: &SecureVector, c: &StepCoefficients) -> Result<SecureVector> {
    let back = sa.circshift_vec(u, 1)?;
    let diff = sa.ew_sub(u, &back)?;
    let flux = sa.scale_by(&diff, c.cx)?;
    sa.ew_sub(u, &flux)
}

/// `c0·u + c₋·circshift(u, -1) + c₊·circshift(u, 1)`
pub fn step_lw_1d(sa: &SecureArithmetic, u: &SecureVector, c: &StepCoefficients) -> Result<SecureVector> {
    let (cm, cp) = c.lw_x();
    let center = sa.scale_by(u, c.lw_center())?;
    let minus = sa.scale_by(&sa.circshift_vec(u, -1)?, cm)?;
    let plus = sa.scale_by(&sa.circshift_vec(u, 1)?, cp)?;
    sa.ew_add(&sa.ew_add(&center, &minus)?, &plus)
}

/// `u - cx·(u - circshift(u, 1, 0)) - cy·(u - circshift(u, 0, 1))`
pub fn step_upwind_2d(sa: &SecureArithmetic, u: &SecureMatrix, c: &StepCoefficients) -> Result<SecureMatrix> {
    let sx = sa.circshift_mat(u, 1, 0)?;
    let fx = sa.scale_by(&sa.ew_sub(u, &sx)?, c.cx)?;
    let sy = sa.circshift_mat(u, 0, 1)?;
    let fy = sa.scale_by(&sa.ew_sub(u, &sy)?, c.cy)?;
    sa.ew_sub(&sa.ew_sub(u, &fx)?, &fy)
}

/// Nine-point Lax-Wendroff update including the mixed-derivative corners.
pub fn step_lw_2d(sa: &SecureArithmetic, u: &SecureMatrix, c: &StepCoefficients) -> Result<SecureMatrix> {
    let (xm, xp) = c.lw_x();
    let (ym, yp) = c.lw_y();
    let shifted = |k: i64, l: i64, w: f64| -> Result<SecureMatrix> { sa.scale_by(&sa.circshift_mat(u, k, l)?, w) };
    let mut acc = sa.scale_by(u, c.lw_center())?;
    for (k, l, w) in [(-1, 0, xm), (1, 0, xp), (0, -1, ym), (0, 1, yp)] {
        acc = sa.ew_add(&acc, &shifted(k, l, w)?)?;
    }
    let mm = sa.circshift_mat(u, -1, -1)?;
    let mp = sa.circshift_mat(u, -1, 1)?;
    let pm = sa.circshift_mat(u, 1, -1)?;
    let pp = sa.circshift_mat(u, 1, 1)?;
    let corner = sa.ew_add(&sa.ew_sub(&sa.ew_sub(&mm, &mp)?, &pm)?, &pp)?;
    let corner = sa.scale_by(&corner, c.lw_cross())?;
    sa.ew_add(&acc, &corner)
}

/// One step of the configured scheme.
pub fn step(sa: &SecureArithmetic, u: &SecureField, c: &StepCoefficients) -> Result<SecureField> {
    match (u, c.dim) {
        (SecureField::Vector(_), 1) | (SecureField::Matrix(_), 2) => {}
        _ => return Err(Error::ShapeMismatch(format!("{}D coefficients for the wrong field type", c.dim))),
    }
    Ok(match (u, c.scheme) {
        (SecureField::Vector(v), Scheme::Upwind) => SecureField::Vector(step_upwind_1d(sa, v, c)?),
        (SecureField::Vector(v), Scheme::LaxWendroff) => SecureField::Vector(step_lw_1d(sa, v, c)?),
        (SecureField::Matrix(m), Scheme::Upwind) => SecureField::Matrix(step_upwind_2d(sa, m, c)?),
        (SecureField::Matrix(m), Scheme::LaxWendroff) => SecureField::Matrix(step_lw_2d(sa, m, c)?),
    })
}
