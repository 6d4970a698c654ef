//! Least squares on the zero-filled observations.

use nalgebra::{DMatrix, DVector};

use crate::error::{GmwmxError, Result};

/// Largest accepted condition number of the column-equilibrated masked design.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct LsFit {
    pub beta: DVector<f64>,
    /// `ỹ - X̃ β̂`; exactly zero where the mask is zero.
    pub residuals: Vec<f64>,
    /// Condition number of the column-equilibrated masked design.
    pub condition: f64,
}

/// Masked design `X̃ = diag(z) X`.
pub fn masked_design(x: &DMatrix<f64>, mask: &[u8]) -> DMatrix<f64> {
    let mut xm = x.clone();
    for (i, &z) in mask.iter().enumerate() {
        if z == 0 {
            xm.row_mut(i).fill(0.0);
        }
    }
    xm
}

/// `β̂ = (X̃ᵀX̃)⁻¹ X̃ᵀ ỹ` via a QR factorization of the column-equilibrated masked design.
pub fn least_squares_missing(x: &DMatrix<f64>, y_tilde: &[f64], mask: &[u8]) -> Result<LsFit> {
    let (n, p) = x.shape();
    assert_eq!(y_tilde.len(), n, "response length differs from design rows");
    assert_eq!(mask.len(), n, "mask length differs from design rows");
    let mut xm = masked_design(x, mask);
    let mut scale = vec![1.0; p];
    for (c, mut col) in xm.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(GmwmxError::SingularMaskedDesign { condition: f64::INFINITY });
        }
        col /= norm;
        scale[c] = norm;
    }
    if p > n {
        return Err(GmwmxError::SingularMaskedDesign { condition: f64::INFINITY });
    }
    let qr = xm.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(GmwmxError::SingularMaskedDesign { condition });
    }
    let y: DVector<f64> =
        DVector::from_iterator(n, y_tilde.iter().zip(mask).map(|(v, &z)| if z == 0 { 0.0 } else { *v }));
    let qty = qr.q().transpose() * &y;
    let coef = r.solve_upper_triangular(&qty).ok_or(GmwmxError::SingularMaskedDesign { condition })?;
    let fitted = &xm * &coef;
    let residuals = (0..n).map(|i| if mask[i] == 0 { 0.0 } else { y[i] - fitted[i] }).collect();
    let beta = DVector::from_iterator(p, coef.iter().zip(&scale).map(|(b, s)| b / s));
    Ok(LsFit { beta, residuals, condition })
}
