use nalgebra::{DMatrix, DVector};

use super::ContactSet;
use crate::dynamics::DynamicsTerms;
use crate::error::{Error, Result};

/// Contact-space dynamics g̈ = G·f + c for the stacked contact forces f.
#[derive(Debug, Clone, PartialEq)]
pub struct DelassusSystem {
    /// Jc M⁻¹ Jcᵀ, the apparent inverse inertia at the contacts.
    pub g: DMatrix<f64>,
    /// J̇c u + Jc M⁻¹ h, the contact acceleration with zero contact force.
    pub c: DVector<f64>,
}

impl DelassusSystem {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let sym = 0.5 * (&self.g + self.g.transpose());
        sym.symmetric_eigenvalues().min()
    }

    /// ½ fᵀ G f + fᵀ c.
    pub fn objective(&self, f: &DVector<f64>) -> f64 {
        0.5 * f.dot(&(&self.g * f)) + f.dot(&self.c)
    }
}

/// Builds the Delassus system for a contact set that carries Jacobians.
/// J̇c·u uses the analytic velocity-product acceleration of the contact
/// material points in a contact frame frozen over the instant.
pub fn delassus(set: &ContactSet, terms: &DynamicsTerms) -> Result<DelassusSystem> {
    let chol = terms.mass.cholesky().ok_or(Error::SingularMassMatrix)?;
    let m = set.len();
    if m == 0 {
        return Ok(DelassusSystem {
            g: DMatrix::zeros(0, 0),
            c: DVector::zeros(0),
        });
    }
    if set.points.iter().any(|p| p.jacobian.is_none()) {
        return Err(Error::InvalidInput("contact set lacks Jacobians".into()));
    }
    let jc = set.stacked_jacobian();
    let n = terms.mass.nrows();
    let mut minv_jt = DMatrix::zeros(n, 3 * m);
    for col in 0..3 * m {
        let rhs = nalgebra::SVector::<f64, { crate::model::NV }>::from_iterator(jc.row(col).iter().copied());
        let sol = chol.solve(&rhs);
        minv_jt.column_mut(col).copy_from(&sol);
    }
    let mut g = &jc * &minv_jt;
    // exact symmetry
    g = 0.5 * (&g + g.transpose());
    let minv_h = chol.solve(&terms.bias);
    let h_part = &jc * DVector::from_column_slice(minv_h.as_slice());
    let mut c = DVector::zeros(3 * m);
    for (i, p) in set.points.iter().enumerate() {
        c.fixed_rows_mut::<3>(3 * i).copy_from(&p.bias_acceleration);
    }
    c += h_part;
    Ok(DelassusSystem { g, c })
}
