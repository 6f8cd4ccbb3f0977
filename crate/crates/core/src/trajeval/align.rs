use nalgebra::{Matrix3, Vector3, SVD};
use serde::{Deserialize, Serialize};

use super::{PairedTrajectory, TrajError};

/// Relative threshold on the second singular value of the cross-covariance
/// below which the point configuration is treated as collinear.
const RANK_TOLERANCE: f64 = 1e-12;

/// `x ↦ scale · rotation · x + translation`, mapping estimated positions
/// into the reference frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
            scale: 1.0 / self.scale,
        }
    }
}

/// Closed-form least-squares registration of estimated positions onto
/// reference positions (cross-covariance SVD with reflection correction).
///
/// With `with_scale = false` the result is rigid (scale 1).
pub fn align(pairs: &PairedTrajectory, with_scale: bool) -> Result<SimilarityTransform, TrajError> {
    let n = pairs.len();
    if n < 3 {
        return Err(TrajError::TooFewPairs { found: n });
    }
    let inv_n = 1.0 / n as f64;
    let mean_est = pairs
        .pairs
        .iter()
        .fold(Vector3::zeros(), |acc, (e, _)| acc + e.position)
        * inv_n;
    let mean_ref = pairs
        .pairs
        .iter()
        .fold(Vector3::zeros(), |acc, (_, r)| acc + r.position)
        * inv_n;

    let mut cov = Matrix3::<f64>::zeros();
    let mut var_est = 0.0;
    for (e, r) in &pairs.pairs {
        let de = e.position - mean_est;
        let dr = r.position - mean_ref;
        cov += dr * de.transpose();
        var_est += de.norm_squared();
    }
    cov *= inv_n;
    var_est *= inv_n;

    let svd = SVD::new(cov, true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(TrajError::DegenerateGeometry),
    };
    let sv = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let (largest, middle, smallest) = (sv[order[0]], sv[order[1]], order[2]);
    if !(largest > 0.0) || middle <= RANK_TOLERANCE * largest {
        return Err(TrajError::DegenerateGeometry);
    }

    let mut s = Matrix3::<f64>::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        s[(smallest, smallest)] = -1.0;
    }
    let rotation = u * s * v_t;
    let scale = if with_scale {
        if var_est <= 0.0 {
            return Err(TrajError::DegenerateGeometry);
        }
        let trace: f64 = (0..3).map(|i| sv[i] * s[(i, i)]).sum();
        trace / var_est
    } else {
        1.0
    };
    if !(scale > 0.0) {
        return Err(TrajError::DegenerateGeometry);
    }
    let translation = mean_ref - scale * (rotation * mean_est);
    Ok(SimilarityTransform {
        rotation,
        translation,
        scale,
    })
}
