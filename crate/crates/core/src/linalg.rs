//! Dense least squares via SVD with column equilibration.

use nalgebra::DMatrix;

use crate::error::{GreyError, Result};

/// Relative singular-value threshold below which a design is rejected.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares coefficients `C` minimizing `||X - Theta C||_F`.
#[derive(Debug, Clone)]
pub struct LsSolution {
    pub coefficients: DMatrix<f64>,
    /// `(s_max / s_min)^2` of the equilibrated design, i.e. the condition of the normal matrix.
    pub condition: f64,
    pub residuals: DMatrix<f64>,
}

struct Scaled {
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    scale: Vec<f64>,
    ratio: f64,
}

fn factorize(theta: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<Scaled> {
    if theta.nrows() != x.nrows() {
        return Err(GreyError::Dimension(format!(
            "design has {} rows, targets have {}",
            theta.nrows(),
            x.nrows()
        )));
    }
    if theta.ncols() == 0 || theta.nrows() < theta.ncols() {
        return Err(GreyError::InvalidSeries(format!(
            "underdetermined regression: {} equations for {} unknowns",
            theta.nrows(),
            theta.ncols()
        )));
    }
    if theta.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(GreyError::Domain("non-finite regression entry".into()));
    }
    let mut scaled = theta.clone();
    let mut scale = Vec::with_capacity(theta.ncols());
    for j in 0..theta.ncols() {
        let norm = theta.column(j).norm();
        let s = if norm > 0.0 { norm } else { 1.0 };
        scaled.column_mut(j).unscale_mut(s);
        scale.push(s);
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    Ok(Scaled { svd, scale, ratio })
}

fn finish(theta: &DMatrix<f64>, x: &DMatrix<f64>, f: &Scaled, tol: f64) -> Result<LsSolution> {
    let mut coef = f
        .svd
        .solve(x, tol)
        .map_err(|e| GreyError::InvalidArgument(e.to_string()))?;
    for (j, s) in f.scale.iter().enumerate() {
        coef.row_mut(j).unscale_mut(*s);
    }
    let residuals = x - theta * &coef;
    let condition = if f.ratio > 0.0 { (1.0 / f.ratio).powi(2) } else { f64::INFINITY };
    Ok(LsSolution {
        coefficients: coef,
        condition,
        residuals,
    })
}

/// Full-rank least squares; fails with [`GreyError::SingularDesign`] when
/// `s_min / s_max < 1e-10` after column equilibration.
pub fn least_squares_solve(theta: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<LsSolution> {
    let f = factorize(theta, x)?;
    if !(f.ratio >= RANK_TOLERANCE) {
        let condition = if f.ratio > 0.0 { (1.0 / f.ratio).powi(2) } else { f64::INFINITY };
        return Err(GreyError::SingularDesign { condition });
    }
    finish(theta, x, &f, 0.0)
}

/// Minimum-norm solution (in equilibrated column coordinates) that truncates
/// singular values below `1e-10 s_max`.
/// Used where exact collinearity is a legitimate outcome (power exponent 1).
pub fn least_squares_min_norm(theta: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<LsSolution> {
    let f = factorize(theta, x)?;
    let smax = f.svd.singular_values.max();
    if smax == 0.0 {
        return Err(GreyError::SingularDesign {
            condition: f64::INFINITY,
        });
    }
    finish(theta, x, &f, RANK_TOLERANCE * smax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_system() {
        let a = dmatrix![2.0, 1.0; 1.0, 3.0];
        let b = dmatrix![3.0; 5.0];
        let s = least_squares_solve(&a, &b).unwrap();
        assert_relative_eq!(s.coefficients[0], 0.8, epsilon = 1e-12);
        assert_relative_eq!(s.coefficients[1], 1.4, epsilon = 1e-12);
    }

    #[test]
    fn zero_residual_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = DMatrix::from_fn(20, 4, |_, _| rng.random_range(-1.0..1.0));
        let c = dmatrix![1.0, -2.0; 0.5, 0.25; 3.0, 0.0; -1.5, 7.0];
        let x = &theta * &c;
        let s = least_squares_solve(&theta, &x).unwrap();
        assert!((s.coefficients - c).amax() < 1e-10);
        assert!(s.residuals.amax() < 1e-10);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta = DMatrix::from_fn(30, 5, |_, _| rng.random_range(-1.0..1.0));
        let x = DMatrix::from_fn(30, 2, |_, _| rng.random_range(-1.0..1.0));
        let s = least_squares_solve(&theta, &x).unwrap();
        let gram = theta.transpose() * &theta;
        let oracle = gram.try_inverse().unwrap() * theta.transpose() * &x;
        assert!((s.coefficients - oracle).amax() < 1e-8);
        // normal-equation orthogonality
        assert!((theta.transpose() * s.residuals).amax() < 1e-10);
    }

    #[test]
    fn rank_deficient_rejected() {
        let theta = dmatrix![1.0, 2.0; 2.0, 4.0; 3.0, 6.0];
        let x = dmatrix![1.0; 2.0; 3.0];
        let err = least_squares_solve(&theta, &x).unwrap_err();
        assert!(matches!(err, GreyError::SingularDesign { .. }));
        let s = least_squares_min_norm(&theta, &x).unwrap();
        assert!(s.residuals.amax() < 1e-12);
        // minimum norm in equilibrated coordinates splits weight equally
        assert_relative_eq!(s.coefficients[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.coefficients[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn wide_design_rejected() {
        let theta = DMatrix::<f64>::zeros(2, 3);
        assert!(least_squares_solve(&theta, &DMatrix::zeros(2, 1)).is_err());
    }
}
