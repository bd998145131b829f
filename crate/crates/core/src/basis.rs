//! Nonlinear basis functions `N(y)` of the unified grey model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GreyError, Result};

/// The nonlinear vector function `N: R^d -> R^p`.
///
/// Quadratic monomials are ordered lexicographically by `(i, j)` with `i <= j`:
/// `[y1^2, y1*y2, ..., y1*yd, y2^2, ..., yd^2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearBasis {
    /// No nonlinear terms (`p = 0`).
    Linear,
    /// `[y^2, y^3, ..., y^max_degree]`, univariate.
    Polynomial { max_degree: usize },
    /// `[y^gamma]`, univariate.
    Power { gamma: f64 },
    /// All quadratic monomials of a `dim`-dimensional state.
    Quadratic { dim: usize },
    /// Cross products `y_i y_j`, `i < j`, in lexicographic order.
    Interaction { dim: usize },
}

impl NonlinearBasis {
    /// Number of basis functions `p`.
    pub fn len(&self) -> usize {
        match *self {
            NonlinearBasis::Linear => 0,
            NonlinearBasis::Polynomial { max_degree } => max_degree.saturating_sub(1),
            NonlinearBasis::Power { .. } => 1,
            NonlinearBasis::Quadratic { dim } => dim * (dim + 1) / 2,
            NonlinearBasis::Interaction { dim } => dim * dim.saturating_sub(1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks the basis parameters against a state dimension.
    pub fn validate(&self, dimension: usize) -> Result<()> {
        match *self {
            NonlinearBasis::Linear => Ok(()),
            NonlinearBasis::Polynomial { max_degree } => {
                if max_degree < 2 {
                    return Err(GreyError::InvalidSpec(format!(
                        "polynomial basis needs max_degree >= 2, got {max_degree}"
                    )));
                }
                if dimension != 1 {
                    return Err(GreyError::InvalidSpec(
                        "polynomial basis requires a univariate state".into(),
                    ));
                }
                Ok(())
            }
            NonlinearBasis::Power { gamma } => {
                if !gamma.is_finite() {
                    return Err(GreyError::InvalidSpec("power exponent must be finite".into()));
                }
                if dimension != 1 {
                    return Err(GreyError::InvalidSpec(
                        "power basis requires a univariate state".into(),
                    ));
                }
                Ok(())
            }
            NonlinearBasis::Quadratic { dim } | NonlinearBasis::Interaction { dim } => {
                if dim < 2 {
                    return Err(GreyError::InvalidSpec(format!(
                        "quadratic basis needs dim >= 2, got {dim}"
                    )));
                }
                if dim != dimension {
                    return Err(GreyError::InvalidSpec(format!(
                        "quadratic basis dim {dim} does not match state dimension {dimension}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Index pairs `(i, j)`, `i <= j`, of the quadratic monomials in basis order.
    pub fn quadratic_monomials(dim: usize) -> Vec<(usize, usize)> {
        let mut pairs = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                pairs.push((i, j));
            }
        }
        pairs
    }

    /// Index pairs of the monomials of a quadratic-type basis, if it is one.
    pub fn monomial_pairs(&self) -> Option<Vec<(usize, usize)>> {
        match *self {
            NonlinearBasis::Quadratic { dim } => Some(Self::quadratic_monomials(dim)),
            NonlinearBasis::Interaction { dim } => Some(
                Self::quadratic_monomials(dim)
                    .into_iter()
                    .filter(|(i, j)| i < j)
                    .collect(),
            ),
            _ => None,
        }
    }

    fn power_is_integer(gamma: f64) -> bool {
        gamma.fract() == 0.0
    }

    /// Domain check for a state vector (power law with non-integer exponent needs `y > 0`).
    pub fn check_domain(&self, y: &[f64]) -> Result<()> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GreyError::Domain("basis argument is not finite".into()));
        }
        if let NonlinearBasis::Power { gamma } = *self {
            if !Self::power_is_integer(gamma) && y[0] <= 0.0 {
                return Err(GreyError::Domain(format!(
                    "power basis with gamma = {gamma} needs a positive argument, got {}",
                    y[0]
                )));
            }
        }
        Ok(())
    }

    /// Evaluates `N(y)` with domain checking.
    pub fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(y)?;
        let mut out = vec![0.0; self.len()];
        self.evaluate_into(y, &mut out);
        Ok(out)
    }

    /// Evaluates `N(y)` into `out` without domain checks; invalid power
    /// arguments produce NaN, which the integrator treats as divergence.
    pub fn evaluate_into(&self, y: &[f64], out: &mut [f64]) {
        match *self {
            NonlinearBasis::Linear => {}
            NonlinearBasis::Polynomial { .. } => {
                let mut pow = y[0];
                for slot in out.iter_mut() {
                    pow *= y[0];
                    *slot = pow;
                }
            }
            NonlinearBasis::Power { gamma } => out[0] = power(y[0], gamma),
            NonlinearBasis::Quadratic { dim } => {
                let mut k = 0;
                for i in 0..dim {
                    for j in i..dim {
                        out[k] = y[i] * y[j];
                        k += 1;
                    }
                }
            }
            NonlinearBasis::Interaction { dim } => {
                let mut k = 0;
                for i in 0..dim {
                    for j in i + 1..dim {
                        out[k] = y[i] * y[j];
                        k += 1;
                    }
                }
            }
        }
    }

    /// Computes the directional derivative `J_N(y) v` into `out`.
    pub fn jacobian_times_into(&self, y: &[f64], v: &[f64], out: &mut [f64]) {
        match *self {
            NonlinearBasis::Linear => {}
            NonlinearBasis::Polynomial { .. } => {
                // d/dy y^(m+1) = (m+1) y^m
                let mut pow = 1.0;
                for (m, slot) in out.iter_mut().enumerate() {
                    pow *= y[0];
                    *slot = (m + 2) as f64 * pow * v[0];
                }
            }
            NonlinearBasis::Power { gamma } => {
                out[0] = if gamma == 0.0 {
                    0.0
                } else {
                    gamma * power(y[0], gamma - 1.0) * v[0]
                };
            }
            NonlinearBasis::Quadratic { dim } => {
                let mut k = 0;
                for i in 0..dim {
                    for j in i..dim {
                        out[k] = v[i] * y[j] + y[i] * v[j];
                        k += 1;
                    }
                }
            }
            NonlinearBasis::Interaction { dim } => {
                let mut k = 0;
                for i in 0..dim {
                    for j in i + 1..dim {
                        out[k] = v[i] * y[j] + y[i] * v[j];
                        k += 1;
                    }
                }
            }
        }
    }

    /// Analytic Jacobian `dN/dy` as a `p x d` matrix.
    pub fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let d = y.len();
        let p = self.len();
        let mut jac = DMatrix::zeros(p, d);
        let mut unit = vec![0.0; d];
        let mut col = vec![0.0; p];
        for j in 0..d {
            unit.iter_mut().for_each(|u| *u = 0.0);
            unit[j] = 1.0;
            self.jacobian_times_into(y, &unit, &mut col);
            for (i, c) in col.iter().enumerate() {
                jac[(i, j)] = *c;
            }
        }
        jac
    }
}

fn power(base: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else if exponent.fract() == 0.0 && exponent.abs() < i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

/// Convenience wrapper for [`NonlinearBasis::evaluate`].
pub fn evaluate_basis(basis: &NonlinearBasis, y: &[f64]) -> Result<Vec<f64>> {
    basis.evaluate(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_monomials() {
        let b = NonlinearBasis::Polynomial { max_degree: 3 };
        assert_eq!(b.evaluate(&[2.0]).unwrap(), vec![4.0, 8.0]);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn quadratic_order() {
        let b = NonlinearBasis::Quadratic { dim: 2 };
        assert_eq!(b.evaluate(&[1.0, 3.0]).unwrap(), vec![1.0, 3.0, 9.0]);
        let b3 = NonlinearBasis::Quadratic { dim: 3 };
        assert_eq!(
            b3.evaluate(&[1.0, 2.0, 3.0]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]
        );
        for d in 2..=6 {
            let y: Vec<f64> = (0..d).map(|i| i as f64 + 0.5).collect();
            assert_eq!(NonlinearBasis::Quadratic { dim: d }.evaluate(&y).unwrap().len(), d * (d + 1) / 2);
        }
    }

    #[test]
    fn interaction_order() {
        let b = NonlinearBasis::Interaction { dim: 3 };
        assert_eq!(b.len(), 3);
        assert_eq!(b.evaluate(&[1.0, 2.0, 3.0]).unwrap(), vec![2.0, 3.0, 6.0]);
        assert_eq!(b.monomial_pairs().unwrap(), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(b.validate(2).is_err());
    }

    #[test]
    fn power_value() {
        let b = NonlinearBasis::Power { gamma: 0.63 };
        let v = b.evaluate(&[1001.65]).unwrap()[0];
        // exp(0.63 * ln 1001.65)
        assert_relative_eq!(v, (0.63f64 * 1001.65f64.ln()).exp(), max_relative = 1e-14);
        assert_relative_eq!(v, 77.705_377_938, max_relative = 1e-9);
    }

    #[test]
    fn power_domain() {
        let b = NonlinearBasis::Power { gamma: 0.5 };
        assert!(matches!(b.evaluate(&[0.0]), Err(GreyError::Domain(_))));
        assert!(matches!(b.evaluate(&[-1.0]), Err(GreyError::Domain(_))));
        let integer = NonlinearBasis::Power { gamma: 2.0 };
        assert_eq!(integer.evaluate(&[-3.0]).unwrap(), vec![9.0]);
    }

    #[test]
    fn validation() {
        assert!(NonlinearBasis::Polynomial { max_degree: 1 }.validate(1).is_err());
        assert!(NonlinearBasis::Polynomial { max_degree: 2 }.validate(2).is_err());
        assert!(NonlinearBasis::Power { gamma: 1.5 }.validate(2).is_err());
        assert!(NonlinearBasis::Quadratic { dim: 2 }.validate(3).is_err());
        assert!(NonlinearBasis::Quadratic { dim: 1 }.validate(1).is_err());
        assert!(NonlinearBasis::Quadratic { dim: 3 }.validate(3).is_ok());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let cases: Vec<(NonlinearBasis, Vec<f64>)> = vec![
            (NonlinearBasis::Polynomial { max_degree: 5 }, vec![0.7]),
            (NonlinearBasis::Power { gamma: 0.37 }, vec![3.2]),
            (NonlinearBasis::Quadratic { dim: 3 }, vec![0.3, -1.1, 2.0]),
            (NonlinearBasis::Interaction { dim: 3 }, vec![0.3, -1.1, 2.0]),
        ];
        for (basis, y) in cases {
            let jac = basis.jacobian(&y);
            let eps = 1e-6;
            for j in 0..y.len() {
                let mut up = y.clone();
                let mut dn = y.clone();
                up[j] += eps;
                dn[j] -= eps;
                let fu = basis.evaluate(&up).unwrap();
                let fd = basis.evaluate(&dn).unwrap();
                for i in 0..basis.len() {
                    let fdiff = (fu[i] - fd[i]) / (2.0 * eps);
                    assert_relative_eq!(jac[(i, j)], fdiff, epsilon = 1e-6, max_relative = 1e-6);
                }
            }
        }
    }
}
