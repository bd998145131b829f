//! Fixed-step RK4 for the grey equation and its reduced augmented system.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::NonlinearBasis;
use crate::error::{GreyError, Result};
use crate::model::{ModelSpec, ParameterSet};

/// States whose magnitude exceeds this are treated as divergent.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Where a trajectory diverged: `index` is the first sample time not reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUp {
    pub index: usize,
    pub time: f64,
}

/// Right-hand side `f(t, state)` written into `out`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, state: &[f64], out: &mut [f64]);
}

/// Closure adapter: `FnField(dim, |t, y, out| ...)`.
pub struct FnField<F>(pub usize, pub F);

impl<F> VectorField for FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, t: f64, state: &[f64], out: &mut [f64]) {
        (self.1)(t, state, out)
    }
}

/// Sampled solution. `states` holds only the rows that were reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
    pub blow_up: Option<BlowUp>,
}

impl Trajectory {
    pub fn blown_up(&self) -> bool {
        self.blow_up.is_some()
    }

    /// Columns `range` of the computed states.
    pub fn columns(&self, start: usize, count: usize) -> DMatrix<f64> {
        self.states.columns(start, count).into_owned()
    }
}

/// Step policy: each sample interval is split into `ceil(h_k / max_step)` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub max_step: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { max_step: 0.01 }
    }
}

impl Integrator {
    pub fn with_max_step(max_step: f64) -> Self {
        Self { max_step }
    }

    pub fn substeps_for(&self, h: f64) -> usize {
        ((h / self.max_step) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn integrate<F: VectorField + ?Sized>(
        &self,
        rhs: &F,
        initial: &[f64],
        times: &[f64],
    ) -> Result<Trajectory> {
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return Err(GreyError::InvalidArgument("max_step must be positive".into()));
        }
        integrate_with(rhs, initial, times, |h| self.substeps_for(h))
    }
}

/// Classical RK4 with a fixed number of equal substeps per sample interval.
pub fn rk4_integrate<F: VectorField + ?Sized>(
    rhs: &F,
    initial: &[f64],
    times: &[f64],
    substeps: usize,
) -> Result<Trajectory> {
    if substeps == 0 {
        return Err(GreyError::InvalidArgument("substeps must be >= 1".into()));
    }
    integrate_with(rhs, initial, times, |_| substeps)
}

fn diverged(state: &[f64]) -> bool {
    state.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_GUARD)
}

fn integrate_with<F, S>(rhs: &F, initial: &[f64], times: &[f64], substeps: S) -> Result<Trajectory>
where
    F: VectorField + ?Sized,
    S: Fn(f64) -> usize,
{
    let m = initial.len();
    if m != rhs.dim() {
        return Err(GreyError::Dimension(format!(
            "initial state has length {m}, field expects {}",
            rhs.dim()
        )));
    }
    if times.is_empty() {
        return Err(GreyError::InvalidArgument("no output times".into()));
    }
    if times.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(GreyError::InvalidArgument("output times must be increasing".into()));
    }
    let mut rows: Vec<f64> = Vec::with_capacity(times.len() * m);
    let mut y = initial.to_vec();
    let mut blow_up = None;
    if diverged(&y) {
        blow_up = Some(BlowUp {
            index: 0,
            time: times[0],
        });
    } else {
        rows.extend_from_slice(&y);
        let (mut k1, mut k2, mut k3, mut k4) =
            (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let mut tmp = vec![0.0; m];
        'outer: for k in 1..times.len() {
            let span = times[k] - times[k - 1];
            let steps = substeps(span);
            let dt = span / steps as f64;
            for s in 0..steps {
                let t = times[k - 1] + dt * s as f64;
                rhs.eval(t, &y, &mut k1);
                for i in 0..m {
                    tmp[i] = y[i] + 0.5 * dt * k1[i];
                }
                rhs.eval(t + 0.5 * dt, &tmp, &mut k2);
                for i in 0..m {
                    tmp[i] = y[i] + 0.5 * dt * k2[i];
                }
                rhs.eval(t + 0.5 * dt, &tmp, &mut k3);
                for i in 0..m {
                    tmp[i] = y[i] + dt * k3[i];
                }
                rhs.eval(t + dt, &tmp, &mut k4);
                for i in 0..m {
                    y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                if diverged(&y) {
                    blow_up = Some(BlowUp {
                        index: k,
                        time: t + dt,
                    });
                    break 'outer;
                }
            }
            rows.extend_from_slice(&y);
        }
    }
    let reached = rows.len() / m;
    Ok(Trajectory {
        times: times.to_vec(),
        states: DMatrix::from_row_slice(reached, m, &rows),
        blow_up,
    })
}

/// `dy/dt = theta_L y + theta_N N(y) + beta`.
#[derive(Debug, Clone)]
pub struct GreyField {
    basis: NonlinearBasis,
    theta_l: DMatrix<f64>,
    theta_n: DMatrix<f64>,
    beta: Vec<f64>,
}

impl GreyField {
    pub fn new(spec: &ModelSpec, params: &ParameterSet) -> Self {
        Self {
            basis: spec.basis,
            theta_l: params.theta_l().clone(),
            theta_n: params.theta_n().clone(),
            beta: params.beta().iter().copied().collect(),
        }
    }
}

impl VectorField for GreyField {
    fn dim(&self) -> usize {
        self.beta.len()
    }

    fn eval(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        let d = y.len();
        let p = self.basis.len();
        let mut nb = [0.0; 16];
        let mut heap;
        let nv: &mut [f64] = if p <= 16 {
            &mut nb[..p]
        } else {
            heap = vec![0.0; p];
            &mut heap
        };
        self.basis.evaluate_into(y, nv);
        for i in 0..d {
            let mut acc = self.beta[i];
            for j in 0..d {
                acc += self.theta_l[(i, j)] * y[j];
            }
            for j in 0..p {
                acc += self.theta_n[(i, j)] * nv[j];
            }
            out[i] = acc;
        }
    }
}

/// Augmented state `(x, y)`: `dx/dt = theta_L x + theta_N J_N(y) x`, `dy/dt = x`.
#[derive(Debug, Clone)]
pub struct ReducedField {
    basis: NonlinearBasis,
    theta_l: DMatrix<f64>,
    theta_n: DMatrix<f64>,
    d: usize,
}

impl ReducedField {
    pub fn new(spec: &ModelSpec, params: &ParameterSet) -> Self {
        Self {
            basis: spec.basis,
            theta_l: params.theta_l().clone(),
            theta_n: params.theta_n().clone(),
            d: spec.dimension,
        }
    }

    /// Initial augmented state `(eta_x, eta)`.
    pub fn initial_state(params: &ParameterSet) -> Vec<f64> {
        params
            .eta_x()
            .iter()
            .chain(params.eta().iter())
            .copied()
            .collect()
    }
}

impl VectorField for ReducedField {
    fn dim(&self) -> usize {
        2 * self.d
    }

    fn eval(&self, _t: f64, state: &[f64], out: &mut [f64]) {
        let d = self.d;
        let p = self.basis.len();
        let (x, y) = state.split_at(d);
        let mut jb = [0.0; 16];
        let mut heap;
        let jv: &mut [f64] = if p <= 16 {
            &mut jb[..p]
        } else {
            heap = vec![0.0; p];
            &mut heap
        };
        self.basis.jacobian_times_into(y, x, jv);
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.theta_l[(i, j)] * x[j];
            }
            for j in 0..p {
                acc += self.theta_n[(i, j)] * jv[j];
            }
            out[i] = acc;
            out[d + i] = x[i];
        }
    }
}

fn verhulst_parts(a: f64, b: f64, eta: f64, t: f64, t1: f64) -> Result<(f64, f64, f64)> {
    if a == 0.0 || eta == 0.0 {
        return Err(GreyError::InvalidArgument("closed form needs a != 0 and eta != 0".into()));
    }
    let r = b / a;
    let e = (-a * (t - t1)).exp();
    let c = 1.0 / eta + r;
    let denom = -r + e * c;
    if !(denom.abs() >= 1e-12) {
        return Err(GreyError::Singularity(t));
    }
    Ok((e, c, denom))
}

/// Cusum-level Verhulst solution of `dy/dt = a y + b y^2`, `y(t_1) = eta`.
pub fn verhulst_closed_form_y(a: f64, b: f64, eta: f64, t: f64, t1: f64) -> Result<f64> {
    let (_, _, denom) = verhulst_parts(a, b, eta, t, t1)?;
    Ok(1.0 / denom)
}

/// Time derivative of [`verhulst_closed_form_y`], i.e. the original-series solution.
pub fn verhulst_closed_form_x(a: f64, b: f64, eta: f64, t: f64, t1: f64) -> Result<f64> {
    let (e, c, denom) = verhulst_parts(a, b, eta, t, t1)?;
    Ok(a * e * c / (denom * denom))
}
