//! Explicit time integration of `M U' + A U = ℓ(t)`, written as
//! `U' = L U + F(t)` with `L = -M⁻¹A` and `F = M⁻¹ℓ`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{assemble_load_with, CsrMatrix, ScalarField};
use crate::geometry::QuadratureSet;
use crate::linalg::{Factorization, SolveError};
use crate::space::BrokenSpace;
use crate::Vec2;

#[derive(Debug, Error, PartialEq)]
pub enum TimeError {
    #[error("state became non-finite at step {step} (t = {time:.6})")]
    NonFinite { step: usize, time: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("invalid time configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Euler,
    Rk3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub end_time: f64,
    /// `Δt = cfl · h_s`.
    pub cfl: f64,
    pub scheme: Scheme,
    /// Apply the operator to `Uⁿ` instead of the first stage in the second
    /// RK3 stage. Only second order; kept for comparison.
    pub rk3_literal_stage: bool,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            end_time: 1.0,
            cfl: 0.1,
            scheme: Scheme::Rk3,
            rk3_literal_stage: false,
        }
    }
}

impl TimeConfig {
    pub fn step_size(&self, h_s: f64) -> f64 {
        self.cfl * h_s
    }

    /// `ceil(T / Δt)`, with a small tolerance so exact multiples are not
    /// rounded up.
    pub fn n_steps(&self, dt: f64) -> usize {
        if self.end_time <= 0.0 {
            return 0;
        }
        let r = self.end_time / dt;
        let n = r.round();
        if (r - n).abs() < 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }
}

/// Right-hand side `L U + F(t) + c1 F'(t) + c2 F''(t)` of a semi-discrete system.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, u: &[f64], t: f64, c1: f64, c2: f64) -> Result<Vec<f64>, TimeError>;
}

/// One spatial-temporal product term of the source and inflow data:
/// `f = Σ θ_k(t) f_k(x)`, `g = Σ θ_k(t) g_k(x)`.
#[derive(Clone)]
pub struct SeparableMode {
    pub source: ScalarField,
    pub inflow: ScalarField,
    /// `(θ, θ', θ'')` at `t`.
    pub time: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>,
}

pub type LoadFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Time-dependent load vector `ℓ(t)` and its derivatives.
#[derive(Clone)]
pub enum Forcing {
    None,
    /// Precomputed load vectors per separable mode.
    Separable {
        loads: Vec<Vec<f64>>,
        time: Vec<Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>>,
    },
    /// Reassembled on demand; missing derivatives use central differences.
    General {
        load: LoadFn,
        load_dt: Option<LoadFn>,
        load_dtt: Option<LoadFn>,
        fd_step: f64,
    },
}

impl Forcing {
    pub fn separable(space: &BrokenSpace, velocity: &(dyn Fn(Vec2) -> Vec2 + Sync), quad: &QuadratureSet, modes: &[SeparableMode]) -> Self {
        let loads = modes
            .iter()
            .map(|m| assemble_load_with(space, velocity, quad, &|x| (m.source)(x), &|x| (m.inflow)(x)))
            .collect();
        Forcing::Separable {
            loads,
            time: modes.iter().map(|m| m.time.clone()).collect(),
        }
    }

    /// `ℓ(t) + c1 ℓ'(t) + c2 ℓ''(t)` added into `out`.
    fn accumulate(&self, t: f64, c1: f64, c2: f64, out: &mut [f64]) {
        match self {
            Forcing::None => {}
            Forcing::Separable { loads, time } => {
                for (l, th) in loads.iter().zip(time) {
                    let [v, d, dd] = th(t);
                    let k = v + c1 * d + c2 * dd;
                    if k != 0.0 {
                        for (o, li) in out.iter_mut().zip(l) {
                            *o += k * li;
                        }
                    }
                }
            }
            Forcing::General {
                load,
                load_dt,
                load_dtt,
                fd_step,
            } => {
                let l0 = load(t);
                for (o, v) in out.iter_mut().zip(&l0) {
                    *o += v;
                }
                if c1 == 0.0 && c2 == 0.0 {
                    return;
                }
                let h = *fd_step;
                let (lp, lm) = if load_dt.is_none() || load_dtt.is_none() {
                    (Some(load(t + h)), Some(load(t - h)))
                } else {
                    (None, None)
                };
                if c1 != 0.0 {
                    let d = match load_dt {
                        Some(f) => f(t),
                        None => {
                            let (p, m) = (lp.as_ref().unwrap(), lm.as_ref().unwrap());
                            p.iter().zip(m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
                        }
                    };
                    for (o, v) in out.iter_mut().zip(&d) {
                        *o += c1 * v;
                    }
                }
                if c2 != 0.0 {
                    let dd = match load_dtt {
                        Some(f) => f(t),
                        None => {
                            let (p, m) = (lp.as_ref().unwrap(), lm.as_ref().unwrap());
                            p.iter()
                                .zip(m)
                                .zip(&l0)
                                .map(|((a, b), c)| (a - 2.0 * c + b) / (h * h))
                                .collect()
                        }
                    };
                    for (o, v) in out.iter_mut().zip(&dd) {
                        *o += c2 * v;
                    }
                }
            }
        }
    }
}

/// The cut DG system with a factorized stabilized mass.
pub struct CutOdeSystem {
    pub mass: Factorization,
    pub a: CsrMatrix,
    pub forcing: Forcing,
}

impl CutOdeSystem {
    pub fn new(mass: &CsrMatrix, a: CsrMatrix, forcing: Forcing) -> Result<Self, TimeError> {
        Ok(CutOdeSystem {
            mass: Factorization::cholesky(mass)?,
            a,
            forcing,
        })
    }

    /// `L U = -M⁻¹ A U`.
    pub fn apply_operator(&self, u: &[f64]) -> Result<Vec<f64>, TimeError> {
        let r: Vec<f64> = self.a.matvec(u).into_iter().map(|v| -v).collect();
        Ok(self.mass.solve(&r)?)
    }
}

impl OdeSystem for CutOdeSystem {
    fn dim(&self) -> usize {
        self.a.n_rows
    }

    fn rhs(&self, u: &[f64], t: f64, c1: f64, c2: f64) -> Result<Vec<f64>, TimeError> {
        let mut r: Vec<f64> = self.a.matvec(u).into_iter().map(|v| -v).collect();
        self.forcing.accumulate(t, c1, c2, &mut r);
        // a single mass solve per stage
        Ok(self.mass.solve(&r)?)
    }
}

/// `u' = λ u + F(t)` with `F` and its derivatives given in closed form.
pub struct ScalarOde {
    pub lambda: f64,
    pub forcing: Box<dyn Fn(f64) -> [f64; 3]>,
}

impl OdeSystem for ScalarOde {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, u: &[f64], t: f64, c1: f64, c2: f64) -> Result<Vec<f64>, TimeError> {
        let [f, d, dd] = (self.forcing)(t);
        Ok(vec![self.lambda * u[0] + f + c1 * d + c2 * dd])
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `Uⁿ⁺¹ = Uⁿ + Δt (L Uⁿ + F(tⁿ))`.
pub fn euler_step<S: OdeSystem + ?Sized>(sys: &S, u: &[f64], t: f64, dt: f64) -> Result<Vec<f64>, TimeError> {
    let k = sys.rhs(u, t, 0.0, 0.0)?;
    let mut out = u.to_vec();
    axpy(dt, &k, &mut out);
    Ok(out)
}

/// Three-stage strong-stability-preserving Runge-Kutta step with the forcing
/// expanded in time about `tⁿ`.
pub fn rk3_step<S: OdeSystem + ?Sized>(sys: &S, u: &[f64], t: f64, dt: f64, literal_stage: bool) -> Result<Vec<f64>, TimeError> {
    let k1 = sys.rhs(u, t, 0.0, 0.0)?;
    let mut u1 = u.to_vec();
    axpy(dt, &k1, &mut u1);

    let k2 = sys.rhs(if literal_stage { u } else { &u1 }, t, dt, 0.0)?;
    let mut u2: Vec<f64> = u.iter().zip(&u1).map(|(a, b)| 0.5 * (a + b)).collect();
    axpy(0.5 * dt, &k2, &mut u2);

    let k3 = sys.rhs(&u2, t, dt, 0.5 * dt * dt)?;
    let mut out: Vec<f64> = (0..u.len()).map(|i| (u[i] + u1[i] + u2[i]) / 3.0).collect();
    axpy(dt / 3.0, &k3, &mut out);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct EvolveResult {
    pub state: Vec<f64>,
    pub steps: usize,
    pub final_time: f64,
    /// Sum of all step sizes.
    pub elapsed: f64,
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

/// Steps from `t = 0` to `config.end_time` with step size `dt`, the last
/// step shortened to land on the end time. A snapshot is recorded at the
/// first step reaching each requested time.
pub fn evolve<S: OdeSystem + ?Sized>(sys: &S, u0: &[f64], config: &TimeConfig, dt: f64, snapshot_times: &[f64]) -> Result<EvolveResult, TimeError> {
    if !(dt > 0.0) {
        return Err(TimeError::Config(format!("time step must be positive, got {dt}")));
    }
    if config.end_time < 0.0 {
        return Err(TimeError::Config(format!("end time must be non-negative, got {}", config.end_time)));
    }
    let n = config.n_steps(dt);
    let mut u = u0.to_vec();
    let mut t = 0.0;
    let mut elapsed = 0.0;
    let mut pending: Vec<f64> = snapshot_times.to_vec();
    pending.sort_by(f64::total_cmp);
    let mut pending = pending.into_iter().peekable();
    let mut snapshots = Vec::new();
    while let Some(&s) = pending.peek() {
        if s <= 1e-12 {
            snapshots.push((0.0, u.clone()));
            pending.next();
        } else {
            break;
        }
    }
    for step in 0..n {
        let tau = if step + 1 == n { config.end_time - step as f64 * dt } else { dt };
        u = match config.scheme {
            Scheme::Euler => euler_step(sys, &u, t, tau)?,
            Scheme::Rk3 => rk3_step(sys, &u, t, tau, config.rk3_literal_stage)?,
        };
        elapsed += tau;
        t = if step + 1 == n { config.end_time } else { (step + 1) as f64 * dt };
        if u.iter().any(|v| !v.is_finite()) {
            return Err(TimeError::NonFinite { step, time: t });
        }
        while let Some(&s) = pending.peek() {
            if s <= t + 1e-12 {
                snapshots.push((t, u.clone()));
                pending.next();
            } else {
                break;
            }
        }
    }
    Ok(EvolveResult {
        state: u,
        steps: n,
        final_time: t,
        elapsed,
        snapshots,
    })
}
