//! Reaction-diffusion stepping with an integrating factor.
//!
//! The diffusion is carried by the split propagator `E = e^{D dt Laplacian}`
//! and the reaction integral is replaced by a quadrature rule:
//!
//! * first order: `u+ = E u + dt F(u+)`
//! * trapezoidal: `u+ = E [u + dt/2 F] + dt/2 F(u+)`
//! * Hermite-Birkhoff: `u+ = E [u + 2dt/3 F + dt/6 (-dt D Lap F + dt F_t)] + dt/3 F(u+)`
//!
//! The implicit reaction term is resolved by a fixed-point iteration
//! stabilized with a constant linearization `J*` of `F`:
//! `(I - theta dt J*) u^{k+1} = rhs + theta dt (F(u^k) - J* u^k)`.

mod allen_cahn;
mod fitzhugh_nagumo;

pub use allen_cahn::{ac_fixed_point, ACParams, AllenCahn, AllenCahnSolver};
pub use fitzhugh_nagumo::{fhn_step, FHNParams, FhnSolver, FitzHughNagumo};

use ndarray::{ArrayD, Zip};
use rayon::prelude::*;

use crate::error::{invalid, MoltError, Result};
use crate::grid::{BoundaryCondition, Field, SchemeConfig, TensorGrid};
use crate::linalg::invert_dense;
use crate::resolvent::{beta_select, BetaPolicy};
use crate::splitting::{SplitMode, SplitOperator};

/// Pointwise reaction terms `F(u)` of a system `u_t = D Lap u + F(u)` with
/// diagonal diffusion.
pub trait ReactionSystem: Sync {
    fn species(&self) -> usize;

    /// Diffusion coefficient of each species (zero allowed).
    fn diffusion(&self) -> Vec<f64>;

    /// `out = F(state)` at one node.
    fn reaction(&self, state: &[f64], out: &mut [f64]);

    /// Row-major `dF/du` at one node.
    fn jacobian(&self, state: &[f64], out: &mut [f64]);

    /// Constant row-major matrix `J*` used to stabilize the fixed point.
    fn linearization(&self) -> Vec<f64>;
}

/// Quadrature used for the reaction integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImexScheme {
    /// Right-endpoint rule, first order.
    BackwardEuler,
    /// Trapezoidal rule, second order.
    Trapezoidal,
    /// Two-point Hermite-Birkhoff rule with the derivative at the left end,
    /// third order.
    HermiteBirkhoff,
}

impl ImexScheme {
    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Self::BackwardEuler),
            2 => Ok(Self::Trapezoidal),
            3 => Ok(Self::HermiteBirkhoff),
            _ => Err(invalid(format!(
                "reaction schemes exist for orders 1..=3, got {order}"
            ))),
        }
    }

    /// Reaction rule paired with a propagator of order `order`: the
    /// trapezoidal rule up to second order, Hermite-Birkhoff at third.
    pub fn for_propagator_order(order: usize) -> Result<Self> {
        match order {
            1 | 2 => Ok(Self::Trapezoidal),
            3 => Ok(Self::HermiteBirkhoff),
            _ => Err(invalid(format!(
                "reaction schemes exist for orders 1..=3, got {order}"
            ))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Self::BackwardEuler => 1,
            Self::Trapezoidal => 2,
            Self::HermiteBirkhoff => 3,
        }
    }

    /// Weight of `F(u^{n+1})`.
    fn implicit_weight(self) -> f64 {
        match self {
            Self::BackwardEuler => 1.0,
            Self::Trapezoidal => 0.5,
            Self::HermiteBirkhoff => 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Stop once `max |u^{k+1} - u^k| < tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
        }
    }
}

impl FixedPointConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(invalid("fixed-point tol must be > 0 and max_iter >= 1"));
        }
        Ok(())
    }
}

/// Discretization choices shared by the reaction steppers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: ImexScheme,
    /// Expansion order `P` of the propagator and of the split Laplacian.
    pub order: usize,
    /// Terms kept in the split Laplacian used by the Hermite-Birkhoff rule.
    pub laplacian_terms: usize,
    pub policy: BetaPolicy,
    pub spatial_order: usize,
    pub bc: BoundaryCondition,
    pub mode: SplitMode,
    pub fixed_point: FixedPointConfig,
}

impl StepperConfig {
    /// Propagator of order `order` with its paired reaction rule and
    /// stiff-decay `beta^2`.
    pub fn with_order(order: usize, dt: f64, bc: BoundaryCondition) -> Result<Self> {
        Ok(Self {
            dt,
            scheme: ImexScheme::for_propagator_order(order)?,
            order,
            laplacian_terms: order,
            policy: BetaPolicy::StiffDecay,
            spatial_order: 4,
            bc,
            mode: SplitMode::Composed,
            fixed_point: FixedPointConfig::default(),
        })
    }
}

/// Outcome of one step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub state: Vec<ArrayD<f64>>,
    pub iterations: usize,
    /// `max |u - rhs - theta dt F(u)|` at the accepted iterate.
    pub residual: f64,
}

/// Integrating-factor stepper for a reaction system on a tensor grid.
#[derive(Debug, Clone)]
pub struct ReactionStepper<S> {
    system: S,
    cfg: StepperConfig,
    propagators: Vec<SplitOperator>,
    diffusion: Vec<f64>,
    /// `(I - theta dt J*)^{-1}`.
    shift_inverse: Vec<f64>,
    shift: Vec<f64>,
}

impl<S: ReactionSystem> ReactionStepper<S> {
    pub fn new(system: S, grid: &TensorGrid, cfg: StepperConfig) -> Result<Self> {
        cfg.fixed_point.validate()?;
        if !(cfg.dt > 0.0) {
            return Err(invalid(format!("dt must be > 0, got {}", cfg.dt)));
        }
        if cfg.laplacian_terms == 0 {
            return Err(invalid("the split Laplacian needs at least one term"));
        }
        let beta2 = beta_select(cfg.order, cfg.policy)?;
        let diffusion = system.diffusion();
        if diffusion.len() != system.species() || diffusion.iter().any(|d| !(*d >= 0.0)) {
            return Err(invalid(
                "need one non-negative diffusion coefficient per species",
            ));
        }
        let propagators = diffusion
            .iter()
            .map(|&gamma| {
                let sc = SchemeConfig {
                    gamma,
                    dt: cfg.dt,
                    order: cfg.order,
                    beta2,
                    spatial_order: cfg.spatial_order,
                    bc: cfg.bc,
                };
                SplitOperator::new(grid, &sc, cfg.mode)
            })
            .collect::<Result<Vec<_>>>()?;
        let ns = system.species();
        let shift = system.linearization();
        if shift.len() != ns * ns {
            return Err(invalid("linearization must be species x species"));
        }
        let theta_dt = cfg.scheme.implicit_weight() * cfg.dt;
        let mut lhs: Vec<f64> = shift.iter().map(|j| -theta_dt * j).collect();
        for i in 0..ns {
            lhs[i * ns + i] += 1.0;
        }
        let shift_inverse = invert_dense(&lhs, ns)?;
        Ok(Self {
            system,
            cfg,
            propagators,
            diffusion,
            shift_inverse,
            shift,
        })
    }

    pub fn system(&self) -> &S {
        &self.system
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn propagator(&self, species: usize) -> &SplitOperator {
        &self.propagators[species]
    }

    /// Row-major `I - theta dt J*`, the matrix solved at every node.
    pub fn iteration_matrix(&self) -> Vec<f64> {
        let ns = self.system.species();
        let theta_dt = self.cfg.scheme.implicit_weight() * self.cfg.dt;
        let mut m: Vec<f64> = self.shift.iter().map(|j| -theta_dt * j).collect();
        for i in 0..ns {
            m[i * ns + i] += 1.0;
        }
        m
    }

    fn interleave(state: &[ArrayD<f64>]) -> Vec<f64> {
        let ns = state.len();
        let n = state[0].len();
        let mut out = vec![0.0; n * ns];
        for (s, a) in state.iter().enumerate() {
            for (i, v) in a.iter().enumerate() {
                out[i * ns + s] = *v;
            }
        }
        out
    }

    fn split(&self, flat: &[f64], like: &ArrayD<f64>) -> Vec<ArrayD<f64>> {
        let ns = self.system.species();
        (0..ns)
            .map(|s| {
                let v: Vec<f64> = flat.iter().skip(s).step_by(ns).copied().collect();
                ArrayD::from_shape_vec(like.raw_dim(), v).expect("shape")
            })
            .collect()
    }

    fn reaction_field(&self, flat: &[f64]) -> Vec<f64> {
        let ns = self.system.species();
        let mut out = vec![0.0; flat.len()];
        out.par_chunks_mut(ns)
            .zip(flat.par_chunks(ns))
            .for_each(|(o, u)| self.system.reaction(u, o));
        out
    }

    /// Explicit part of the update, propagated by `E`.
    fn explicit_rhs(&self, state: &[ArrayD<f64>]) -> Result<Vec<ArrayD<f64>>> {
        let dt = self.cfg.dt;
        let ns = self.system.species();
        let flat = Self::interleave(state);
        let f_flat = self.reaction_field(&flat);
        let f = self.split(&f_flat, &state[0]);
        let pre: Vec<ArrayD<f64>> = match self.cfg.scheme {
            ImexScheme::BackwardEuler => state.to_vec(),
            ImexScheme::Trapezoidal => state
                .iter()
                .zip(&f)
                .map(|(u, f)| u + &(f * (0.5 * dt)))
                .collect(),
            ImexScheme::HermiteBirkhoff => {
                // F_t = F_u (D Lap u + F); both Laplacians use the propagator's own expansion.
                let mut diff_u = Vec::with_capacity(ns);
                let mut diff_f = Vec::with_capacity(ns);
                for s in 0..ns {
                    if self.diffusion[s] == 0.0 {
                        diff_u.push(ArrayD::zeros(state[s].raw_dim()));
                        diff_f.push(ArrayD::zeros(state[s].raw_dim()));
                    } else {
                        let op = &self.propagators[s];
                        diff_u.push(
                            op.laplacian(&state[s], self.cfg.laplacian_terms)? * self.diffusion[s],
                        );
                        diff_f.push(
                            op.laplacian(&f[s], self.cfg.laplacian_terms)? * self.diffusion[s],
                        );
                    }
                }
                let drift: Vec<ArrayD<f64>> = diff_u.iter().zip(&f).map(|(l, f)| l + f).collect();
                let drift_flat = Self::interleave(&drift);
                let mut ft_flat = vec![0.0; flat.len()];
                ft_flat
                    .par_chunks_mut(ns)
                    .zip(flat.par_chunks(ns))
                    .zip(drift_flat.par_chunks(ns))
                    .for_each_init(
                        || vec![0.0; ns * ns],
                        |jac, ((out, u), g)| {
                            self.system.jacobian(u, jac);
                            for r in 0..ns {
                                out[r] = (0..ns).map(|c| jac[r * ns + c] * g[c]).sum();
                            }
                        },
                    );
                let ft = self.split(&ft_flat, &state[0]);
                (0..ns)
                    .map(|s| {
                        let mut acc = state[s].clone();
                        Zip::from(&mut acc)
                            .and(&f[s])
                            .and(&diff_f[s])
                            .and(&ft[s])
                            .for_each(|a, &f, &lf, &ft| {
                                *a += 2.0 * dt / 3.0 * f + dt / 6.0 * (-dt * lf + dt * ft);
                            });
                        acc
                    })
                    .collect()
            }
        };
        pre.iter()
            .zip(&self.propagators)
            .map(|(v, op)| op.apply(v))
            .collect()
    }

    /// Advances all species by one step.
    pub fn step(&self, state: &[ArrayD<f64>]) -> Result<StepReport> {
        let ns = self.system.species();
        if state.len() != ns {
            return Err(invalid(format!(
                "expected {ns} species, got {}",
                state.len()
            )));
        }
        if state.iter().any(|s| s.shape() != state[0].shape()) {
            return Err(invalid("species fields must share one shape"));
        }
        let rhs = Self::interleave(&self.explicit_rhs(state)?);
        let theta_dt = self.cfg.scheme.implicit_weight() * self.cfg.dt;
        let fp = self.cfg.fixed_point;
        let mut cur = Self::interleave(state);
        let mut next = vec![0.0; cur.len()];
        let mut delta = f64::INFINITY;
        let mut iterations = 0;
        while iterations < fp.max_iter {
            iterations += 1;
            delta = next
                .par_chunks_mut(ns)
                .zip(cur.par_chunks(ns))
                .zip(rhs.par_chunks(ns))
                .map_init(
                    || (vec![0.0; ns], vec![0.0; ns]),
                    |(f, b), ((out, u), r)| {
                        self.system.reaction(u, f);
                        for i in 0..ns {
                            let lin: f64 = (0..ns).map(|c| self.shift[i * ns + c] * u[c]).sum();
                            b[i] = r[i] + theta_dt * (f[i] - lin);
                        }
                        let mut d: f64 = 0.0;
                        for i in 0..ns {
                            out[i] = (0..ns).map(|c| self.shift_inverse[i * ns + c] * b[c]).sum();
                            d = d.max((out[i] - u[i]).abs());
                        }
                        d
                    },
                )
                .reduce(|| 0.0, f64::max);
            std::mem::swap(&mut cur, &mut next);
            if !delta.is_finite() {
                break;
            }
            if delta < fp.tol {
                let residual = self.residual(&cur, &rhs, theta_dt);
                return Ok(StepReport {
                    state: self.split(&cur, &state[0]),
                    iterations,
                    residual,
                });
            }
        }
        Err(MoltError::IterationFailure {
            iterations,
            residual: delta,
        })
    }

    fn residual(&self, u: &[f64], rhs: &[f64], theta_dt: f64) -> f64 {
        let f = self.reaction_field(u);
        u.iter()
            .zip(rhs)
            .zip(&f)
            .map(|((u, r), f)| (u - r - theta_dt * f).abs())
            .fold(0.0, f64::max)
    }

    /// Advances `steps` times, stopping at the first failure.
    pub fn run(&self, mut state: Vec<ArrayD<f64>>, steps: usize) -> Result<Vec<ArrayD<f64>>> {
        for _ in 0..steps {
            state = self.step(&state)?.state;
        }
        Ok(state)
    }
}

/// One trapezoidal integrating-factor step for an arbitrary system.
pub fn rd_step_trap<S: ReactionSystem>(
    state: &[Field],
    stepper: &ReactionStepper<S>,
) -> Result<Vec<Field>> {
    check_scheme(stepper, ImexScheme::Trapezoidal)?;
    step_fields(state, stepper)
}

/// One third-order Hermite-Birkhoff integrating-factor step.
pub fn rd_step_hb3<S: ReactionSystem>(
    state: &[Field],
    stepper: &ReactionStepper<S>,
) -> Result<Vec<Field>> {
    check_scheme(stepper, ImexScheme::HermiteBirkhoff)?;
    step_fields(state, stepper)
}

fn check_scheme<S: ReactionSystem>(stepper: &ReactionStepper<S>, want: ImexScheme) -> Result<()> {
    if stepper.config().scheme != want {
        return Err(invalid(format!(
            "stepper is configured for {:?}, not {:?}",
            stepper.config().scheme,
            want
        )));
    }
    Ok(())
}

fn step_fields<S: ReactionSystem>(
    state: &[Field],
    stepper: &ReactionStepper<S>,
) -> Result<Vec<Field>> {
    let raw: Vec<ArrayD<f64>> = state.iter().map(|f| f.values().clone()).collect();
    let out = stepper.step(&raw)?;
    state
        .iter()
        .zip(out.state)
        .map(|(f, v)| f.with_values(v))
        .collect()
}
