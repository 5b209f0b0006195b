use super::{FixedPointConfig, ReactionStepper, ReactionSystem, StepReport, StepperConfig};
use crate::error::{invalid, Result};
use crate::grid::{BoundaryCondition, Field, TensorGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ACParams {
    /// Interface width; the diffusion coefficient is `epsilon^2`.
    pub epsilon: f64,
}

impl ACParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(invalid(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }
}

/// `u_t = eps^2 Lap u + u - u^3`, stabilized about the wells `u = +-1`.
#[derive(Debug, Clone, Copy)]
pub struct AllenCahn {
    pub params: ACParams,
}

impl ReactionSystem for AllenCahn {
    fn species(&self) -> usize {
        1
    }

    fn diffusion(&self) -> Vec<f64> {
        vec![self.params.epsilon * self.params.epsilon]
    }

    fn reaction(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0] - u[0] * u[0] * u[0];
    }

    fn jacobian(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 1.0 - 3.0 * u[0] * u[0];
    }

    fn linearization(&self) -> Vec<f64> {
        vec![-2.0]
    }
}

/// Allen-Cahn stepper on a fixed grid.
#[derive(Debug, Clone)]
pub struct AllenCahnSolver {
    stepper: ReactionStepper<AllenCahn>,
}

impl AllenCahnSolver {
    pub fn new(grid: &TensorGrid, params: ACParams, cfg: StepperConfig) -> Result<Self> {
        ACParams::new(params.epsilon)?;
        Ok(Self {
            stepper: ReactionStepper::new(AllenCahn { params }, grid, cfg)?,
        })
    }

    pub fn stepper(&self) -> &ReactionStepper<AllenCahn> {
        &self.stepper
    }

    pub fn step_report(&self, u: &Field) -> Result<StepReport> {
        self.stepper.step(std::slice::from_ref(u.values()))
    }

    pub fn step(&self, u: &Field) -> Result<Field> {
        let mut out = self.step_report(u)?;
        u.with_values(out.state.pop().expect("one species"))
    }
}

/// One Allen-Cahn step of the given order (1, 2 or 3) with default
/// discretization choices.
pub fn ac_fixed_point(
    u: &Field,
    params: ACParams,
    order: usize,
    dt: f64,
    bc: BoundaryCondition,
    fp: FixedPointConfig,
) -> Result<Field> {
    let mut cfg = StepperConfig::with_order(order, dt, bc)?;
    cfg.fixed_point = fp;
    AllenCahnSolver::new(u.grid(), params, cfg)?.step(u)
}
