use ndarray::ArrayD;

use super::{FixedPointConfig, ImexScheme, ReactionStepper, ReactionSystem, StepperConfig};
use crate::error::{invalid, Result};
use crate::grid::{BoundaryCondition, Field, TensorGrid};

/// Parameters of the cubic FitzHugh-Nagumo kinetics
/// `u_t = Du Lap u + h(u, v) / delta`, `v_t = Dv Lap v + g(u, v)` with
/// `h = C u (1 - u)(u - a) - v` and `g = u - d v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FHNParams {
    pub du: f64,
    pub dv: f64,
    pub a: f64,
    pub c: f64,
    pub d: f64,
    pub delta: f64,
}

impl Default for FHNParams {
    fn default() -> Self {
        Self {
            du: 1.0,
            dv: 0.0,
            a: 0.1,
            c: 1.0,
            d: 0.5,
            delta: 0.005,
        }
    }
}

impl FHNParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.du, self.dv, self.a, self.c, self.d, self.delta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("FitzHugh-Nagumo parameters must be finite"));
        }
        if self.du < 0.0 || self.dv < 0.0 {
            return Err(invalid("diffusion coefficients must be >= 0"));
        }
        if !(self.delta > 0.0) {
            return Err(invalid(format!("delta must be > 0, got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitzHughNagumo {
    pub params: FHNParams,
}

impl ReactionSystem for FitzHughNagumo {
    fn species(&self) -> usize {
        2
    }

    fn diffusion(&self) -> Vec<f64> {
        vec![self.params.du, self.params.dv]
    }

    fn reaction(&self, s: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let (u, v) = (s[0], s[1]);
        out[0] = (p.c * u * (1.0 - u) * (u - p.a) - v) / p.delta;
        out[1] = u - p.d * v;
    }

    fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let u = s[0];
        // d/du of C u (1-u)(u-a) = C (-3u^2 + 2(1+a)u - a)
        out[0] = p.c * (-3.0 * u * u + 2.0 * (1.0 + p.a) * u - p.a) / p.delta;
        out[1] = -1.0 / p.delta;
        out[2] = 1.0;
        out[3] = -p.d;
    }

    /// Jacobian at the rest state `(0, 0)`.
    fn linearization(&self) -> Vec<f64> {
        let p = &self.params;
        vec![-p.c * p.a / p.delta, -1.0 / p.delta, 1.0, -p.d]
    }
}

/// Trapezoidal FitzHugh-Nagumo stepper.
#[derive(Debug, Clone)]
pub struct FhnSolver {
    stepper: ReactionStepper<FitzHughNagumo>,
}

impl FhnSolver {
    /// `cfg.scheme` must be trapezoidal; the propagator order is `cfg.order`.
    pub fn new(grid: &TensorGrid, params: FHNParams, cfg: StepperConfig) -> Result<Self> {
        params.validate()?;
        if cfg.scheme != ImexScheme::Trapezoidal {
            return Err(invalid("FitzHugh-Nagumo uses the trapezoidal scheme"));
        }
        Ok(Self {
            stepper: ReactionStepper::new(FitzHughNagumo { params }, grid, cfg)?,
        })
    }

    pub fn stepper(&self) -> &ReactionStepper<FitzHughNagumo> {
        &self.stepper
    }

    pub fn step(&self, u: &Field, v: &Field) -> Result<(Field, Field)> {
        let state: Vec<ArrayD<f64>> = vec![u.values().clone(), v.values().clone()];
        let mut out = self.stepper.step(&state)?.state;
        let v_next = out.pop().expect("two species");
        let u_next = out.pop().expect("two species");
        Ok((u.with_values(u_next)?, v.with_values(v_next)?))
    }
}

/// One trapezoidal step with a second-order propagator.
pub fn fhn_step(
    u: &Field,
    v: &Field,
    params: FHNParams,
    dt: f64,
    bc: BoundaryCondition,
    fp: FixedPointConfig,
) -> Result<(Field, Field)> {
    let mut cfg = StepperConfig::with_order(2, dt, bc)?;
    cfg.fixed_point = fp;
    FhnSolver::new(u.grid(), params, cfg)?.step(u, v)
}
