//! One-dimensional inversion of the modified Helmholtz operator
//! `L = I - d_xx / alpha^2` by exponential recursion.
//!
//! `L^{-1}[u](x) = I[u](x) + B_a e^{-alpha (x - a)} + B_b e^{-alpha (b - x)}`
//! where `I[u](x) = (alpha/2) int_a^b e^{-alpha |x - y|} u(y) dy` is split into
//! a left and a right sweep, each costing `O(M N)`.

use std::sync::Arc;

use crate::error::{invalid, MoltError, Result};
use crate::grid::BoundaryCondition;
use crate::quadrature::ConvolutionPlan;

/// Scratch storage for the two sweeps over one line.
#[derive(Debug, Clone, Default)]
pub struct LineBuffer {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl LineBuffer {
    pub fn new(nodes: usize) -> Self {
        Self {
            left: vec![0.0; nodes],
            right: vec![0.0; nodes],
        }
    }

    fn ensure(&mut self, nodes: usize) {
        if self.left.len() != nodes {
            self.left.resize(nodes, 0.0);
            self.right.resize(nodes, 0.0);
        }
    }
}

/// Coefficients of the homogeneous solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCoefficients {
    pub ba: f64,
    pub bb: f64,
}

fn check_len(u: &[f64], plan: &ConvolutionPlan) -> Result<()> {
    if u.len() != plan.nodes() {
        return Err(invalid(format!(
            "line has {} values but the plan expects {}",
            u.len(),
            plan.nodes()
        )));
    }
    Ok(())
}

/// Runs both sweeps; afterwards `buf.left[j] + buf.right[j] = I[u](x_j)`.
fn sweep(u: &[f64], plan: &ConvolutionPlan, buf: &mut LineBuffer) {
    let n = plan.cells();
    buf.ensure(n + 1);
    let exp_nu = plan.exp_nu();

    buf.left[0] = 0.0;
    for j in 1..=n {
        let (first, w) = plan.left_row(j);
        let local: f64 = w
            .iter()
            .zip(&u[first..first + w.len()])
            .map(|(w, u)| w * u)
            .sum();
        buf.left[j] = exp_nu[j - 1] * buf.left[j - 1] + local;
    }

    buf.right[n] = 0.0;
    for j in (0..n).rev() {
        let (first, w) = plan.right_row(j);
        let local: f64 = w
            .iter()
            .zip(&u[first..first + w.len()])
            .map(|(w, u)| w * u)
            .sum();
        buf.right[j] = exp_nu[j] * buf.right[j + 1] + local;
    }
}

/// Particular solution `I[u]` at every node.
pub fn particular(u: &[f64], plan: &ConvolutionPlan) -> Result<Vec<f64>> {
    check_len(u, plan)?;
    let mut buf = LineBuffer::new(u.len());
    sweep(u, plan, &mut buf);
    Ok(buf
        .left
        .iter()
        .zip(&buf.right)
        .map(|(l, r)| l + r)
        .collect())
}

/// Solves the 2x2 boundary system for `B_a`, `B_b` given `I(a)` and `I(b)`.
pub fn boundary_close(
    ia: f64,
    ib: f64,
    bc: BoundaryCondition,
    mu: f64,
) -> Result<BoundaryCoefficients> {
    if !(mu < 1.0) || !(mu >= 0.0) {
        return Err(MoltError::DegenerateDomain { mu });
    }
    Ok(match bc {
        BoundaryCondition::Periodic => {
            let d = 1.0 - mu;
            BoundaryCoefficients {
                ba: ib / d,
                bb: ia / d,
            }
        }
        BoundaryCondition::HomogeneousNeumann => {
            // w_x(a) = alpha (I(a) - B_a + mu B_b) = 0, w_x(b) = alpha (-I(b) - mu B_a + B_b) = 0
            let d = 1.0 - mu * mu;
            BoundaryCoefficients {
                ba: (ia + mu * ib) / d,
                bb: (ib + mu * ia) / d,
            }
        }
    })
}

fn linv_into(
    u: &[f64],
    out: &mut [f64],
    bc: BoundaryCondition,
    plan: &ConvolutionPlan,
    buf: &mut LineBuffer,
) -> Result<()> {
    sweep(u, plan, buf);
    let n = plan.cells();
    let ia = buf.right[0];
    let ib = buf.left[n];
    let c = boundary_close(ia, ib, bc, plan.mu())?;
    let da = plan.decay_from_a();
    let db = plan.decay_from_b();
    for j in 0..=n {
        out[j] = buf.left[j] + buf.right[j] + c.ba * da[j] + c.bb * db[j];
    }
    Ok(())
}

/// `L^{-1}[u]` with the given boundary closure.
pub fn apply_linv(u: &[f64], bc: BoundaryCondition, plan: &ConvolutionPlan) -> Result<Vec<f64>> {
    check_len(u, plan)?;
    let mut out = vec![0.0; u.len()];
    linv_into(u, &mut out, bc, plan, &mut LineBuffer::new(u.len()))?;
    Ok(out)
}

/// `D[u] = u - L^{-1}[u]`.
pub fn apply_d(u: &[f64], bc: BoundaryCondition, plan: &ConvolutionPlan) -> Result<Vec<f64>> {
    let mut out = apply_linv(u, bc, plan)?;
    for (o, u) in out.iter_mut().zip(u) {
        *o = u - *o;
    }
    Ok(out)
}

/// A plan paired with a boundary condition: the per-line operator used by
/// the sweeps of the multi-dimensional solvers.
#[derive(Debug, Clone)]
pub struct LineOperator {
    plan: Arc<ConvolutionPlan>,
    bc: BoundaryCondition,
}

/// Reusable storage for [`LineOperator::series_into`].
#[derive(Debug, Clone, Default)]
pub struct SeriesScratch {
    sweep: LineBuffer,
    power: Vec<f64>,
    next: Vec<f64>,
}

impl LineOperator {
    pub fn new(plan: Arc<ConvolutionPlan>, bc: BoundaryCondition) -> Self {
        Self { plan, bc }
    }

    pub fn plan(&self) -> &ConvolutionPlan {
        &self.plan
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn nodes(&self) -> usize {
        self.plan.nodes()
    }

    pub fn linv_into(&self, u: &[f64], out: &mut [f64], buf: &mut LineBuffer) -> Result<()> {
        check_len(u, &self.plan)?;
        linv_into(u, out, self.bc, &self.plan, buf)
    }

    /// `out = sum_p weights[p] D^p[u]`, computing the powers successively
    /// with two line-sized buffers.
    pub fn series_into(
        &self,
        u: &[f64],
        weights: &[f64],
        out: &mut [f64],
        scratch: &mut SeriesScratch,
    ) -> Result<()> {
        check_len(u, &self.plan)?;
        let n = u.len();
        let w0 = weights.first().copied().unwrap_or(0.0);
        for (o, u) in out.iter_mut().zip(u) {
            *o = w0 * u;
        }
        if weights.len() <= 1 {
            return Ok(());
        }
        scratch.power.clear();
        scratch.power.extend_from_slice(u);
        scratch.next.resize(n, 0.0);
        for &w in &weights[1..] {
            linv_into(
                &scratch.power,
                &mut scratch.next,
                self.bc,
                &self.plan,
                &mut scratch.sweep,
            )?;
            for (nx, p) in scratch.next.iter_mut().zip(&scratch.power) {
                *nx = p - *nx;
            }
            std::mem::swap(&mut scratch.power, &mut scratch.next);
            for (o, d) in out.iter_mut().zip(&scratch.power) {
                *o += w * d;
            }
        }
        Ok(())
    }
}
