//! Exponentially weighted local quadrature for the convolution sweeps.
//!
//! On each cell the local integral
//! `J = (nu/2) * int_0^1 e^{-nu z} u(z) dz`
//! is replaced by a weighted sum of `M + 1` nodal values. The weights are the
//! exact moments of the interpolating polynomial of degree `M`, so the rule
//! integrates every polynomial of degree `<= M` exactly.

use crate::error::{invalid, MoltError, Result};
use crate::grid::Grid1D;
use crate::linalg::solve_dense;

/// Above this `nu` the upward recurrence is stable (`nu` exceeds every `k <= M`
/// by a wide margin); below it the positive-term series is used.
const SERIES_LIMIT: f64 = 40.0;

/// `phi_k = (nu/2) int_0^1 e^{-nu z} z^k dz` for `k = 0..=max_k`.
pub fn phi_moments(nu: f64, max_k: usize) -> Result<Vec<f64>> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(invalid(format!("nu must be finite and > 0, got {nu}")));
    }
    let mut out = Vec::with_capacity(max_k + 1);
    if nu <= SERIES_LIMIT {
        // int_0^1 e^{-nu z} z^k dz = e^{-nu} sum_m nu^m k! / (k+m+1)!
        // Every term is positive, so there is no cancellation for small nu.
        let damp = (-nu).exp();
        for k in 0..=max_k {
            let mut term = 1.0 / (k as f64 + 1.0);
            let mut sum = term;
            let mut m = 0.0;
            loop {
                term *= nu / (k as f64 + m + 2.0);
                sum += term;
                m += 1.0;
                if term <= 1e-17 * sum {
                    break;
                }
            }
            out.push(0.5 * nu * damp * sum);
        }
    } else {
        let damp = (-nu).exp();
        let mut integral = -(-nu).exp_m1() / nu;
        out.push(0.5 * nu * integral);
        for k in 1..=max_k {
            integral = (k as f64 * integral - damp) / nu;
            out.push(0.5 * nu * integral);
        }
    }
    Ok(out)
}

/// Which recursion a stencil feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepSide {
    /// Left-to-right sweep over cell `[x_{j-1}, x_j]`, landing on `x_j`.
    Left,
    /// Right-to-left sweep over cell `[x_j, x_{j+1}]`, landing on `x_j`.
    Right,
}

/// Consecutive node indices `j - ell ..= j + r` used on one cell.
///
/// `ell + r = M`, so the stencil holds `M + 1` nodes. The offsets are
/// measured from the landing node `j`; near the ends the stencil is shifted
/// to be one-sided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StencilSpec {
    pub j: usize,
    pub ell: usize,
    pub r: usize,
}

impl StencilSpec {
    /// Centered stencil for `side` on an `N`-cell grid, clipped at the ends.
    pub fn for_cell(side: SweepSide, j: usize, degree: usize, cells: usize) -> Result<Self> {
        if degree > cells {
            return Err(invalid(format!(
                "stencil of degree {degree} needs more than {cells} cells"
            )));
        }
        let reach_left = match side {
            SweepSide::Left => {
                if j == 0 || j > cells {
                    return Err(invalid(format!("left cell index {j} out of 1..={cells}")));
                }
                degree.div_ceil(2)
            }
            SweepSide::Right => {
                if j >= cells {
                    return Err(invalid(format!("right cell index {j} out of 0..{cells}")));
                }
                degree - degree.div_ceil(2)
            }
        };
        let start = (j as isize - reach_left as isize).clamp(0, (cells - degree) as isize) as usize;
        Ok(Self {
            j,
            ell: j - start,
            r: start + degree - j,
        })
    }

    pub fn first(&self) -> usize {
        self.j - self.ell
    }

    pub fn len(&self) -> usize {
        self.ell + self.r + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.first()..=self.j + self.r
    }
}

/// Weights `w` with `sum_i w_i q(z_i) = (nu/2) int_0^1 e^{-nu z} q(z) dz` for
/// every polynomial `q` of degree `< offsets.len()`.
///
/// `offsets` are the stencil nodes in the local coordinate `z` of the cell.
pub fn local_weights(nu: f64, offsets: &[f64]) -> Result<Vec<f64>> {
    let n = offsets.len();
    if n == 0 {
        return Err(invalid("empty stencil"));
    }
    for (i, a) in offsets.iter().enumerate() {
        if offsets[..i].iter().any(|b| b == a) {
            return Err(MoltError::SingularSystem(format!(
                "duplicate stencil node z = {a}"
            )));
        }
    }
    let phi = phi_moments(nu, n - 1)?;
    // Row k of the transposed Vandermonde matrix holds z_i^k.
    let mut a = vec![0.0; n * n];
    for (i, &z) in offsets.iter().enumerate() {
        let mut p = 1.0;
        for k in 0..n {
            a[k * n + i] = p;
            p *= z;
        }
    }
    solve_dense(a, phi)
}

/// Per-cell precomputation for one grid line and one `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionPlan {
    alpha: f64,
    degree: usize,
    a: f64,
    b: f64,
    nu: Vec<f64>,
    exp_nu: Vec<f64>,
    left_first: Vec<usize>,
    left_weights: Vec<f64>,
    right_first: Vec<usize>,
    right_weights: Vec<f64>,
    decay_from_a: Vec<f64>,
    decay_from_b: Vec<f64>,
    mu: f64,
}

impl ConvolutionPlan {
    pub fn build(grid: &Grid1D, alpha: f64, degree: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid(format!(
                "alpha must be finite and > 0, got {alpha}"
            )));
        }
        if degree == 0 {
            return Err(invalid("spatial order M must be >= 1"));
        }
        if grid.len() < degree + 2 {
            return Err(invalid(format!(
                "grid with {} nodes is too small for M = {degree}",
                grid.len()
            )));
        }
        let cells = grid.cells();
        let x = grid.nodes();
        let h = grid.spacings();
        let nu: Vec<f64> = h.iter().map(|h| alpha * h).collect();
        let exp_nu: Vec<f64> = nu.iter().map(|n| (-n).exp()).collect();
        let width = degree + 1;

        let mut left_first = Vec::with_capacity(cells);
        let mut left_weights = Vec::with_capacity(cells * width);
        let mut right_first = Vec::with_capacity(cells);
        let mut right_weights = Vec::with_capacity(cells * width);
        let mut offsets = vec![0.0; width];
        for j in 1..=cells {
            let s = StencilSpec::for_cell(SweepSide::Left, j, degree, cells)?;
            let hj = h[j - 1];
            for (o, i) in offsets.iter_mut().zip(s.indices()) {
                *o = (x[j] - x[i]) / hj;
            }
            left_first.push(s.first());
            left_weights.extend(local_weights(nu[j - 1], &offsets)?);
        }
        for j in 0..cells {
            let s = StencilSpec::for_cell(SweepSide::Right, j, degree, cells)?;
            let hj = h[j];
            for (o, i) in offsets.iter_mut().zip(s.indices()) {
                *o = (x[i] - x[j]) / hj;
            }
            right_first.push(s.first());
            right_weights.extend(local_weights(nu[j], &offsets)?);
        }
        let a = grid.a();
        let b = grid.b();
        let decay_from_a = x.iter().map(|xj| (-alpha * (xj - a)).exp()).collect();
        let decay_from_b = x.iter().map(|xj| (-alpha * (b - xj)).exp()).collect();
        Ok(Self {
            alpha,
            degree,
            a,
            b,
            nu,
            exp_nu,
            left_first,
            left_weights,
            right_first,
            right_weights,
            decay_from_a,
            decay_from_b,
            mu: (-alpha * (b - a)).exp(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Polynomial degree `M` of the local quadrature.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> usize {
        self.nu.len() + 1
    }

    pub fn cells(&self) -> usize {
        self.nu.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// `nu_j = alpha h_j` for cells `1..=N` (index `j - 1`).
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn exp_nu(&self) -> &[f64] {
        &self.exp_nu
    }

    /// `e^{-alpha (b - a)}`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// First node index and weights of the left stencil on cell `j` (1-based).
    pub fn left_row(&self, j: usize) -> (usize, &[f64]) {
        let w = self.degree + 1;
        (
            self.left_first[j - 1],
            &self.left_weights[(j - 1) * w..j * w],
        )
    }

    /// First node index and weights of the right stencil on cell `[x_j, x_{j+1}]`.
    pub fn right_row(&self, j: usize) -> (usize, &[f64]) {
        let w = self.degree + 1;
        (self.right_first[j], &self.right_weights[j * w..(j + 1) * w])
    }

    pub fn decay_from_a(&self) -> &[f64] {
        &self.decay_from_a
    }

    pub fn decay_from_b(&self) -> &[f64] {
        &self.decay_from_b
    }
}

/// Free-function form of [`ConvolutionPlan::build`].
pub fn build_plan(grid: &Grid1D, alpha: f64, degree: usize) -> Result<ConvolutionPlan> {
    ConvolutionPlan::build(grid, alpha, degree)
}
