//! Dimensionally split propagators for tensor grids.
//!
//! Each axis owns a [`LineOperator`]; a step applies the one-dimensional
//! truncated series along every line of one axis, then the next axis. Lines
//! within one axis are independent and are processed in parallel.

use std::sync::{Arc, Mutex};

use ndarray::{ArrayD, Axis, Zip};

use crate::conv1d::{LineOperator, SeriesScratch};
use crate::error::{invalid, MoltError, Result};
use crate::grid::{Field, SchemeConfig, TensorGrid};
use crate::quadrature::ConvolutionPlan;
use crate::resolvent::LaguerreCoeffs;

/// How the per-axis expansions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Product of the full 1D truncated series of every axis.
    Composed,
    /// Single series keeping the terms `c_p c_q D_x^p D_y^q` with `p + q <= P`.
    CrossTruncated,
    /// Like `CrossTruncated` but each total degree `s` carries the
    /// multinomial weight `s! / (p! q!)`.
    Multinomial,
}

impl std::str::FromStr for SplitMode {
    type Err = MoltError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "composed" => Ok(Self::Composed),
            "cross_truncated" | "cross" => Ok(Self::CrossTruncated),
            "multinomial" => Ok(Self::Multinomial),
            other => Err(invalid(format!("unknown split mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for SplitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Composed => write!(f, "composed"),
            Self::CrossTruncated => write!(f, "cross_truncated"),
            Self::Multinomial => write!(f, "multinomial"),
        }
    }
}

/// The discrete propagator `e^{gamma dt Laplacian}` on a tensor grid.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    axes: Vec<LineOperator>,
    coeffs: LaguerreCoeffs,
    mode: SplitMode,
    alpha: f64,
    /// `gamma == 0`: the propagator is the identity and no sweeps run.
    identity: bool,
    shape: Vec<usize>,
}

impl SplitOperator {
    pub fn new(grid: &TensorGrid, cfg: &SchemeConfig, mode: SplitMode) -> Result<Self> {
        cfg.validate()?;
        let coeffs = LaguerreCoeffs::new(cfg.order, cfg.beta2)?;
        if cfg.gamma == 0.0 {
            return Ok(Self {
                axes: Vec::new(),
                coeffs,
                mode,
                alpha: f64::INFINITY,
                identity: true,
                shape: grid.shape(),
            });
        }
        let alpha = cfg.alpha();
        let mut plans: Vec<Arc<ConvolutionPlan>> = Vec::with_capacity(grid.ndim());
        for (k, g) in grid.axes().iter().enumerate() {
            // Axes with identical grids share one plan.
            let shared = grid.axes()[..k].iter().position(|h| h == g);
            let plan = match shared {
                Some(i) => plans[i].clone(),
                None => Arc::new(ConvolutionPlan::build(g, alpha, cfg.spatial_order)?),
            };
            if plan.mu() >= 1.0 {
                return Err(MoltError::DegenerateDomain { mu: plan.mu() });
            }
            plans.push(plan);
        }
        let axes = plans
            .into_iter()
            .map(|p| LineOperator::new(p, cfg.bc))
            .collect();
        Ok(Self {
            axes,
            coeffs,
            mode,
            alpha,
            identity: false,
            shape: grid.shape(),
        })
    }

    /// Builds from existing per-axis line operators.
    pub fn from_line_operators(
        axes: Vec<LineOperator>,
        coeffs: LaguerreCoeffs,
        mode: SplitMode,
    ) -> Result<Self> {
        if axes.is_empty() {
            return Err(invalid("need at least one axis"));
        }
        let alpha = axes[0].plan().alpha();
        if axes
            .iter()
            .any(|a| (a.plan().alpha() - alpha).abs() > 1e-12 * alpha)
        {
            return Err(invalid("all axes must share one alpha"));
        }
        let shape = axes.iter().map(LineOperator::nodes).collect();
        Ok(Self {
            axes,
            coeffs,
            mode,
            alpha,
            identity: false,
            shape,
        })
    }

    pub fn coeffs(&self) -> &LaguerreCoeffs {
        &self.coeffs
    }

    pub fn mode(&self) -> SplitMode {
        self.mode
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    fn check_shape(&self, u: &ArrayD<f64>) -> Result<()> {
        if u.shape() != self.shape.as_slice() {
            return Err(invalid(format!(
                "field shape {:?} does not match operator shape {:?}",
                u.shape(),
                self.shape
            )));
        }
        Ok(())
    }

    /// `out = sum_p weights[p] D_axis^p [input]` along every line of `axis`.
    fn along_axis(&self, axis: usize, input: &ArrayD<f64>, weights: &[f64]) -> Result<ArrayD<f64>> {
        let op = &self.axes[axis];
        let mut out = ArrayD::zeros(input.raw_dim());
        let failure: Mutex<Option<MoltError>> = Mutex::new(None);
        Zip::from(out.lanes_mut(Axis(axis)))
            .and(input.lanes(Axis(axis)))
            .par_for_each(|mut dst, src| {
                let line: Vec<f64> = src.iter().copied().collect();
                let mut res = vec![0.0; line.len()];
                let mut scratch = SeriesScratch::default();
                match op.series_into(&line, weights, &mut res, &mut scratch) {
                    Ok(()) => dst.iter_mut().zip(res).for_each(|(d, r)| *d = r),
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                    }
                }
            });
        match failure.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    /// Applies the propagator to raw nodal values.
    pub fn apply(&self, u: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        self.check_shape(u)?;
        if self.identity {
            return Ok(u.clone());
        }
        let c = self.coeffs.as_slice();
        match self.mode {
            SplitMode::Composed => {
                let mut cur = self.along_axis(0, u, c)?;
                for k in 1..self.axes.len() {
                    cur = self.along_axis(k, &cur, c)?;
                }
                Ok(cur)
            }
            SplitMode::CrossTruncated | SplitMode::Multinomial => {
                self.cross(0, self.coeffs.order(), u, 0)
            }
        }
    }

    /// Sum over multi-indices with total degree `<= budget` on axes `axis..`;
    /// `used` is the degree already spent on earlier axes.
    fn cross(
        &self,
        axis: usize,
        budget: usize,
        v: &ArrayD<f64>,
        used: usize,
    ) -> Result<ArrayD<f64>> {
        let c = self.coeffs.as_slice();
        let last = axis + 1 == self.axes.len();
        if last && self.mode == SplitMode::CrossTruncated {
            return self.along_axis(axis, v, &c[..=budget]);
        }
        let mut acc = ArrayD::zeros(v.raw_dim());
        let mut power = v.clone();
        for (p, &cp) in c.iter().enumerate().take(budget + 1) {
            let term = if last {
                // Multinomial: weight (used + p)! / (used! p!) on the final axis
                // combines with the earlier axes into s! / (p! q! ...).
                let w = cp * binomial(used + p, p);
                power.mapv(|x| w * x)
            } else {
                let mut t = self.cross(axis + 1, budget - p, &power, used + p)?;
                let w = match self.mode {
                    SplitMode::Multinomial => cp * binomial(used + p, p),
                    _ => cp,
                };
                t.mapv_inplace(|x| w * x);
                t
            };
            acc += &term;
            if p < budget {
                power = self.along_axis(axis, &power, &[0.0, 1.0])?;
            }
        }
        Ok(acc)
    }

    pub fn step(&self, u: &Field) -> Result<Field> {
        let out = self.apply(u.values())?;
        u.with_values(out)
    }

    /// `gamma Laplacian u ~ -(beta^2/dt) sum_axes sum_{p=1}^{terms} D^p[u]`
    /// expressed without the diffusion coefficient: returns
    /// `-alpha^2 sum_axes sum_{p=1}^{terms} D_axis^p [u]`.
    pub fn laplacian(&self, u: &ArrayD<f64>, terms: usize) -> Result<ArrayD<f64>> {
        self.check_shape(u)?;
        if terms == 0 {
            return Err(invalid("split Laplacian needs at least one term"));
        }
        if self.identity {
            return Err(invalid(
                "no convolution plans: the operator has zero diffusion",
            ));
        }
        let mut weights = vec![1.0; terms + 1];
        weights[0] = 0.0;
        let mut acc = ArrayD::zeros(u.raw_dim());
        for k in 0..self.axes.len() {
            acc += &self.along_axis(k, u, &weights)?;
        }
        let scale = -self.alpha * self.alpha;
        acc.mapv_inplace(|x| scale * x);
        Ok(acc)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn require_dim(u: &Field, d: usize) -> Result<()> {
    if u.grid().ndim() != d {
        return Err(invalid(format!(
            "expected a {d}D field, got {}D",
            u.grid().ndim()
        )));
    }
    Ok(())
}

pub fn heat_step_2d(u: &Field, op: &SplitOperator) -> Result<Field> {
    require_dim(u, 2)?;
    op.step(u)
}

pub fn heat_step_3d(u: &Field, op: &SplitOperator) -> Result<Field> {
    require_dim(u, 3)?;
    op.step(u)
}

/// Truncated split approximation of the Laplacian (without `gamma`).
pub fn split_laplacian(u: &Field, op: &SplitOperator, terms: usize) -> Result<Field> {
    let out = op.laplacian(u.values(), terms)?;
    u.with_values(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{uniform_grid, BoundaryCondition, Grid1D};
    use crate::resolvent::{amplification, beta_select, BetaPolicy};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn periodic_plane(n: usize) -> Arc<TensorGrid> {
        let g = uniform_grid(0.0, 2.0 * PI, n).unwrap();
        Arc::new(TensorGrid::plane(g.clone(), g))
    }

    fn cfg(order: usize, dt: f64) -> SchemeConfig {
        SchemeConfig {
            gamma: 0.18 * 0.18,
            dt,
            order,
            beta2: beta_select(order, BetaPolicy::StiffDecay).unwrap(),
            spatial_order: 4,
            bc: BoundaryCondition::Periodic,
        }
    }

    #[test]
    fn constants_are_steady_in_every_mode() {
        let grid = periodic_plane(32);
        for mode in [
            SplitMode::Composed,
            SplitMode::CrossTruncated,
            SplitMode::Multinomial,
        ] {
            let op = SplitOperator::new(&grid, &cfg(3, 0.1), mode).unwrap();
            let u = Field::from_fn(grid.clone(), |_| 1.0);
            let v = heat_step_2d(&u, &op).unwrap();
            assert!(v.max_diff(&u).unwrap() < 1e-13, "{mode}");
        }
    }

    /// `op` applied along one line to `f` sampled on `g`.
    fn line_image(g: &Grid1D, c: &SchemeConfig, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let line = Arc::new(TensorGrid::line(g.clone()));
        let op = SplitOperator::new(&line, c, SplitMode::Composed).unwrap();
        let w = op.step(&Field::from_fn(line, |x| f(x[0]))).unwrap();
        w.values().iter().copied().collect()
    }

    #[test]
    fn composed_mode_multiplies_amplification_factors() {
        let grid = periodic_plane(128);
        let c = cfg(2, 0.1);
        let op = SplitOperator::new(&grid, &c, SplitMode::Composed).unwrap();
        let (kx, ky) = (1.0, 2.0);
        let u = Field::from_fn(grid.clone(), |x| (kx * x[0]).sin() * (ky * x[1]).sin());
        let v = heat_step_2d(&u, &op).unwrap();
        let wx = line_image(grid.axis(0), &c, |x| (kx * x).sin());
        let wy = line_image(grid.axis(1), &c, |y| (ky * y).sin());
        for ((i, j), val) in v.values().indexed_iter().map(|(ix, v)| ((ix[0], ix[1]), v)) {
            assert!((val - wx[i] * wy[j]).abs() < 1e-14);
        }
        // Up to the spatial quadrature error the factor is the continuous one.
        let amp = |k: f64| {
            amplification(Complex64::new(-c.gamma * c.dt * k * k, 0.0), op.coeffs())
                .unwrap()
                .re
        };
        let factor = amp(kx) * amp(ky);
        let err = v
            .values()
            .iter()
            .zip(u.values().iter())
            .map(|(v, u)| (v - factor * u).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn three_d_reduces_to_line_step_for_x_only_data() {
        let g = uniform_grid(0.0, 2.0 * PI, 24).unwrap();
        let grid = Arc::new(TensorGrid::cube(g.clone(), g.clone(), g.clone()));
        let c = cfg(2, 0.05);
        let op = SplitOperator::new(&grid, &c, SplitMode::Composed).unwrap();
        let u = Field::from_fn(grid.clone(), |x| x[0].sin());
        let v = heat_step_3d(&u, &op).unwrap();

        let line = Arc::new(TensorGrid::line(g.clone()));
        let op1 = SplitOperator::new(&line, &c, SplitMode::Composed).unwrap();
        let w = op1.step(&Field::from_fn(line, |x| x[0].sin())).unwrap();
        for ((i, _, _), val) in v
            .values()
            .indexed_iter()
            .map(|(ix, v)| ((ix[0], ix[1], ix[2]), v))
        {
            assert!((val - w.values()[[i]]).abs() < 1e-13);
        }
        assert!(heat_step_2d(&u, &op).is_err());
    }

    #[test]
    fn triple_eigenmode_is_product_of_factors() {
        let g = uniform_grid(0.0, 2.0 * PI, 48).unwrap();
        let grid = Arc::new(TensorGrid::cube(g.clone(), g.clone(), g.clone()));
        let c = cfg(1, 0.2);
        let op = SplitOperator::new(&grid, &c, SplitMode::Composed).unwrap();
        let u = Field::from_fn(grid, |x| x[0].sin() * x[1].sin() * (2.0 * x[2]).cos());
        let v = heat_step_3d(&u, &op).unwrap();
        let w1 = line_image(&g, &c, f64::sin);
        let w2 = line_image(&g, &c, |z| (2.0 * z).cos());
        for (ix, val) in v.values().indexed_iter() {
            let want = w1[ix[0]] * w1[ix[1]] * w2[ix[2]];
            assert!((val - want).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_diffusion_is_identity() {
        let grid = periodic_plane(16);
        let mut c = cfg(2, 0.1);
        c.gamma = 0.0;
        let op = SplitOperator::new(&grid, &c, SplitMode::Composed).unwrap();
        assert!(op.is_identity());
        let u = Field::from_fn(grid, |x| x[0] * x[1]);
        assert_eq!(op.step(&u).unwrap().values(), u.values());
    }

    #[test]
    fn laplacian_examples() {
        let g = uniform_grid(0.0, 2.0 * PI, 256).unwrap();
        let line = Arc::new(TensorGrid::line(g.clone()));
        // alpha = 20 with beta^2 = 1, gamma = 1: dt = 1/400
        let c = SchemeConfig {
            gamma: 1.0,
            dt: 1.0 / 400.0,
            order: 1,
            beta2: 1.0,
            spatial_order: 4,
            bc: BoundaryCondition::Periodic,
        };
        let op = SplitOperator::new(&line, &c, SplitMode::Composed).unwrap();
        assert!((op.alpha() - 20.0).abs() < 1e-12);
        let u = Field::from_fn(line.clone(), |x| x[0].sin());
        let lap = split_laplacian(&u, &op, 1).unwrap();
        let amp: f64 = -1.0 / (1.0 + 1.0 / 400.0);
        assert!((amp + 0.99750).abs() < 1e-5);
        for (l, u) in lap.values().iter().zip(u.values().iter()) {
            assert!((l - amp * u).abs() < 1e-7);
        }
        let ones = Field::from_fn(line, |_| 1.0);
        assert!(split_laplacian(&ones, &op, 3).unwrap().max_norm().unwrap() < 1e-9);

        let grid = periodic_plane(256);
        let op = SplitOperator::new(&grid, &c, SplitMode::Composed).unwrap();
        let u = Field::from_fn(grid, |x| x[0].sin() * x[1].sin());
        let lap = split_laplacian(&u, &op, 2).unwrap();
        // per mode: -alpha^2 (d + d^2), d = (1/400) / (1 + 1/400)
        let d = (1.0 / 400.0) / (1.0 + 1.0 / 400.0);
        let exact_trunc = -2.0 * 400.0 * (d + d * d);
        for (l, u) in lap.values().iter().zip(u.values().iter()) {
            assert!((l - exact_trunc * u).abs() < 1e-7);
            assert!((l + 2.0 * u).abs() < 2e-5);
        }
    }

    #[test]
    fn symmetric_data_stays_symmetric() {
        let g = uniform_grid(-1.0, 1.0, 64).unwrap();
        let grid = Arc::new(TensorGrid::plane(g.clone(), g));
        let mut c = cfg(3, 0.01);
        c.bc = BoundaryCondition::HomogeneousNeumann;
        let op = SplitOperator::new(&grid, &c, SplitMode::Composed).unwrap();
        let u = Field::from_fn(grid, |x| {
            (-(x[0] * x[0] + 2.0 * x[1] * x[1] + x[0] * x[1] * x[1]).abs()).exp()
                + (-(x[1] * x[1] + 2.0 * x[0] * x[0] + x[1] * x[0] * x[0]).abs()).exp()
        });
        let v = op.step(&u).unwrap();
        let a = v.values();
        let n = a.shape()[0];
        for i in 0..n {
            for j in 0..n {
                assert!((a[[i, j]] - a[[j, i]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_mismatched_fields() {
        let grid = periodic_plane(16);
        let op = SplitOperator::new(&grid, &cfg(1, 0.1), SplitMode::Composed).unwrap();
        let other = Arc::new(TensorGrid::plane(
            uniform_grid(0.0, 1.0, 8).unwrap(),
            Grid1D::uniform(0.0, 1.0, 16).unwrap(),
        ));
        assert!(op.step(&Field::zeros(other)).is_err());
    }
}
