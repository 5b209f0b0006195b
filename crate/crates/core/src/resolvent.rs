//! Truncated resolvent (Laguerre) expansion of the heat propagator.
//!
//! `e^{gamma dt d_xx} = sum_p L^{(-1)}_p(beta^2) D^p` with `D = I - L^{-1}`;
//! keeping `p <= P` gives the scheme, and the choice of `beta^2` trades the
//! order of accuracy against stiff decay.

use num_complex::Complex64;

use crate::conv1d::{LineOperator, SeriesScratch};
use crate::error::{invalid, MoltError, Result};
use crate::grid::{Field, SchemeConfig};
use crate::quadrature::ConvolutionPlan;

/// Generalized Laguerre polynomial `L^{(lambda)}_p(x)` by the three-term
/// recurrence `(k+1) L_{k+1} = (2k + 1 + lambda - x) L_k - (k + lambda) L_{k-1}`.
pub fn laguerre(p: usize, lambda: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 1.0 + lambda - x;
    for k in 1..p {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + lambda - x) * cur - (k + lambda) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// How `beta^2` is chosen for a given expansion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaPolicy {
    /// Smallest root of `L_P`: order `P` with `phi(-inf) = 0`.
    StiffDecay,
    /// Smallest root of `L'_{P+1}`: order `P + 1`, no stiff decay.
    MaximalOrder,
}

impl std::str::FromStr for BetaPolicy {
    type Err = MoltError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "stiff_decay" | "stiff" => Ok(Self::StiffDecay),
            "maximal_order" | "max_order" | "maximal" => Ok(Self::MaximalOrder),
            other => Err(invalid(format!("unknown beta policy '{other}'"))),
        }
    }
}

impl std::fmt::Display for BetaPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::StiffDecay => write!(f, "stiff_decay"),
            Self::MaximalOrder => write!(f, "maximal_order"),
        }
    }
}

pub const MAX_ORDER: usize = 12;

/// `beta^2` for expansion order `P` under `policy`.
pub fn beta_select(order: usize, policy: BetaPolicy) -> Result<f64> {
    if order == 0 || order > MAX_ORDER {
        return Err(invalid(format!(
            "expansion order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    // L'_{P+1} = -L^{(1)}_P, so both targets are Laguerre polynomials.
    let (deg, lambda) = match policy {
        BetaPolicy::StiffDecay => (order, 0.0),
        BetaPolicy::MaximalOrder => (order, 1.0),
    };
    smallest_root(
        |x| laguerre(deg, lambda, x),
        |x| -laguerre(deg - 1, lambda + 1.0, x),
    )
}

fn smallest_root(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Result<f64> {
    // The polynomials are positive at 0 and the smallest root is simple and
    // below 4, so a fine scan brackets it.
    let step = 1e-3;
    let mut lo = 0.0;
    let mut flo = f(lo);
    let mut hi = lo;
    let mut found = false;
    while hi < 4.0 {
        hi = lo + step;
        let fhi = f(hi);
        if flo.signum() != fhi.signum() || fhi == 0.0 {
            found = true;
            break;
        }
        lo = hi;
        flo = fhi;
    }
    if !found {
        return Err(MoltError::RootBracketing("no sign change below 4".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-15 {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = df(x);
        if d == 0.0 {
            break;
        }
        let nx = x - f(x) / d;
        if (nx - x).abs() > 1e-12 {
            break;
        }
        x = nx;
    }
    Ok(x)
}

/// Expansion coefficients `c_p = L^{(-1)}_p(beta^2)`, `p = 0..=P`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreCoeffs {
    beta2: f64,
    coeffs: Vec<f64>,
}

impl LaguerreCoeffs {
    pub fn new(order: usize, beta2: f64) -> Result<Self> {
        if order == 0 {
            return Err(invalid("expansion order P must be >= 1"));
        }
        if !(beta2 > 0.0) || !beta2.is_finite() {
            return Err(invalid(format!("beta^2 must be > 0, got {beta2}")));
        }
        let coeffs = (0..=order).map(|p| laguerre(p, -1.0, beta2)).collect();
        Ok(Self { beta2, coeffs })
    }

    pub fn with_policy(order: usize, policy: BetaPolicy) -> Result<Self> {
        Self::new(order, beta_select(order, policy)?)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    /// `sum_p c_p`, the amplification factor as `z -> -inf`.
    pub fn limit(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

/// A sample of the amplification factor along some curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilitySample {
    pub z: Complex64,
    pub phi: Complex64,
}

/// `phi(z) = sum_p c_p Dhat^p` with `Dhat = -(z/beta^2) / (1 - z/beta^2)`.
pub fn amplification(z: Complex64, coeffs: &LaguerreCoeffs) -> Result<Complex64> {
    let s = z / coeffs.beta2();
    let denom = Complex64::new(1.0, 0.0) - s;
    if denom.norm() == 0.0 {
        return Err(MoltError::Pole(z.re));
    }
    let dhat = if z.re.is_infinite() {
        Complex64::new(1.0, 0.0)
    } else {
        -s / denom
    };
    // Horner in Dhat.
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.as_slice().iter().rev() {
        acc = acc * dhat + c;
    }
    Ok(acc)
}

/// `|phi(iy)|` at `count` log-spaced `y` in `[y_min, y_max]`.
pub fn imaginary_axis_samples(
    coeffs: &LaguerreCoeffs,
    y_min: f64,
    y_max: f64,
    count: usize,
) -> Result<Vec<StabilitySample>> {
    if !(y_min > 0.0) || !(y_max > y_min) || count < 2 {
        return Err(invalid("need 0 < y_min < y_max and at least 2 samples"));
    }
    let (l0, l1) = (y_min.ln(), y_max.ln());
    (0..count)
        .map(|i| {
            let y = (l0 + (l1 - l0) * i as f64 / (count - 1) as f64).exp();
            let z = Complex64::new(0.0, y);
            amplification(z, coeffs).map(|phi| StabilitySample { z, phi })
        })
        .collect()
}

/// Largest sector half-angle `theta` (radians) about the negative real axis
/// on which `|phi| <= 1 + tol`, measured on a polar sample grid.
pub fn stability_angle(coeffs: &LaguerreCoeffs, tol: f64) -> Result<f64> {
    let radii: Vec<f64> = (0..400)
        .map(|i| 10f64.powf(-3.0 + 9.0 * i as f64 / 399.0))
        .collect();
    let steps = 9000;
    let mut best = 0.0;
    for k in 0..=steps {
        let theta = std::f64::consts::FRAC_PI_2 * k as f64 / steps as f64;
        let dir = Complex64::from_polar(1.0, std::f64::consts::PI - theta);
        for &r in &radii {
            let phi = amplification(dir * r, coeffs)?;
            if phi.norm() > 1.0 + tol {
                return Ok(best);
            }
        }
        best = theta;
    }
    Ok(best)
}

/// One step of the 1D scheme `u^{n+1} = sum_{p<=P} c_p D^p[u^n]`.
pub fn heat_step_1d(u: &Field, cfg: &SchemeConfig, plan: &ConvolutionPlan) -> Result<Field> {
    cfg.validate()?;
    if u.grid().ndim() != 1 {
        return Err(invalid("heat_step_1d needs a one-dimensional field"));
    }
    let alpha = cfg.alpha();
    if (plan.alpha() - alpha).abs() > 1e-12 * alpha {
        return Err(invalid(format!(
            "plan alpha {} does not match the configured alpha {alpha}",
            plan.alpha()
        )));
    }
    let coeffs = LaguerreCoeffs::new(cfg.order, cfg.beta2)?;
    let op = LineOperator::new(std::sync::Arc::new(plan.clone()), cfg.bc);
    let input = u.values().as_slice().expect("standard layout");
    let mut out = vec![0.0; input.len()];
    op.series_into(
        input,
        coeffs.as_slice(),
        &mut out,
        &mut SeriesScratch::default(),
    )?;
    u.with_values(ndarray::ArrayD::from_shape_vec(u.values().raw_dim(), out).expect("shape"))
}
