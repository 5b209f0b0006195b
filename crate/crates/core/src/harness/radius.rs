use crate::error::{invalid, MoltError, Result};
use crate::grid::Field;

/// Zero crossings of a circular interface on the slice through its center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusEstimate {
    /// Distance from the center to the crossing on the `+x` side.
    pub plus: f64,
    /// Distance from the center to the crossing on the `-x` side.
    pub minus: f64,
}

impl RadiusEstimate {
    pub fn radius(&self) -> f64 {
        0.5 * (self.plus + self.minus)
    }
}

/// Locates `u = 0` along the `x` slice through `center`, moving outward from
/// the center and interpolating linearly between the bracketing nodes.
pub fn track_radius(field: &Field, center: [f64; 2]) -> Result<RadiusEstimate> {
    let grid = field.grid();
    if grid.ndim() != 2 {
        return Err(invalid("radius tracking needs a two-dimensional field"));
    }
    let xs = grid.axis(0).nodes();
    let row = grid.axis(1).nearest(center[1]);
    let slice: Vec<f64> = (0..xs.len()).map(|i| field.values()[[i, row]]).collect();
    let mid = grid.axis(0).nearest(center[0]);

    let crossing = |range: &mut dyn Iterator<Item = (usize, usize)>| -> Option<f64> {
        for (i, k) in range {
            let (a, b) = (slice[i], slice[k]);
            if a == 0.0 {
                return Some(xs[i]);
            }
            if a * b < 0.0 || b == 0.0 {
                let s = a / (a - b);
                return Some(xs[i] + s * (xs[k] - xs[i]));
            }
        }
        None
    };
    let plus = crossing(&mut (mid..xs.len() - 1).map(|i| (i, i + 1)));
    let minus = crossing(&mut (1..=mid).rev().map(|i| (i, i - 1)));
    match (plus, minus) {
        (Some(p), Some(m)) => Ok(RadiusEstimate {
            plus: p - center[0],
            minus: center[0] - m,
        }),
        _ => Err(MoltError::InterfaceLost),
    }
}

/// Sharp-interface radius `sqrt(R0^2 - 2 eps^2 t)`; zero once the circle is gone.
pub fn reference_radius(r0: f64, epsilon: f64, t: f64) -> f64 {
    (r0 * r0 - 2.0 * epsilon * epsilon * t).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{uniform_grid, TensorGrid};
    use std::sync::Arc;

    fn plane(n: usize) -> Arc<TensorGrid> {
        let g = uniform_grid(0.0, 1.0, n).unwrap();
        Arc::new(TensorGrid::plane(g.clone(), g))
    }

    #[test]
    fn initial_circle_radius_within_one_cell() {
        let eps = 0.05;
        let u = Field::from_fn(plane(256), |x| {
            let r = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
            ((0.25 - r) / (2f64.sqrt() * eps)).tanh()
        });
        let est = track_radius(&u, [0.5, 0.5]).unwrap();
        assert!((est.radius() - 0.25).abs() < 1.0 / 256.0);
        // The profile is symmetric about x = 0.5.
        assert!((est.plus - est.minus).abs() < 1e-12);
    }

    #[test]
    fn linear_profile_is_exact() {
        let u = Field::from_fn(plane(64), |x| 0.3 - (x[0] - 0.5).abs());
        let est = track_radius(&u, [0.5, 0.5]).unwrap();
        assert!((est.plus - 0.3).abs() < 1e-12);
        assert!((est.minus - 0.3).abs() < 1e-12);
    }

    #[test]
    fn vanished_interface_is_reported() {
        let u = Field::from_fn(plane(32), |_| -1.0);
        assert!(matches!(
            track_radius(&u, [0.5, 0.5]),
            Err(MoltError::InterfaceLost)
        ));
    }

    #[test]
    fn reference_curve() {
        assert_eq!(reference_radius(0.25, 0.05, 0.0), 0.25);
        let t = 10.24;
        let want = (0.0625f64 - 2.0 * 0.0025 * t).sqrt();
        assert!((reference_radius(0.25, 0.05, t) - want).abs() < 1e-15);
        assert_eq!(reference_radius(0.25, 0.05, 100.0), 0.0);
    }
}
