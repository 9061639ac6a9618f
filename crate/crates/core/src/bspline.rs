//! Clamped B-spline basis on a window with equally spaced interior knots.

use crate::error::{P3lsError, Result};
use crate::numerics::{Curve, Grid, Window};

#[derive(Debug, Clone)]
pub struct BSplineBasis {
    degree: usize,
    knots: Vec<f64>,
    size: usize,
}

impl BSplineBasis {
    /// `size` basis functions of the given degree; the boundary knots are
    /// repeated `degree + 1` times and the `size - degree - 1` interior knots
    /// split the window evenly.
    pub fn clamped(window: Window, size: usize, degree: usize) -> Result<Self> {
        if size < degree + 1 {
            return Err(P3lsError::InvalidConfig(format!(
                "{size} basis functions cannot carry degree {degree}"
            )));
        }
        let intervals = size - degree;
        let width = window.length() / intervals as f64;
        let mut knots = Vec::with_capacity(size + degree + 1);
        knots.extend(std::iter::repeat_n(window.start, degree + 1));
        for k in 1..intervals {
            knots.push(window.start + k as f64 * width);
        }
        knots.extend(std::iter::repeat_n(window.end, degree + 1));
        Ok(Self {
            degree,
            knots,
            size,
        })
    }

    pub fn cubic(window: Window, size: usize) -> Result<Self> {
        Self::clamped(window, size, 3)
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Values of all basis functions at `x` (zero outside the window).
    pub fn evaluate(&self, x: f64) -> Vec<f64> {
        let p = self.degree;
        let t = &self.knots;
        let mut out = vec![0.0; self.size];
        let lo = t[p];
        let hi = t[self.size];
        if x < lo || x > hi {
            return out;
        }
        // knot span with t[span] <= x < t[span + 1]; the right end belongs to the last span
        let span = if x >= hi {
            self.size - 1
        } else {
            let mut s = p;
            while s + 1 < self.size && t[s + 1] <= x {
                s += 1;
            }
            s
        };

        // Cox–de Boor triangle on the p + 1 non-zero functions
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        for (j, v) in n.into_iter().enumerate() {
            out[span - p + j] = v;
        }
        out
    }

    /// Each basis function sampled on the grid.
    pub fn on_grid(&self, grid: &Grid) -> Vec<Curve> {
        let rows: Vec<Vec<f64>> = grid.points().into_iter().map(|x| self.evaluate(x)).collect();
        (0..self.size)
            .map(|j| {
                let values = rows.iter().map(|r| r[j]).collect();
                Curve::new(*grid, values).expect("finite spline values")
            })
            .collect()
    }

    /// `Σ_j coefficients_j φ_j` on the grid.
    pub fn combine(&self, grid: &Grid, coefficients: &[f64]) -> Result<Curve> {
        if coefficients.len() != self.size {
            return Err(P3lsError::DimensionMismatch(format!(
                "{} coefficients for {} basis functions",
                coefficients.len(),
                self.size
            )));
        }
        let values = grid
            .points()
            .into_iter()
            .map(|x| {
                self.evaluate(x)
                    .iter()
                    .zip(coefficients)
                    .map(|(b, c)| b * c)
                    .sum()
            })
            .collect();
        Curve::new(*grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature;

    fn window() -> Window {
        Window::new(0.0, 24.0).unwrap()
    }

    #[test]
    fn partition_of_unity() {
        let basis = BSplineBasis::cubic(window(), 20).unwrap();
        for k in 0..=480 {
            let x = 24.0 * k as f64 / 480.0;
            let v = basis.evaluate(x);
            assert!(v.iter().all(|&b| b >= -1e-15));
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn boundary_functions_peak_at_one() {
        let basis = BSplineBasis::cubic(window(), 20).unwrap();
        assert!((basis.evaluate(0.0)[0] - 1.0).abs() < 1e-15);
        assert!((basis.evaluate(24.0)[19] - 1.0).abs() < 1e-15);
        // interior cubic functions peak at 2/3 at their central knot
        let central = 24.0 * 9.0 / 17.0;
        let v = basis.evaluate(central);
        let peak = v.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn matches_recursive_definition() {
        // independent Cox–de Boor recursion
        fn naive(t: &[f64], i: usize, p: usize, x: f64, last: bool) -> f64 {
            if p == 0 {
                let inside = t[i] <= x && x < t[i + 1];
                let right_end = last && x == t[i + 1] && t[i] < t[i + 1];
                return if inside || right_end { 1.0 } else { 0.0 };
            }
            let mut v = 0.0;
            let d1 = t[i + p] - t[i];
            if d1 > 0.0 {
                v += (x - t[i]) / d1 * naive(t, i, p - 1, x, last);
            }
            let d2 = t[i + p + 1] - t[i + 1];
            if d2 > 0.0 {
                v += (t[i + p + 1] - x) / d2 * naive(t, i + 1, p - 1, x, last);
            }
            v
        }
        let basis = BSplineBasis::cubic(window(), 20).unwrap();
        for k in 0..97 {
            let x = 0.25 * k as f64;
            let fast = basis.evaluate(x);
            let last = x == 24.0;
            for (j, &v) in fast.iter().enumerate() {
                let slow = if last {
                    if j == 19 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    naive(&basis.knots, j, 3, x, false)
                };
                assert!((v - slow).abs() < 1e-12, "x={x} j={j}: {v} vs {slow}");
            }
        }
    }

    #[test]
    fn combine_constant_coefficients() {
        let basis = BSplineBasis::cubic(window(), 20).unwrap();
        let grid = Grid::uniform(0.0, 24.0, 100).unwrap();
        let c = basis.combine(&grid, &[2.8; 20]).unwrap();
        for v in c.values() {
            assert!((v - 2.8).abs() < 1e-12);
        }
        let total: f64 = basis.on_grid(&grid).iter().map(quadrature).sum();
        assert!((total - 24.0).abs() < 1e-10);
    }
}
