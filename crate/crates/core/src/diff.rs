//! Central finite differences along sampled curves.
//!
//! On a uniform grid the five-point stencils (fourth order) are used wherever
//! two neighbours exist on each side, falling back to three-point stencils one
//! sample in from the ends. Non-uniform grids use the three-point
//! Lagrange formulas. Endpoint samples get no estimate.

use std::ops::{Add, Mul, Sub};

/// Relative spacing tolerance for treating a grid as uniform.
const UNIFORM_REL: f64 = 1e-9;

pub fn is_uniform(grid: &[f64]) -> bool {
    if grid.len() < 3 {
        return true;
    }
    let h = grid[1] - grid[0];
    grid.windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= UNIFORM_REL * h.abs().max(f64::MIN_POSITIVE))
}

/// First derivative at every interior index `1..n-1`; `None` at the two ends.
pub fn first_derivative<T>(grid: &[f64], values: &[T]) -> Vec<Option<T>>
where
    T: Clone + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = grid.len();
    assert_eq!(n, values.len());
    let mut out = vec![None; n];
    if n < 3 {
        return out;
    }
    let uniform = is_uniform(grid);
    for k in 1..n - 1 {
        let d = if uniform && k >= 2 && k + 2 < n {
            let h = (grid[k + 2] - grid[k - 2]) / 4.0;
            // (-f2 + 8 f1 - 8 f-1 + f-2) / 12h
            let t = (values[k + 1].clone() - values[k - 1].clone()) * 8.0
                - (values[k + 2].clone() - values[k - 2].clone());
            t * (1.0 / (12.0 * h))
        } else {
            let h0 = grid[k] - grid[k - 1];
            let h1 = grid[k + 1] - grid[k];
            let a = -h1 / (h0 * (h0 + h1));
            let b = (h1 - h0) / (h0 * h1);
            let c = h0 / (h1 * (h0 + h1));
            values[k - 1].clone() * a + values[k].clone() * b + values[k + 1].clone() * c
        };
        out[k] = Some(d);
    }
    out
}

/// Second derivative at every interior index; `None` at the two ends.
pub fn second_derivative<T>(grid: &[f64], values: &[T]) -> Vec<Option<T>>
where
    T: Clone + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = grid.len();
    assert_eq!(n, values.len());
    let mut out = vec![None; n];
    if n < 3 {
        return out;
    }
    let uniform = is_uniform(grid);
    for k in 1..n - 1 {
        let d = if uniform && k >= 2 && k + 2 < n {
            let h = (grid[k + 2] - grid[k - 2]) / 4.0;
            // (-f2 + 16 f1 - 30 f0 + 16 f-1 - f-2) / 12h^2
            let t = (values[k + 1].clone() + values[k - 1].clone()) * 16.0
                - (values[k + 2].clone() + values[k - 2].clone())
                - values[k].clone() * 30.0;
            t * (1.0 / (12.0 * h * h))
        } else {
            let h0 = grid[k] - grid[k - 1];
            let h1 = grid[k + 1] - grid[k];
            let a = 2.0 / (h0 * (h0 + h1));
            let b = -2.0 / (h0 * h1);
            let c = 2.0 / (h1 * (h0 + h1));
            values[k - 1].clone() * a + values[k].clone() * b + values[k + 1].clone() * c
        };
        out[k] = Some(d);
    }
    out
}

/// Component-wise [`first_derivative`] of a sampled vector-valued curve.
pub fn first_derivative_vec<T>(grid: &[f64], values: &[Vec<T>]) -> Vec<Option<Vec<T>>>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = grid.len();
    let width = values.first().map_or(0, |v| v.len());
    let mut out: Vec<Option<Vec<T>>> = vec![None; n];
    for c in 0..width {
        let comp: Vec<T> = values.iter().map(|v| v[c]).collect();
        for (k, d) in first_derivative(grid, &comp).into_iter().enumerate() {
            if let Some(d) = d {
                out[k]
                    .get_or_insert_with(|| Vec::with_capacity(width))
                    .push(d);
            }
        }
    }
    out
}

/// First derivative everywhere, using second-order one-sided stencils at the ends.
pub fn first_derivative_full(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut out: Vec<f64> = first_derivative(grid, values)
        .into_iter()
        .map(|v| v.unwrap_or(0.0))
        .collect();
    if n >= 3 {
        let (h0, h1) = (grid[1] - grid[0], grid[2] - grid[1]);
        out[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * values[0]
            + (h0 + h1) / (h0 * h1) * values[1]
            - h0 / (h1 * (h0 + h1)) * values[2];
        let (g0, g1) = (grid[n - 2] - grid[n - 3], grid[n - 1] - grid[n - 2]);
        out[n - 1] = g1 / (g0 * (g0 + g1)) * values[n - 3] - (g0 + g1) / (g0 * g1) * values[n - 2]
            + (2.0 * g1 + g0) / (g1 * (g0 + g1)) * values[n - 1];
    } else if n == 2 {
        let d = (values[1] - values[0]) / (grid[1] - grid[0]);
        out = vec![d, d];
    }
    out
}

/// Cumulative trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for k in 0..grid.len() {
        if k > 0 {
            acc += 0.5 * (values[k] + values[k - 1]) * (grid[k] - grid[k - 1]);
        }
        out.push(acc);
    }
    out
}

/// Composite Simpson integral on a uniform grid with an odd number of nodes;
/// falls back to the trapezoid rule otherwise.
pub fn integrate(grid: &[f64], values: &[f64]) -> f64 {
    let n = grid.len();
    if n < 2 {
        return 0.0;
    }
    if n >= 3 && n % 2 == 1 && is_uniform(grid) {
        let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
        let mut s = values[0] + values[n - 1];
        for (k, v) in values.iter().enumerate().take(n - 1).skip(1) {
            s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        return s * h / 3.0;
    }
    *cumulative_trapezoid(grid, values).last().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn five_point_stencils_are_fourth_order() {
        let err = |h: f64| {
            let grid: Vec<f64> = (0..21).map(|k| 1.0 + (k as f64 - 10.0) * h).collect();
            let vals: Vec<f64> = grid.iter().map(|x| x.sin()).collect();
            let d1 = first_derivative(&grid, &vals);
            let d2 = second_derivative(&grid, &vals);
            let k = 10;
            (
                (d1[k].unwrap() - grid[k].cos()).abs(),
                (d2[k].unwrap() + grid[k].sin()).abs(),
            )
        };
        let (a1, a2) = err(0.1);
        let (b1, b2) = err(0.05);
        assert!(((a1 / b1).log2() - 4.0).abs() < 0.3);
        assert!(((a2 / b2).log2() - 4.0).abs() < 0.3);
    }

    #[test]
    fn nonuniform_three_point_is_exact_on_quadratics() {
        let grid = [0.0, 0.1, 0.35, 0.4, 0.9];
        let vals: Vec<f64> = grid.iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        for (k, d) in first_derivative(&grid, &vals).iter().enumerate() {
            if let Some(d) = d {
                assert!((d - (6.0 * grid[k] - 1.0)).abs() < 1e-12);
            }
        }
        for d in second_derivative(&grid, &vals).iter().flatten() {
            assert!((d - 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn complex_values_differentiate_componentwise() {
        let grid: Vec<f64> = (0..11).map(|k| k as f64 * 0.01).collect();
        let vals: Vec<Complex64> = grid.iter().map(|&x| Complex64::new(0.0, x).exp()).collect();
        let d = first_derivative(&grid, &vals);
        let e = (d[5].unwrap() - Complex64::new(0.0, 1.0) * vals[5]).norm();
        assert!(e < 1e-9);
    }

    #[test]
    fn simpson_and_trapezoid() {
        let grid: Vec<f64> = (0..101).map(|k| k as f64 * 0.01).collect();
        let vals: Vec<f64> = grid.iter().map(|x| x * x).collect();
        assert!((integrate(&grid, &vals) - 1.0 / 3.0).abs() < 1e-12);
        let cum = cumulative_trapezoid(&grid, &vals);
        assert!((cum[100] - 1.0 / 3.0).abs() < 1e-4);
        let fd = first_derivative_full(&grid, &vals);
        assert!((fd[0] - 0.0).abs() < 1e-12 && (fd[100] - 2.0).abs() < 1e-12);
    }
}
