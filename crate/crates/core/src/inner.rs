//! Inner problems over the `l_inf` ball `||delta||_inf <= eps`: closed forms
//! for linear and shifted-square objectives, a grid oracle that checks them
//! independently, and the bilinear problem `min (w^T(x+delta)) (w2^T(x+delta))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, p_norm, sign, NormOrder};

/// Default grid resolution per axis. Odd, so the centre and corners are grid points.
pub const DEFAULT_GRID_POINTS: usize = 201;

/// Radius `eps >= 0` of the `l_inf` perturbation ball.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdversaryBudget(f64);

impl AdversaryBudget {
    pub const ZERO: AdversaryBudget = AdversaryBudget(0.0);

    pub fn new(eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("epsilon must be finite and >= 0, got {eps}")));
        }
        Ok(AdversaryBudget(eps))
    }

    pub fn eps(self) -> f64 {
        self.0
    }
}

/// Optimal value and optimizer of an inner problem.
///
/// `attained` is true when `optimum` is the exact optimum and `argpoint`
/// achieves it; grid answers and certified bounds set it to false.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub optimum: f64,
    pub argpoint: Vec<f64>,
    pub attained: bool,
}

/// Optimization direction for [`grid_oracle`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// `max w^T delta = eps ||z||_1` at `delta = eps sign(z)`.
pub fn max_dot_over_box(z: &[f64], eps: AdversaryBudget) -> InnerSolution {
    let e = eps.eps();
    InnerSolution { optimum: e * p_norm(z, NormOrder::ONE), argpoint: z.iter().map(|&zi| e * sign(zi)).collect(), attained: true }
}

/// `min z^T delta = -eps ||z||_1` at `delta = -eps sign(z)`.
pub fn min_dot_over_box(z: &[f64], eps: AdversaryBudget) -> InnerSolution {
    let e = eps.eps();
    InnerSolution {
        optimum: -e * p_norm(z, NormOrder::ONE),
        argpoint: z.iter().map(|&zi| -e * sign(zi)).collect(),
        attained: true,
    }
}

/// `max (w^T delta + a)^2 = (eps ||w||_1 + |a|)^2`, attained at
/// `delta = eps sign(a) sign(w)` with `sign(0) = +1` for `a`.
pub fn max_shifted_square(w: &[f64], a: f64, eps: AdversaryBudget) -> InnerSolution {
    let e = eps.eps();
    let sa = if a < 0.0 { -1.0 } else { 1.0 };
    let argpoint: Vec<f64> = w.iter().map(|&wi| e * sa * sign(wi)).collect();
    let v = e * p_norm(w, NormOrder::ONE) + a.abs();
    InnerSolution { optimum: v * v, argpoint, attained: true }
}

/// `min (w^T delta + a)^2 = a^2 (1 - min(1, eps ||w||_1 / |a|))^2`.
///
/// The minimizer moves every coordinate on the support of `w` against the
/// sign of `a`, by `|a| / ||w||_1` when that suffices to reach zero and by
/// `eps` otherwise. Coordinates with `w_i = 0` stay at 0.
pub fn min_shifted_square(w: &[f64], a: f64, eps: AdversaryBudget) -> InnerSolution {
    let e = eps.eps();
    let l1 = p_norm(w, NormOrder::ONE);
    if a == 0.0 || l1 == 0.0 {
        return InnerSolution { optimum: a * a, argpoint: vec![0.0; w.len()], attained: true };
    }
    let step = (1.0 / l1).min(e / a.abs());
    let argpoint: Vec<f64> = w.iter().map(|&wi| -a * sign(wi) * step).collect();
    let shrink = 1.0 - (e * l1 / a.abs()).min(1.0);
    let optimum = a * a * shrink * shrink;
    InnerSolution { optimum, argpoint, attained: true }
}

/// Coordinate `k` of a grid with `m` points on `[-eps, eps]`. Integer
/// numerator, so the centre is exactly 0 and the ends exactly `+-eps`.
fn grid_coord(k: usize, m: usize, eps: f64) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    let num = 2.0 * k as f64 - (m - 1) as f64;
    eps * num / (m - 1) as f64
}

/// Exhaustive search of `objective` over a uniform grid on `[-eps, eps]^d`.
///
/// Requires `d <= 3` and an odd `points_per_axis >= 3`. Ties go to the
/// lexicographically smallest grid index, so the answer does not depend on
/// how the work is split across threads. NaN values are skipped. The result
/// has `attained = false`: a grid optimum only bounds the true one.
pub fn grid_oracle<F>(objective: F, d: usize, eps: AdversaryBudget, points_per_axis: usize, sense: Sense) -> Result<InnerSolution>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if d == 0 {
        return Err(Error::invalid("grid oracle needs d >= 1"));
    }
    if d > 3 {
        return Err(Error::TooLarge { what: "grid oracle dimension", got: d, max: 3 });
    }
    if points_per_axis < 3 || points_per_axis.is_multiple_of(2) {
        return Err(Error::invalid(format!("points per axis must be odd and >= 3, got {points_per_axis}")));
    }
    let m = points_per_axis;
    let e = eps.eps();
    let inner = m.pow(d as u32 - 1);
    let better = |a: f64, b: f64| match sense {
        Sense::Maximize => a > b,
        Sense::Minimize => a < b,
    };
    let best = (0..m)
        .into_par_iter()
        .map(|first| {
            let mut best: Option<(f64, usize)> = None;
            let mut point = vec![0.0; d];
            for rest in 0..inner {
                let flat = first * inner + rest;
                let mut r = flat;
                for j in (0..d).rev() {
                    point[j] = grid_coord(r % m, m, e);
                    r /= m;
                }
                let v = objective(&point);
                if v.is_nan() {
                    continue;
                }
                if best.is_none_or(|(bv, _)| better(v, bv)) {
                    best = Some((v, flat));
                }
            }
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (Some(x), Some(y)) => {
                    if better(y.0, x.0) || (y.0 == x.0 && y.1 < x.1) {
                        Some(y)
                    } else if better(x.0, y.0) || x.1 <= y.1 {
                        Some(x)
                    } else {
                        Some(y)
                    }
                }
                (x, None) => x,
                (None, y) => y,
            },
        );
    let (optimum, flat) = best.ok_or_else(|| Error::NonFinite("grid objective is NaN everywhere".into()))?;
    let mut argpoint = vec![0.0; d];
    let mut r = flat;
    for j in (0..d).rev() {
        argpoint[j] = grid_coord(r % m, m, e);
        r /= m;
    }
    Ok(InnerSolution { optimum, argpoint, attained: false })
}

/// How [`min_bilinear_over_box`] solves the problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BilinearMode {
    /// Grid search with the given odd number of points per axis; `d <= 3`.
    ExactSmall { points_per_axis: usize },
    /// Certified lower bound from the min-dot and quadratic lemmas.
    LowerBound,
    /// Exact minimum by enumerating the `3^d` faces of the box and the
    /// stationary point of the quadratic on each; `d <= 3`.
    FaceEnumeration,
}

/// `min over ||delta||_inf <= eps of (w^T(x+delta)) (w2^T(x+delta))`.
///
/// In `LowerBound` mode `optimum` is
/// `w^T x w2^T x - eps ||(w w2^T + w2 w^T) x||_1 - eps^2 ||w||_1 ||w2||_1`,
/// which never exceeds the true minimum; `argpoint` is then the minimizer of
/// the linear part only and `attained` is false.
pub fn min_bilinear_over_box(
    w: &[f64],
    w2: &[f64],
    x: &[f64],
    eps: AdversaryBudget,
    mode: BilinearMode,
) -> Result<InnerSolution> {
    let d = x.len();
    if w.len() != d || w2.len() != d {
        return Err(Error::invalid("w, w2 and x must have the same length"));
    }
    let a = dot(w, x);
    let b = dot(w2, x);
    match mode {
        BilinearMode::ExactSmall { points_per_axis } => {
            if d > 3 {
                return Err(Error::TooLarge { what: "exact bilinear dimension", got: d, max: 3 });
            }
            grid_oracle(|delta| (a + dot(w, delta)) * (b + dot(w2, delta)), d, eps, points_per_axis, Sense::Minimize)
        }
        BilinearMode::LowerBound => {
            let e = eps.eps();
            let lin: Vec<f64> = w.iter().zip(w2).map(|(&wi, &vi)| wi * b + vi * a).collect();
            let lower = a * b - e * p_norm(&lin, NormOrder::ONE) - e * e * p_norm(w, NormOrder::ONE) * p_norm(w2, NormOrder::ONE);
            Ok(InnerSolution { optimum: lower, argpoint: min_dot_over_box(&lin, eps).argpoint, attained: false })
        }
        BilinearMode::FaceEnumeration => {
            if d > 3 {
                return Err(Error::TooLarge { what: "face enumeration dimension", got: d, max: 3 });
            }
            Ok(bilinear_faces(w, w2, a, b, eps.eps()))
        }
    }
}

/// Face enumeration for `f(delta) = (a + w^T delta)(b + w2^T delta)`.
///
/// `f` is quadratic with gradient `c + H delta`, `c = a w2 + b w` and
/// `H = w w2^T + w2 w^T`. Its minimum over the box is attained at a point
/// that is stationary on the relative interior of some face. Each face fixes
/// a subset of coordinates at `+-eps` and frees the rest; the free part
/// solves `H_FF delta_F = -(c_F + H_FX delta_X)`. Singular systems are
/// skipped: a minimum on such a face is also attained on its boundary,
/// which is another face.
fn bilinear_faces(w: &[f64], w2: &[f64], a: f64, b: f64, eps: f64) -> InnerSolution {
    let d = w.len();
    let f = |delta: &[f64]| (a + dot(w, delta)) * (b + dot(w2, delta));
    if eps == 0.0 {
        let z = vec![0.0; d];
        return InnerSolution { optimum: f(&z), argpoint: z, attained: true };
    }
    let c: Vec<f64> = (0..d).map(|i| a * w2[i] + b * w[i]).collect();
    let h = |i: usize, j: usize| w[i] * w2[j] + w2[i] * w[j];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let faces = 3usize.pow(d as u32);
    let mut delta = vec![0.0; d];
    for code in 0..faces {
        // state per coordinate: 0 -> -eps, 1 -> +eps, 2 -> free
        let mut state = [0u8; 3];
        let mut r = code;
        for s in state.iter_mut().take(d) {
            *s = (r % 3) as u8;
            r /= 3;
        }
        let free: Vec<usize> = (0..d).filter(|&i| state[i] == 2).collect();
        for i in 0..d {
            delta[i] = match state[i] {
                0 => -eps,
                1 => eps,
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            let k = free.len();
            let mut sys = vec![0.0; k * (k + 1)];
            for (r_, &i) in free.iter().enumerate() {
                for (c_, &j) in free.iter().enumerate() {
                    sys[r_ * (k + 1) + c_] = h(i, j);
                }
                let mut rhs = -c[i];
                for j in 0..d {
                    if state[j] != 2 {
                        rhs -= h(i, j) * delta[j];
                    }
                }
                sys[r_ * (k + 1) + k] = rhs;
            }
            let Some(sol) = solve_small(&mut sys, k) else { continue };
            if sol.iter().any(|v| !(v.abs() <= eps)) {
                continue;
            }
            for (t, &i) in free.iter().enumerate() {
                delta[i] = sol[t];
            }
        }
        let v = f(&delta);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, delta.clone()));
        }
    }
    // The all-fixed faces are the box corners, which are always candidates.
    let (optimum, argpoint) = best.expect("box corners are always candidates");
    InnerSolution { optimum, argpoint, attained: true }
}

/// Gaussian elimination with partial pivoting on an augmented `k x (k+1)`
/// system. Returns None when a pivot is negligible relative to the matrix.
fn solve_small(sys: &mut [f64], k: usize) -> Option<Vec<f64>> {
    let w = k + 1;
    let scale = sys.chunks(w).flat_map(|row| row[..k].iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| sys[i * w + col].abs().total_cmp(&sys[j * w + col].abs()))?;
        if sys[piv * w + col].abs() <= 1e-12 * scale {
            return None;
        }
        if piv != col {
            for t in 0..w {
                sys.swap(piv * w + t, col * w + t);
            }
        }
        for row in col + 1..k {
            let factor = sys[row * w + col] / sys[col * w + col];
            for t in col..w {
                sys[row * w + t] -= factor * sys[col * w + t];
            }
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut acc = sys[row * w + k];
        for t in row + 1..k {
            acc -= sys[row * w + t] * x[t];
        }
        x[row] = acc / sys[row * w + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(e: f64) -> AdversaryBudget {
        AdversaryBudget::new(e).unwrap()
    }

    #[test]
    fn dot_examples() {
        let s = max_dot_over_box(&[1.0, -2.0], budget(0.5));
        assert_eq!(s.optimum, 1.5);
        assert_eq!(s.argpoint, vec![0.5, -0.5]);
        assert_eq!(max_dot_over_box(&[0.0, 0.0], budget(3.0)).optimum, 0.0);
        let s = max_dot_over_box(&[3.0], budget(0.0));
        assert_eq!((s.optimum, s.argpoint), (0.0, vec![0.0]));
        assert_eq!(min_dot_over_box(&[1.0, -2.0], budget(0.5)).optimum, -1.5);
        assert_eq!(min_dot_over_box(&[1.0, 1.0, 1.0], budget(1.0)).optimum, -3.0);
    }

    #[test]
    fn shifted_square_examples() {
        let s = max_shifted_square(&[1.0, 2.0], 5.0, budget(1.0));
        assert_eq!(s.optimum, 64.0);
        assert_eq!(s.argpoint, vec![1.0, 1.0]);
        assert_eq!(max_shifted_square(&[1.0, 2.0], 5.0, budget(0.0)).optimum, 25.0);
        assert_eq!(max_shifted_square(&[0.0, 0.0], -3.0, budget(1.0)).optimum, 9.0);
        // a = 0 tie-break: sign(a) = +1
        assert_eq!(max_shifted_square(&[1.0, -1.0], 0.0, budget(0.5)).argpoint, vec![0.5, -0.5]);

        let s = min_shifted_square(&[1.0, 2.0], 5.0, budget(1.0));
        assert!((s.optimum - 4.0).abs() < 1e-12);
        assert_eq!(s.argpoint, vec![-1.0, -1.0]);
        assert_eq!(min_shifted_square(&[1.0, 2.0], 2.0, budget(1.0)).optimum, 0.0);
        assert_eq!(min_shifted_square(&[1.0, 2.0], 5.0, budget(0.0)).optimum, 25.0);
        let z = min_shifted_square(&[1.0, 0.0], 0.0, budget(1.0));
        assert_eq!((z.optimum, z.argpoint), (0.0, vec![0.0, 0.0]));
    }

    #[test]
    fn grid_examples() {
        let s = grid_oracle(|d| (d[0] + 5.0).powi(2), 1, budget(1.0), 201, Sense::Maximize).unwrap();
        assert_eq!((s.optimum, s.argpoint[0]), (36.0, 1.0));
        let s = grid_oracle(|d| (d[0] + 5.0).powi(2), 1, budget(1.0), 201, Sense::Minimize).unwrap();
        assert_eq!((s.optimum, s.argpoint[0]), (16.0, -1.0));
        assert!(!s.attained);
        let s = grid_oracle(|_| 7.0, 2, budget(1.0), 5, Sense::Maximize).unwrap();
        assert_eq!(s.optimum, 7.0);
        // constant objective: lexicographically first grid point
        assert_eq!(s.argpoint, vec![-1.0, -1.0]);
    }

    #[test]
    fn grid_guards() {
        assert!(matches!(grid_oracle(|_| 0.0, 4, budget(1.0), 3, Sense::Maximize), Err(Error::TooLarge { .. })));
        assert!(grid_oracle(|_| 0.0, 2, budget(1.0), 4, Sense::Maximize).is_err());
        assert!(grid_oracle(|_| 0.0, 2, budget(1.0), 1, Sense::Maximize).is_err());
    }

    #[test]
    fn grid_contains_centre_and_corners() {
        for m in [3, 5, 201] {
            assert_eq!(grid_coord((m - 1) / 2, m, 0.3), 0.0);
            assert_eq!(grid_coord(0, m, 0.3), -0.3);
            assert_eq!(grid_coord(m - 1, m, 0.3), 0.3);
        }
    }

    #[test]
    fn bilinear_collapses_to_squares() {
        let w = [0.7, -1.2];
        let x = [0.4, 0.9];
        let e = budget(0.3);
        let a = dot(&w, &x);
        let same = min_bilinear_over_box(&w, &w, &x, e, BilinearMode::FaceEnumeration).unwrap();
        assert!((same.optimum - min_shifted_square(&w, a, e).optimum).abs() < 1e-12);
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        let opp = min_bilinear_over_box(&w, &neg, &x, e, BilinearMode::FaceEnumeration).unwrap();
        assert!((opp.optimum + max_shifted_square(&w, a, e).optimum).abs() < 1e-12);
        let grid = min_bilinear_over_box(&w, &w, &x, e, BilinearMode::ExactSmall { points_per_axis: 201 }).unwrap();
        assert!(grid.optimum >= same.optimum - 1e-12);
        assert!(grid.optimum - same.optimum < 1e-3);
    }

    #[test]
    fn bilinear_lower_bound_below_exact() {
        let w = [0.3, -0.8];
        let w2 = [1.1, 0.2];
        let x = [-0.5, 0.6];
        let e = budget(0.3);
        let lb = min_bilinear_over_box(&w, &w2, &x, e, BilinearMode::LowerBound).unwrap();
        let exact = min_bilinear_over_box(&w, &w2, &x, e, BilinearMode::FaceEnumeration).unwrap();
        let grid = min_bilinear_over_box(&w, &w2, &x, e, BilinearMode::ExactSmall { points_per_axis: 201 }).unwrap();
        assert!(lb.optimum <= exact.optimum + 1e-12);
        assert!(exact.optimum <= grid.optimum + 1e-12);
        assert!(lb.optimum <= grid.optimum + 1e-9);
    }

    #[test]
    fn negative_budget_rejected() {
        assert!(AdversaryBudget::new(-0.1).is_err());
        assert!(AdversaryBudget::new(f64::NAN).is_err());
    }
}
