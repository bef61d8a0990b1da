//! Small-instance estimators that take the supremum over hypotheses on a
//! direction grid followed by local refinement: adversarial regression and
//! classification complexities, a witness lower bound for the ReLU class, and
//! the 0-1 loss comparison for sign classifiers.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_exact_n, enumerate_mean, pattern_sign, EstimateMethod, HypothesisClass, HypothesisKind, RademacherEstimate};
use crate::error::{Error, Result};
use crate::inner::{min_bilinear_over_box, AdversaryBudget, BilinearMode};
use crate::linalg::{dot, p_norm, DesignMatrix, NormOrder};

/// Relative accuracy tag attached to grid-based regression estimates.
pub const REGRESSION_GRID_TOLERANCE: f64 = 1e-3;
/// Directions per hypothesis in the classification estimator (`d = 2`).
pub const DEFAULT_CLASSIFICATION_DIRECTIONS: usize = 120;
/// Directions per hypothesis in the 0-1 comparison (`d = 2`).
pub const DEFAULT_ZERO_ONE_DIRECTIONS: usize = 360;
/// Random network pairs in the ReLU witness.
pub const DEFAULT_RELU_PAIRS: usize = 4000;

/// Unit directions in the `p`-norm. For `d = 2`, `count` angles spread over
/// `[0, pi)` (`half`) or `[0, 2 pi)`; for `d = 3`, a Fibonacci lattice of
/// `count` points; for `d = 1`, `+1` (and `-1` unless `half`).
pub(crate) fn directions(d: usize, p: NormOrder, count: usize, half: bool) -> Vec<Vec<f64>> {
    let raw: Vec<Vec<f64>> = match d {
        1 => {
            if half {
                vec![vec![1.0]]
            } else {
                vec![vec![1.0], vec![-1.0]]
            }
        }
        2 => {
            let span = if half { PI } else { 2.0 * PI };
            (0..count)
                .map(|k| {
                    let t = span * k as f64 / count as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        }
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
    };
    raw.into_iter()
        .map(|u| {
            let s = p_norm(&u, p);
            u.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Typical spacing between neighbouring grid directions.
pub(crate) fn grid_spacing(d: usize, count: usize) -> f64 {
    match d {
        1 => 0.5,
        2 => PI / count as f64,
        _ => (4.0 * PI / count as f64).sqrt(),
    }
}

/// Compass search maximizing `f` from `start`, halving the step on failure.
pub(crate) fn refine<F: Fn(&[f64]) -> f64>(f: F, start: Vec<f64>, mut h: f64) -> (f64, Vec<f64>) {
    let mut u = start;
    let mut fu = f(&u);
    let mut iters = 0;
    while h > 1e-9 && iters < 2000 {
        iters += 1;
        let mut improved = false;
        for j in 0..u.len() {
            for s in [1.0, -1.0] {
                let mut cand = u.clone();
                cand[j] += s * h;
                let v = f(&cand);
                if v > fu {
                    u = cand;
                    fu = v;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (fu, u)
}

pub(crate) fn normalized(u: &[f64], p: NormOrder) -> Option<Vec<f64>> {
    let s = p_norm(u, p);
    (s > 0.0 && s.is_finite()).then(|| u.iter().map(|v| v / s).collect())
}

fn check_small(x: &DesignMatrix, max_d: usize) -> Result<()> {
    if x.d() > max_d {
        return Err(Error::TooLarge { what: "dimension", got: x.d(), max: max_d });
    }
    check_exact_n(x.n())
}

/// Adversarial squared-loss complexity for small instances,
/// `E sup over ||v||_p <= 2W of (1/n) sum sigma_i (eps ||v||_1 + |v^T x_i|)^2`.
///
/// The inner adversary is in closed form. The objective is homogeneous of
/// degree two in `v`, so each pattern's supremum is `max(0, 4W^2 g*)` with
/// `g*` the maximum over unit directions, found on a grid of `sphere_grid`
/// directions (default 720 for `d = 2`, 2000 for `d = 3`) and refined by
/// compass search. Requires `d <= 3` and `n <= 12`.
pub fn adv_complexity_regression_exact_small(
    x: &DesignMatrix,
    h: &HypothesisClass,
    eps: AdversaryBudget,
    sphere_grid: Option<usize>,
) -> Result<RademacherEstimate> {
    h.require(HypothesisKind::LinearRegression)?;
    check_small(x, 3)?;
    let (n, d) = (x.n(), x.d());
    let count = sphere_grid.unwrap_or(if d == 3 { 2000 } else { 720 });
    if count < 4 {
        return Err(Error::invalid(format!("sphere grid needs at least 4 directions, got {count}")));
    }
    let e = eps.eps();
    let p = h.p;
    let dirs = directions(d, p, count, true);
    let per_point = |u: &[f64]| -> Vec<f64> {
        let l1 = p_norm(u, NormOrder::ONE);
        x.rows().map(|r| (e * l1 + dot(u, r).abs()).powi(2)).collect()
    };
    let table: Vec<Vec<f64>> = dirs.iter().map(|u| per_point(u)).collect();
    let h0 = grid_spacing(d, count);
    let scale = 4.0 * h.w * h.w;
    let value = enumerate_mean(n, |mask| {
        let g = |vals: &[f64]| vals.iter().enumerate().map(|(i, v)| pattern_sign(mask, i) * v).sum::<f64>() / n as f64;
        let (k, best) = table
            .iter()
            .map(|t| g(t))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        let objective = |u: &[f64]| normalized(u, p).map_or(f64::NEG_INFINITY, |u| g(&per_point(&u)));
        let (refined, _) = refine(objective, dirs[k].clone(), h0);
        Ok(scale * best.max(refined).max(0.0))
    })?;
    Ok(RademacherEstimate {
        value,
        stderr: 0.0,
        method: EstimateMethod::ExactEnumeration,
        samples: 1u64 << n,
        grid_tolerance: Some(REGRESSION_GRID_TOLERANCE),
    })
}

/// Adversarial complexity of the product class,
/// `E sup over w, w' of (1/n) sum sigma_i min_delta (w^T(x_i+delta))(w'^T(x_i+delta))`,
/// for `d <= 2` and `n <= 12`.
///
/// The inner minimum is exact (face enumeration). The objective is
/// positively homogeneous of degree one in each of `w`, `w'`, so the
/// supremum is `W^2 max(0, max over unit pairs)`, searched on a grid of
/// `directions` angles per hypothesis and refined by compass search.
pub fn adv_complexity_classification_exact_small(
    x: &DesignMatrix,
    h: &HypothesisClass,
    eps: AdversaryBudget,
    directions_per_hypothesis: Option<usize>,
) -> Result<RademacherEstimate> {
    h.require(HypothesisKind::LinearClassification)?;
    check_small(x, 2)?;
    let (n, d) = (x.n(), x.d());
    let count = directions_per_hypothesis.unwrap_or(DEFAULT_CLASSIFICATION_DIRECTIONS);
    if count < 4 {
        return Err(Error::invalid(format!("need at least 4 directions, got {count}")));
    }
    let p = h.p;
    let dirs = directions(d, p, count, false);
    let inner = |u: &[f64], v: &[f64]| -> Vec<f64> {
        x.rows()
            .map(|r| min_bilinear_over_box(u, v, r, eps, BilinearMode::FaceEnumeration).expect("dimensions checked").optimum)
            .collect()
    };
    let pairs: Vec<(usize, usize)> = (0..dirs.len()).flat_map(|a| (0..dirs.len()).map(move |b| (a, b))).collect();
    let table: Vec<Vec<f64>> = pairs.par_iter().map(|&(a, b)| inner(&dirs[a], &dirs[b])).collect();
    let h0 = grid_spacing(d, count);
    let value = enumerate_mean(n, |mask| {
        let g = |vals: &[f64]| vals.iter().enumerate().map(|(i, v)| pattern_sign(mask, i) * v).sum::<f64>() / n as f64;
        let (k, best) = table
            .iter()
            .map(|t| g(t))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        let (a, b) = pairs[k];
        let start: Vec<f64> = dirs[a].iter().chain(&dirs[b]).copied().collect();
        let objective = |z: &[f64]| match (normalized(&z[..d], p), normalized(&z[d..], p)) {
            (Some(u), Some(v)) => g(&inner(&u, &v)),
            _ => f64::NEG_INFINITY,
        };
        let (refined, _) = refine(objective, start, h0);
        Ok(h.w * h.w * best.max(refined).max(0.0))
    })?;
    Ok(RademacherEstimate {
        value,
        stderr: 0.0,
        method: EstimateMethod::ExactEnumeration,
        samples: 1u64 << n,
        grid_tolerance: Some(REGRESSION_GRID_TOLERANCE),
    })
}

/// Lower estimate of the standard complexity of the two-layer ReLU product
/// class: exact expectation over sign patterns, supremum over `pairs` random
/// network pairs drawn on the boundary of the weight constraints. A valid
/// witness because every sampled pair is feasible and the zero network
/// makes the supremum nonnegative.
pub fn relu_complexity_witness(x: &DesignMatrix, h: &HypothesisClass, pairs: usize, seed: u64) -> Result<RademacherEstimate> {
    h.require(HypothesisKind::TwoLayerRelu)?;
    check_exact_n(x.n())?;
    if pairs == 0 {
        return Err(Error::invalid("need at least one network pair"));
    }
    let (n, d, m) = (x.n(), x.d(), h.m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut network = || {
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let r: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                normalized(&r, h.p).unwrap_or_else(|| vec![0.0; d]).into_iter().map(|v| v * h.w).collect()
            })
            .collect();
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a: Vec<f64> = normalized(&a, NormOrder::ONE).unwrap_or_else(|| vec![0.0; m]).into_iter().map(|v| v * h.a).collect();
        (a, rows)
    };
    let eval = |(a, rows): &(Vec<f64>, Vec<Vec<f64>>), z: &[f64]| -> f64 {
        a.iter().zip(rows).map(|(ar, wr)| ar * dot(wr, z).max(0.0)).sum()
    };
    let table: Vec<Vec<f64>> = (0..pairs)
        .map(|_| {
            let f = network();
            let g = network();
            x.rows().map(|r| eval(&f, r) * eval(&g, r)).collect()
        })
        .collect();
    let value = enumerate_mean(n, |mask| {
        let best = table
            .iter()
            .map(|t| t.iter().enumerate().map(|(i, v)| pattern_sign(mask, i) * v).sum::<f64>() / n as f64)
            .fold(0.0_f64, f64::max);
        Ok(best)
    })?;
    Ok(RademacherEstimate { value, stderr: 0.0, method: EstimateMethod::WitnessLower, samples: 1u64 << n, grid_tolerance: None })
}

/// Outcome of [`zero_one_adv_vs_std_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroOneComparison {
    pub std: f64,
    pub adv: f64,
    pub slack: f64,
    /// `adv >= std - slack`.
    pub holds: bool,
    /// Whether some grid hypothesis has `|w^T x_i| - eps ||w||_1 >= 1` on
    /// every point, the margin condition under which the ordering is claimed.
    pub margin_assumption: bool,
    pub std_patterns: usize,
    pub adv_patterns: usize,
}

/// `sign` with `sign(0) = +1`, the classification convention.
fn label_of(v: f64) -> bool {
    v >= 0.0
}

/// Whether some `z` in the box around `x` has `w^T z >= 0` and `v^T z < 0`.
///
/// The minimum of `v^T z` over the polytope `box ∩ {w^T z >= 0}` is attained
/// at a vertex: a box corner with `w^T z >= 0` or the crossing of the
/// hyperplane `w^T z = 0` with a box edge.
fn split_feasible(w: &[f64], v: &[f64], x: &[f64], eps: f64) -> bool {
    let d = x.len();
    let corner = |mask: usize| -> Vec<f64> { (0..d).map(|j| x[j] + if mask >> j & 1 == 1 { eps } else { -eps }).collect() };
    let mut best = f64::INFINITY;
    for mask in 0..1usize << d {
        let c = corner(mask);
        let wc = dot(w, &c);
        if wc >= 0.0 {
            best = best.min(dot(v, &c));
        }
        for j in 0..d {
            if mask >> j & 1 == 1 {
                continue;
            }
            let c2 = corner(mask | 1 << j);
            let wc2 = dot(w, &c2);
            if (wc < 0.0) != (wc2 < 0.0) {
                let t = wc / (wc - wc2);
                let z: Vec<f64> = c.iter().zip(&c2).map(|(a, b)| a + t * (b - a)).collect();
                best = best.min(dot(v, &z));
            }
        }
    }
    best < 0.0
}

pub(crate) fn adversarial_disagree(w: &[f64], v: &[f64], x: &[f64], eps: f64) -> bool {
    if eps == 0.0 {
        return label_of(dot(w, x)) != label_of(dot(v, x));
    }
    split_feasible(w, v, x, eps) || split_feasible(v, w, x, eps)
}

fn mean_max_over_masks(n: usize, masks: &BTreeSet<u32>) -> Result<f64> {
    let masks: Vec<u32> = masks.iter().copied().collect();
    enumerate_mean(n, |sigma| {
        let best = masks
            .iter()
            .map(|&m| (0..n).filter(|&i| m >> i & 1 == 1).map(|i| pattern_sign(sigma, i)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(best / n as f64)
    })
}

/// Standard and adversarial 0-1 disagreement complexities of sign
/// classifiers, `E max over pairs (1/n) sum sigma_i loss_i`, for `d <= 2`
/// and `n <= 10`.
///
/// Sign classifiers are scale free, so hypotheses are the zero vector plus
/// `w_grid` unit directions (`+-1` when `d = 1`). The adversarial
/// disagreement on a point is decided exactly: the perturbed predictions can
/// differ iff one of two polytopes inside the box is nonempty. Distinct loss
/// vectors are collected as bit masks before the expectation.
pub fn zero_one_adv_vs_std_check(
    x: &DesignMatrix,
    h: &HypothesisClass,
    eps: AdversaryBudget,
    w_grid: usize,
) -> Result<ZeroOneComparison> {
    h.require(HypothesisKind::LinearClassification)?;
    if x.d() > 2 {
        return Err(Error::TooLarge { what: "dimension", got: x.d(), max: 2 });
    }
    if x.n() > 10 {
        return Err(Error::TooLarge { what: "sample count", got: x.n(), max: 10 });
    }
    if w_grid < 4 {
        return Err(Error::invalid(format!("need at least 4 directions, got {w_grid}")));
    }
    let (n, d) = (x.n(), x.d());
    let e = eps.eps();
    let mut hyps = directions(d, h.p, w_grid, false);
    hyps.push(vec![0.0; d]);

    let per_pair: Vec<(u32, u32)> = (0..hyps.len())
        .into_par_iter()
        .flat_map_iter(|a| {
            let hyps = &hyps;
            (0..hyps.len()).map(move |b| {
                let (u, v) = (&hyps[a], &hyps[b]);
                let mut s = 0u32;
                let mut t = 0u32;
                for (i, r) in x.rows().enumerate() {
                    if label_of(dot(u, r)) != label_of(dot(v, r)) {
                        s |= 1 << i;
                    }
                    if adversarial_disagree(u, v, r, e) {
                        t |= 1 << i;
                    }
                }
                (s, t)
            })
        })
        .collect();
    let std_masks: BTreeSet<u32> = per_pair.iter().map(|p| p.0).collect();
    let adv_masks: BTreeSet<u32> = per_pair.iter().map(|p| p.1).collect();
    let std = mean_max_over_masks(n, &std_masks)?;
    let adv = mean_max_over_masks(n, &adv_masks)?;
    let slack = 1e-3 * (1.0 + std);
    let margin_assumption = hyps.iter().any(|u| {
        let l1 = p_norm(u, NormOrder::ONE);
        let s = p_norm(u, h.p);
        s > 0.0 && x.rows().all(|r| h.w * (dot(u, r).abs() - e * l1) / s >= 1.0)
    });
    Ok(ZeroOneComparison {
        std,
        adv,
        slack,
        holds: adv >= std - slack,
        margin_assumption,
        std_patterns: std_masks.len(),
        adv_patterns: adv_masks.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::std_complexity_regression;
    use super::super::{std_complexity_classification, Sampling};
    use super::*;

    fn dm(rows: &[&[f64]]) -> DesignMatrix {
        DesignMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), None).unwrap()
    }

    fn eps(e: f64) -> AdversaryBudget {
        AdversaryBudget::new(e).unwrap()
    }

    #[test]
    fn regression_single_sample() {
        let h = HypothesisClass::linear_regression(NormOrder::TWO, 0.5).unwrap();
        let v = adv_complexity_regression_exact_small(&dm(&[&[1.0]]), &h, eps(0.2), None).unwrap();
        assert!((v.value - 0.72).abs() < 1e-12, "{}", v.value);
    }

    #[test]
    fn regression_reduces_to_standard_without_adversary() {
        let x = dm(&[&[0.3, -1.2], &[1.0, 0.1], &[-0.7, 0.8], &[0.05, 0.6]]);
        let h = HypothesisClass::linear_regression(NormOrder::TWO, 1.0).unwrap();
        let adv = adv_complexity_regression_exact_small(&x, &h, eps(0.0), None).unwrap().value;
        let std = std_complexity_regression(&x, &h, Sampling::Exact).unwrap().upper().value;
        assert!((adv - std).abs() <= 1e-6 * (1.0 + std), "{adv} vs {std}");
        let x3 = dm(&[&[0.3, -1.2, 0.4], &[1.0, 0.1, -0.2], &[-0.7, 0.8, 0.9]]);
        let adv = adv_complexity_regression_exact_small(&x3, &h, eps(0.0), None).unwrap().value;
        let std = std_complexity_regression(&x3, &h, Sampling::Exact).unwrap().upper().value;
        assert!((adv - std).abs() <= 1e-6 * (1.0 + std), "{adv} vs {std}");
    }

    #[test]
    fn classification_reduces_to_standard_without_adversary() {
        let x = dm(&[&[0.3, -1.2], &[1.0, 0.1], &[-0.7, 0.8], &[0.05, 0.6]]);
        let h = HypothesisClass::linear_classification(NormOrder::TWO, 1.0).unwrap();
        let adv = adv_complexity_classification_exact_small(&x, &h, eps(0.0), None).unwrap().value;
        let std = std_complexity_classification(&x, &h, Sampling::Exact).unwrap().upper().value;
        assert!((adv - std).abs() <= 1e-6 * (1.0 + std), "{adv} vs {std}");
    }

    #[test]
    fn zero_one_examples() {
        let h = HypothesisClass::linear_classification(NormOrder::TWO, 1.0).unwrap();
        let c = zero_one_adv_vs_std_check(&dm(&[&[1.0, 0.0]]), &h, eps(1.0), 36).unwrap();
        assert!((c.adv - 0.5).abs() < 1e-12);
        let x = dm(&[&[1.0, 0.2], &[-0.3, 0.9], &[0.5, -0.5]]);
        let c = zero_one_adv_vs_std_check(&x, &h, eps(0.0), 72).unwrap();
        assert_eq!(c.std, c.adv);
        assert!(c.holds);
    }

    #[test]
    fn split_feasibility_1d_and_2d() {
        // 1-d: x = 1, eps = 0.5 keeps w = +1 positive everywhere
        assert!(!adversarial_disagree(&[1.0], &[1.0], &[1.0], 0.5));
        assert!(adversarial_disagree(&[1.0], &[-1.0], &[1.0], 0.5));
        // w = e1, v = e2 at x = (1, 1): box of radius 0.5 stays in the positive quadrant
        assert!(!adversarial_disagree(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], 0.5));
        assert!(adversarial_disagree(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], 1.5));
    }

    #[test]
    fn relu_witness_is_nonnegative_and_seeded() {
        let h = HypothesisClass::two_layer_relu(NormOrder::TWO, 1.0, 1.0, 2).unwrap();
        let x = dm(&[&[1.0, 0.0], &[0.3, 0.8], &[-0.5, 0.5]]);
        let a = relu_complexity_witness(&x, &h, 200, 3).unwrap();
        let b = relu_complexity_witness(&x, &h, 200, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.value >= 0.0);
    }

    /// Four points where every clean 0-1 loss mask is reachable but not
    /// every adversarial one, although the margin assumption holds: the
    /// ordering adv >= std fails by about 0.016.
    #[test]
    fn zero_one_ordering_can_fail_under_margin_assumption() {
        let x = DesignMatrix::from_rows(
            &[
                vec![0.41375320481570155, 0.6639003389339901],
                vec![0.3051444841509716, -0.5212646404302719],
                vec![0.9652634513610847, 0.5796240539177071],
                vec![-0.9029907446121763, -0.16634364511512567],
            ],
            None,
        )
        .unwrap();
        let h = HypothesisClass::linear_classification(NormOrder::ONE, 1e3).unwrap();
        let z = zero_one_adv_vs_std_check(&x, &h, AdversaryBudget::new(0.28896411337967176).unwrap(), 1440).unwrap();
        assert!(z.margin_assumption);
        assert_eq!(z.std, 0.5);
        assert!(z.adv < z.std - z.slack, "{z:?}");
    }
}
