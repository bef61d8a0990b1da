//! Standard and adversarial Rademacher complexity over `HΔH`.
//!
//! For linear hypotheses `||w||_p <= W` the standard classification class
//! reduces to `(W^2/n) E ||S(sigma)||_2` with `S(sigma) = sum sigma_i x_i x_i^T`,
//! and the regression class to `(4W^2/n) E max(lambda_max(S(sigma)), 0)`.
//! Both expectations are computed by exhaustive enumeration of sign patterns
//! for `n <= 12` or by seeded Monte Carlo.

pub(crate) mod adversarial;
mod bounds;

pub use adversarial::{
    adv_complexity_classification_exact_small, adv_complexity_regression_exact_small, relu_complexity_witness,
    zero_one_adv_vs_std_check, ZeroOneComparison, DEFAULT_CLASSIFICATION_DIRECTIONS, DEFAULT_RELU_PAIRS,
    DEFAULT_ZERO_ONE_DIRECTIONS, REGRESSION_GRID_TOLERANCE,
};
pub use bounds::{
    adv_lower_gap_classification, adv_upper_classification, adv_upper_regression, bernstein_bracket, nn_adv_upper,
    std_upper_bernstein_classification, std_upper_bernstein_regression, ConstantMode, LowerGap, CLASSIFICATION_THEOREM_C,
    REGRESSION_THEOREM_C,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    exact_sum, lambda_max_symmetric, spectral_norm_symmetric, DesignMatrix, ExactSum, Matrix, NormOrder, DEFAULT_TOL,
};

/// Largest `n` for exhaustive enumeration of the `2^n` sign patterns.
pub const MAX_EXACT_N: usize = 12;
/// Default Monte Carlo sample count.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;
/// Smallest accepted Monte Carlo sample count.
pub const MIN_MC_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisKind {
    LinearClassification,
    LinearRegression,
    TwoLayerRelu,
}

/// The hypothesis set the suprema range over.
///
/// Linear classes are `{w : ||w||_p <= W}`. The two-layer ReLU class is
/// `x -> a^T relu(Wx)` with `||a||_1 <= A` and every row of `W` in the
/// `p`-ball of radius `W`; `m` is the hidden width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisClass {
    pub kind: HypothesisKind,
    pub p: NormOrder,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub m: usize,
}

impl HypothesisClass {
    pub fn linear_classification(p: NormOrder, w: f64) -> Result<Self> {
        HypothesisClass { kind: HypothesisKind::LinearClassification, p, w, a: 0.0, m: 0 }.validated()
    }

    pub fn linear_regression(p: NormOrder, w: f64) -> Result<Self> {
        HypothesisClass { kind: HypothesisKind::LinearRegression, p, w, a: 0.0, m: 0 }.validated()
    }

    pub fn two_layer_relu(p: NormOrder, w: f64, a: f64, m: usize) -> Result<Self> {
        HypothesisClass { kind: HypothesisKind::TwoLayerRelu, p, w, a, m }.validated()
    }

    fn validated(self) -> Result<Self> {
        if !(self.w > 0.0) || !self.w.is_finite() {
            return Err(Error::invalid(format!("weight radius W must be positive, got {}", self.w)));
        }
        if self.kind == HypothesisKind::TwoLayerRelu {
            if !(self.a > 0.0) || !self.a.is_finite() {
                return Err(Error::invalid(format!("outer radius A must be positive, got {}", self.a)));
            }
            if self.m == 0 {
                return Err(Error::invalid("hidden width m must be >= 1"));
            }
        }
        Ok(self)
    }

    pub(crate) fn require(&self, kind: HypothesisKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::invalid(format!("operation needs a {kind:?} class, got {:?}", self.kind)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    ClassificationPhi,
    Squared,
    ZeroOne,
}

/// Loss attached to a class. `lipschitz` is `L_phi` for margin losses and
/// is ignored otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub lipschitz: f64,
}

impl LossSpec {
    pub fn classification(lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(Error::invalid(format!("Lipschitz constant must be positive, got {lipschitz}")));
        }
        Ok(LossSpec { kind: LossKind::ClassificationPhi, lipschitz })
    }

    pub fn squared() -> Self {
        LossSpec { kind: LossKind::Squared, lipschitz: 1.0 }
    }

    pub fn zero_one() -> Self {
        LossSpec { kind: LossKind::ZeroOne, lipschitz: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    ExactEnumeration,
    MonteCarlo,
    WitnessLower,
    AnalyticUpper,
}

/// A complexity value with its provenance.
///
/// `stderr` is nonzero only for Monte Carlo. `grid_tolerance` is set when the
/// supremum inside the expectation was taken over a direction grid and is
/// then a relative accuracy, not a guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: EstimateMethod,
    pub samples: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid_tolerance: Option<f64>,
}

impl RademacherEstimate {
    pub fn analytic(value: f64) -> Self {
        RademacherEstimate { value, stderr: 0.0, method: EstimateMethod::AnalyticUpper, samples: 0, grid_tolerance: None }
    }

    pub(crate) fn exact(value: f64, samples: u64) -> Self {
        RademacherEstimate { value, stderr: 0.0, method: EstimateMethod::ExactEnumeration, samples, grid_tolerance: None }
    }

    /// Multiplies value and standard error by `s >= 0`.
    pub fn scaled(mut self, s: f64) -> Self {
        self.value *= s;
        self.stderr *= s;
        self
    }
}

/// How the expectation over sign patterns is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum Sampling {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Sampling {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Sampling::MonteCarlo { samples, seed }
    }
}

/// Either a value, or a `[lower, upper]` bracket when only the `p = 2`
/// quantity is computable and norm equivalence transfers it to `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Complexity {
    Value(RademacherEstimate),
    Bracket { lower: RademacherEstimate, upper: RademacherEstimate },
}

impl Complexity {
    pub fn lower(&self) -> RademacherEstimate {
        match self {
            Complexity::Value(e) => *e,
            Complexity::Bracket { lower, .. } => *lower,
        }
    }

    pub fn upper(&self) -> RademacherEstimate {
        match self {
            Complexity::Value(e) => *e,
            Complexity::Bracket { upper, .. } => *upper,
        }
    }

    /// Brackets the `p`-ball value from the `p = 2` value.
    ///
    /// For `p < 2` the `p`-ball sits inside the 2-ball, which sits inside
    /// the `p`-ball scaled by `d^{1/p-1/2}`; for `p > 2` the roles swap. A
    /// degree-two supremum therefore lies between `v2` and `d^{1-2/p} v2`.
    fn from_p2(e: RademacherEstimate, p: NormOrder, d: usize) -> Self {
        if p == NormOrder::TWO {
            return Complexity::Value(e);
        }
        let f = if p.is_inf() { d as f64 } else { (d as f64).powf(1.0 - 2.0 / p.value()) };
        if p.value() < 2.0 {
            Complexity::Bracket { lower: e.scaled(f), upper: e }
        } else {
            Complexity::Bracket { lower: e, upper: e.scaled(f) }
        }
    }
}

/// Sign of coordinate `i` in pattern `mask`: bit set means `+1`.
#[inline]
pub(crate) fn pattern_sign(mask: u32, i: usize) -> f64 {
    if mask >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn check_exact_n(n: usize) -> Result<()> {
    if n > MAX_EXACT_N {
        return Err(Error::TooLarge { what: "sample count for exact enumeration", got: n, max: MAX_EXACT_N });
    }
    Ok(())
}

/// `S(sigma) = sum sigma_i x_i x_i^T`.
pub fn signed_outer_sum(x: &DesignMatrix, sigma: &[f64]) -> Matrix {
    let d = x.d();
    let mut s = Matrix::zeros(d, d);
    for (row, &sg) in x.rows().zip(sigma) {
        s.add_outer(sg, row);
    }
    s
}

/// Exact mean of `f(sigma)` over all `2^n` sign patterns.
pub(crate) fn enumerate_mean<F>(n: usize, f: F) -> Result<f64>
where
    F: Fn(u32) -> Result<f64> + Sync,
{
    check_exact_n(n)?;
    let total = 1u32 << n;
    let sum = (0..total)
        .into_par_iter()
        .map(&f)
        .try_fold(ExactSum::new, |mut acc, v| {
            acc.add(v?);
            Ok::<_, Error>(acc)
        })
        .try_reduce(ExactSum::new, |a, b| Ok(a.merge(b)))?;
    Ok(sum.value() / total as f64)
}

/// Monte Carlo mean and standard error of `f(sigma)` over `samples`
/// seeded sign patterns.
pub(crate) fn monte_carlo_mean<F>(n: usize, samples: usize, seed: u64, f: F) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if samples < MIN_MC_SAMPLES {
        return Err(Error::invalid(format!("Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns: Vec<f64> = (0..samples * n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let values: Vec<f64> = patterns.par_chunks(n).map(&f).collect::<Result<_>>()?;
    let mean = exact_sum(values.iter().copied()) / samples as f64;
    let ss = exact_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let sd = (ss / (samples - 1) as f64).sqrt();
    Ok((mean, sd / (samples as f64).sqrt()))
}

fn sigma_of(mask: u32, n: usize) -> Vec<f64> {
    (0..n).map(|i| pattern_sign(mask, i)).collect()
}

/// `E ||S(sigma)||_2` by full enumeration; with `use_symmetry` only the
/// patterns with `sigma_n = +1` are visited and the sum doubled, since
/// `||S(-sigma)|| = ||S(sigma)||`. Both paths return identical bits because
/// the sums are correctly rounded.
pub fn spectral_mean_enumerated(x: &DesignMatrix, use_symmetry: bool) -> Result<f64> {
    let n = x.n();
    check_exact_n(n)?;
    let norm = |mask: u32| spectral_norm_symmetric(&signed_outer_sum(x, &sigma_of(mask, n)), DEFAULT_TOL);
    if !use_symmetry {
        return enumerate_mean(n, norm);
    }
    let half = 1u32 << (n - 1);
    let sum = (half..2 * half)
        .into_par_iter()
        .map(norm)
        .try_fold(ExactSum::new, |mut acc, v| {
            acc.add(v?);
            Ok::<_, Error>(acc)
        })
        .try_reduce(ExactSum::new, |a, b| Ok(a.merge(b)))?;
    Ok(2.0 * sum.value() / (2 * half) as f64)
}

/// `E over sigma of ||sum sigma_i x_i x_i^T||_2`.
pub fn expected_spectral_norm(x: &DesignMatrix, sampling: Sampling) -> Result<RademacherEstimate> {
    match sampling {
        Sampling::Exact => {
            let v = spectral_mean_enumerated(x, true)?;
            Ok(RademacherEstimate::exact(v, 1u64 << x.n()))
        }
        Sampling::MonteCarlo { samples, seed } => {
            let (mean, se) =
                monte_carlo_mean(x.n(), samples, seed, |s| spectral_norm_symmetric(&signed_outer_sum(x, s), DEFAULT_TOL))?;
            Ok(RademacherEstimate {
                value: mean,
                stderr: se,
                method: EstimateMethod::MonteCarlo,
                samples: samples as u64,
                grid_tolerance: None,
            })
        }
    }
}

/// Standard complexity of the loss-free product class `f(x) = w^T x w'^T x`.
///
/// Exactly `(W^2/n) E ||S(sigma)||_2` for `p = 2`; a bracket otherwise.
pub fn std_complexity_classification(x: &DesignMatrix, h: &HypothesisClass, sampling: Sampling) -> Result<Complexity> {
    h.require(HypothesisKind::LinearClassification)?;
    let e = expected_spectral_norm(x, sampling)?.scaled(h.w * h.w / x.n() as f64);
    Ok(Complexity::from_p2(e, h.p, x.d()))
}

/// `E max(lambda_max(S(sigma)), 0)`, the regression analogue of the
/// spectral mean: `v = 0` is feasible so the supremum is never negative.
pub fn positive_top_eigen_mean(x: &DesignMatrix, sampling: Sampling) -> Result<RademacherEstimate> {
    let n = x.n();
    let top = |s: &[f64]| Ok(lambda_max_symmetric(&signed_outer_sum(x, s), DEFAULT_TOL)?.max(0.0));
    match sampling {
        Sampling::Exact => {
            let v = enumerate_mean(n, |mask| top(&sigma_of(mask, n)))?;
            Ok(RademacherEstimate::exact(v, 1u64 << n))
        }
        Sampling::MonteCarlo { samples, seed } => {
            let (mean, se) = monte_carlo_mean(n, samples, seed, top)?;
            Ok(RademacherEstimate {
                value: mean,
                stderr: se,
                method: EstimateMethod::MonteCarlo,
                samples: samples as u64,
                grid_tolerance: None,
            })
        }
    }
}

/// Standard complexity of the squared-loss class,
/// `E sup over ||v||_p <= 2W of (1/n) sum sigma_i (v^T x_i)^2`.
pub fn std_complexity_regression(x: &DesignMatrix, h: &HypothesisClass, sampling: Sampling) -> Result<Complexity> {
    h.require(HypothesisKind::LinearRegression)?;
    let e = positive_top_eigen_mean(x, sampling)?.scaled(4.0 * h.w * h.w / x.n() as f64);
    Ok(Complexity::from_p2(e, h.p, x.d()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(rows: &[&[f64]]) -> DesignMatrix {
        DesignMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), None).unwrap()
    }

    fn cls(w: f64) -> HypothesisClass {
        HypothesisClass::linear_classification(NormOrder::TWO, w).unwrap()
    }

    #[test]
    fn spectral_mean_examples() {
        let e = expected_spectral_norm(&dm(&[&[1.0, 0.0], &[0.0, 1.0]]), Sampling::Exact).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        assert_eq!(e.samples, 4);
        let e = expected_spectral_norm(&dm(&[&[1.0, 0.0]]), Sampling::Exact).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_and_full_enumeration_agree_bitwise() {
        let x = dm(&[&[0.3, -1.2, 0.5], &[1.0, 0.1, -0.4], &[-0.7, 0.8, 0.2], &[0.05, 0.6, 1.1], &[0.9, -0.3, 0.0]]);
        let a = spectral_mean_enumerated(&x, true).unwrap();
        let b = spectral_mean_enumerated(&x, false).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn classification_examples() {
        let x = dm(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let v = std_complexity_classification(&x, &cls(1.0), Sampling::Exact).unwrap().upper().value;
        assert!((v - 0.5).abs() < 1e-12);
        let v2 = std_complexity_classification(&x, &cls(2.0), Sampling::Exact).unwrap().upper().value;
        assert!((v2 - 4.0 * v).abs() < 1e-12);
    }

    #[test]
    fn bracket_ratio_for_p3() {
        let x = dm(&[&[0.3, -1.2], &[1.0, 0.1], &[-0.7, 0.8], &[0.05, 0.6], &[0.9, -0.3]]);
        let h = HypothesisClass::linear_classification(NormOrder::new(3.0).unwrap(), 1.0).unwrap();
        let c = std_complexity_classification(&x, &h, Sampling::Exact).unwrap();
        let ratio = c.upper().value / c.lower().value;
        assert!((ratio - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn regression_examples() {
        let h = HypothesisClass::linear_regression(NormOrder::TWO, 1.0).unwrap();
        let v = std_complexity_regression(&dm(&[&[1.0, 0.0], &[0.0, 1.0]]), &h, Sampling::Exact).unwrap();
        assert!((v.upper().value - 1.5).abs() < 1e-12);
        let h = HypothesisClass::linear_regression(NormOrder::TWO, 0.7).unwrap();
        let v = std_complexity_regression(&dm(&[&[1.0, 0.0]]), &h, Sampling::Exact).unwrap();
        assert!((v.upper().value - 2.0 * 0.49).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let rows: Vec<Vec<f64>> = (0..13).map(|i| vec![i as f64]).collect();
        let x = DesignMatrix::from_rows(&rows, None).unwrap();
        assert!(matches!(expected_spectral_norm(&x, Sampling::Exact), Err(Error::TooLarge { .. })));
        assert!(expected_spectral_norm(&x, Sampling::monte_carlo(99, 1)).is_err());
        assert!(expected_spectral_norm(&x, Sampling::monte_carlo(100, 1)).is_ok());
        let reg = HypothesisClass::linear_regression(NormOrder::TWO, 1.0).unwrap();
        assert!(std_complexity_classification(&x, &reg, Sampling::monte_carlo(100, 1)).is_err());
        assert!(HypothesisClass::linear_regression(NormOrder::TWO, 0.0).is_err());
        assert!(HypothesisClass::two_layer_relu(NormOrder::TWO, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let x = dm(&[&[0.3, -1.2], &[1.0, 0.1], &[-0.7, 0.8]]);
        let a = expected_spectral_norm(&x, Sampling::monte_carlo(500, 9)).unwrap();
        let b = expected_spectral_norm(&x, Sampling::monte_carlo(500, 9)).unwrap();
        assert_eq!(a, b);
        assert!(a.stderr > 0.0);
    }
}
