//! Closed-form upper and lower bounds. All logarithms are natural.

use serde::{Deserialize, Serialize};

use super::{expected_spectral_norm, EstimateMethod, HypothesisClass, HypothesisKind, RademacherEstimate, Sampling};
use crate::error::{Error, Result};
use crate::inner::AdversaryBudget;
use crate::linalg::{group_norm, p_norm, spectral_norm_symmetric, DesignMatrix, Matrix, NormOrder, DEFAULT_TOL};

/// Default `c` for the theorem-form classification gap. With it the theorem
/// form dominates the appendix form for every `n >= 2`, `d` and `p`.
pub const CLASSIFICATION_THEOREM_C: f64 = 11.0;
/// Default `c` for the theorem-form regression gap, dominating the appendix
/// form for every `n >= 2`.
pub const REGRESSION_THEOREM_C: f64 = 29.0;

/// Which constants a gap bound uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ConstantMode {
    /// Fully explicit constants.
    #[default]
    Appendix,
    /// The compact `c * ...` form with a chosen `c`.
    Theorem { c: f64 },
}

/// Matrix Bernstein bracket
/// `sqrt(2 ||sum (x_i x_i^T)^2||_2 ln 2d) + ||X||_{2,inf}^2 ln(2d) / 3`.
pub fn bernstein_bracket(x: &DesignMatrix) -> Result<f64> {
    let d = x.d();
    let mut v = Matrix::zeros(d, d);
    for row in x.rows() {
        // (x x^T)^2 = ||x||^2 x x^T
        let sq: f64 = row.iter().map(|t| t * t).sum();
        v.add_outer(sq, row);
    }
    let var = spectral_norm_symmetric(&v, DEFAULT_TOL)?;
    let l = (2.0 * d as f64).ln();
    let r = group_norm(x.features(), NormOrder::TWO, NormOrder::INF);
    Ok((2.0 * var * l).sqrt() + r * r * l / 3.0)
}

/// Matrix Bernstein upper bound on the standard classification complexity.
pub fn std_upper_bernstein_classification(x: &DesignMatrix, h: &HypothesisClass) -> Result<RademacherEstimate> {
    h.require(HypothesisKind::LinearClassification)?;
    let v = h.w * h.w / x.n() as f64 * bernstein_bracket(x)? * h.p.quadratic_factor(x.d());
    Ok(RademacherEstimate::analytic(v))
}

/// Matrix Bernstein upper bound on the standard regression complexity.
pub fn std_upper_bernstein_regression(x: &DesignMatrix, h: &HypothesisClass) -> Result<RademacherEstimate> {
    h.require(HypothesisKind::LinearRegression)?;
    let v = 4.0 * h.w * h.w / x.n() as f64 * bernstein_bracket(x)? * h.p.quadratic_factor(x.d());
    Ok(RademacherEstimate::analytic(v))
}

fn check_c(mode: ConstantMode) -> Result<()> {
    if let ConstantMode::Theorem { c } = mode {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("theorem constant c must be positive, got {c}")));
        }
    }
    Ok(())
}

/// Additive gap `R(f~) - R(f)` bound for linear classification.
///
/// Appendix form:
/// `2 eps d^{1/p*} W^2 / sqrt(n) (1 + sqrt(d) sqrt(ln(3 sqrt n))) (eps d^{1/p*} + 2 ||X||_{p*,inf})`.
/// Theorem form: `c W^2 sqrt(d ln n) / sqrt(n) eps d^{1/p*} (eps d^{1/p*} + ||X||_{p*,inf})`,
/// which vanishes at `n = 1`.
pub fn adv_upper_classification(
    x: &DesignMatrix,
    h: &HypothesisClass,
    eps: AdversaryBudget,
    mode: ConstantMode,
) -> Result<RademacherEstimate> {
    h.require(HypothesisKind::LinearClassification)?;
    check_c(mode)?;
    let (n, d) = (x.n() as f64, x.d() as f64);
    let e = eps.eps();
    let pstar = h.p.dual();
    let dq = d.powf(pstar.recip());
    let xq = group_norm(x.features(), pstar, NormOrder::INF);
    let w2 = h.w * h.w;
    let v = match mode {
        ConstantMode::Appendix => {
            2.0 * e * dq * w2 / n.sqrt() * (1.0 + d.sqrt() * (3.0 * n.sqrt()).ln().sqrt()) * (e * dq + 2.0 * xq)
        }
        ConstantMode::Theorem { c } => c * w2 * (d * n.ln()).sqrt() / n.sqrt() * e * dq * (e * dq + xq),
    };
    Ok(RademacherEstimate::analytic(v))
}

/// Additive gap bound for linear regression.
///
/// Appendix form:
/// `4 (W^2/n) sqrt(d) eps (sqrt(d) eps + (2/n) sum ||x_i||_2
///  + sqrt(sum (sqrt(d) eps + 2 ||x_i||_2)^2) sqrt(2 d ln(6n)))`,
/// theorem form `c W^2 d sqrt(ln n) / sqrt(n) (eps ||X||_{2,inf} + sqrt(d) eps^2)`,
/// both times `d^{1-2/p}` for `p > 2`.
pub fn adv_upper_regression(
    x: &DesignMatrix,
    h: &HypothesisClass,
    eps: AdversaryBudget,
    mode: ConstantMode,
) -> Result<RademacherEstimate> {
    h.require(HypothesisKind::LinearRegression)?;
    check_c(mode)?;
    let (n, d) = (x.n() as f64, x.d() as f64);
    let e = eps.eps();
    let w2 = h.w * h.w;
    let norms = x.row_norms(NormOrder::TWO);
    let factor = h.p.quadratic_factor(x.d());
    let v = match mode {
        ConstantMode::Appendix => {
            let se = d.sqrt() * e;
            let mean = 2.0 / n * norms.iter().sum::<f64>();
            let spread = norms.iter().map(|r| (se + 2.0 * r).powi(2)).sum::<f64>().sqrt();
            4.0 * w2 / n * se * (se + mean + spread * (2.0 * d * (6.0 * n).ln()).sqrt())
        }
        ConstantMode::Theorem { c } => {
            let r = norms.iter().fold(0.0_f64, |m, v| m.max(*v));
            c * w2 * d * n.ln().sqrt() / n.sqrt() * (e * r + d.sqrt() * e * e)
        }
    };
    Ok(RademacherEstimate::analytic(v * factor))
}

/// Upper bound on the adversarial complexity of the two-layer ReLU class,
/// `(2/n) A^2 W^2 [ sqrt(sum (||x_i||_q^2 + d^{2/q} eps^2)^2) sqrt((1+d) 4m ln(3n))
///  + 4 (max ||x_i||_q^2 + d^{2/q} eps^2) ]` with `q = p*`.
pub fn nn_adv_upper(x: &DesignMatrix, h: &HypothesisClass, eps: AdversaryBudget, q: NormOrder) -> Result<RademacherEstimate> {
    h.require(HypothesisKind::TwoLayerRelu)?;
    let expected = h.p.dual();
    let same = if expected.is_inf() { q.is_inf() } else { (q.value() - expected.value()).abs() <= 1e-12 * expected.value() };
    if !same {
        return Err(Error::invalid(format!("q must be the dual of p = {}, i.e. {expected}, got {q}", h.p)));
    }
    let (n, d) = (x.n() as f64, x.d() as f64);
    let e = eps.eps();
    let shift = d.powf(2.0 * q.recip()) * e * e;
    let terms: Vec<f64> = x.rows().map(|r| p_norm(r, q).powi(2) + shift).collect();
    let root = terms.iter().map(|t| t * t).sum::<f64>().sqrt();
    let top = terms.iter().fold(0.0_f64, |m, v| m.max(*v));
    let m = h.m as f64;
    let v = 2.0 / n * h.a * h.a * h.w * h.w * (root * ((1.0 + d) * 4.0 * m * (3.0 * n).ln()).sqrt() + 4.0 * top);
    Ok(RademacherEstimate::analytic(v))
}

/// The classification lower-gap term, reported both raw and clamped at 0.
///
/// For `p <= 2` the gap bound is 0. For `p > 2` it is
/// `(W^2/n)(1 - d^{1-2/p}) E ||S(sigma)||_2`, whose factor is never positive
/// for `d >= 1`; `clamped = max(0, raw)` is the trivially valid statement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerGap {
    pub raw: f64,
    pub clamped: f64,
    pub stderr: f64,
    pub method: EstimateMethod,
    pub samples: u64,
}

pub fn adv_lower_gap_classification(x: &DesignMatrix, h: &HypothesisClass, sampling: Sampling) -> Result<LowerGap> {
    h.require(HypothesisKind::LinearClassification)?;
    if h.p.value() <= 2.0 {
        return Ok(LowerGap { raw: 0.0, clamped: 0.0, stderr: 0.0, method: EstimateMethod::AnalyticUpper, samples: 0 });
    }
    let spec = expected_spectral_norm(x, sampling)?;
    let coef = h.w * h.w / x.n() as f64 * (1.0 - h.p.quadratic_factor(x.d()));
    let raw = coef * spec.value;
    Ok(LowerGap { raw, clamped: raw.max(0.0), stderr: coef.abs() * spec.stderr, method: spec.method, samples: spec.samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(rows: &[&[f64]]) -> DesignMatrix {
        DesignMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), None).unwrap()
    }

    fn eps(e: f64) -> AdversaryBudget {
        AdversaryBudget::new(e).unwrap()
    }

    fn fixture() -> DesignMatrix {
        dm(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[0.5, -1.0]])
    }

    #[test]
    fn bernstein_unit_sample() {
        let h = HypothesisClass::linear_classification(NormOrder::TWO, 1.0).unwrap();
        let v = std_upper_bernstein_classification(&dm(&[&[1.0, 0.0]]), &h).unwrap().value;
        assert!((v - 2.127_207_342_688_692_4).abs() < 1e-12);
        let h2 = HypothesisClass::linear_classification(NormOrder::TWO, 2.0).unwrap();
        let v2 = std_upper_bernstein_classification(&dm(&[&[1.0, 0.0]]), &h2).unwrap().value;
        assert!((v2 - 4.0 * v).abs() < 1e-12);
    }

    #[test]
    fn appendix_gap_values_match_script_oracle() {
        let h = HypothesisClass::linear_classification(NormOrder::TWO, 1.0).unwrap();
        let v = adv_upper_classification(&fixture(), &h, eps(0.1), ConstantMode::Appendix).unwrap().value;
        assert!((v - 1.215_067_758_586_435_6).abs() < 1e-12, "{v}");
        let h = HypothesisClass::linear_regression(NormOrder::TWO, 1.0).unwrap();
        let v = adv_upper_regression(&fixture(), &h, eps(0.1), ConstantMode::Appendix).unwrap().value;
        assert!((v - 2.792_275_238_716_547_5).abs() < 1e-12, "{v}");
    }

    #[test]
    fn gaps_vanish_without_adversary() {
        let h = HypothesisClass::linear_classification(NormOrder::TWO, 1.0).unwrap();
        assert_eq!(adv_upper_classification(&fixture(), &h, eps(0.0), ConstantMode::Appendix).unwrap().value, 0.0);
        let r = HypothesisClass::linear_regression(NormOrder::TWO, 1.0).unwrap();
        assert_eq!(adv_upper_regression(&fixture(), &r, eps(0.0), ConstantMode::Theorem { c: 3.0 }).unwrap().value, 0.0);
    }

    #[test]
    fn l1_weights_have_smaller_gap() {
        let x = fixture();
        let p1 = HypothesisClass::linear_classification(NormOrder::ONE, 1.0).unwrap();
        let p2 = HypothesisClass::linear_classification(NormOrder::TWO, 1.0).unwrap();
        let g1 = adv_upper_classification(&x, &p1, eps(0.1), ConstantMode::Appendix).unwrap().value;
        let g2 = adv_upper_classification(&x, &p2, eps(0.1), ConstantMode::Appendix).unwrap().value;
        assert!(g1 < g2);
    }

    #[test]
    fn theorem_constants_envelope_appendix() {
        let x = fixture();
        for p in [NormOrder::ONE, NormOrder::TWO, NormOrder::new(4.0).unwrap(), NormOrder::INF] {
            for e in [0.01, 0.1, 1.0, 5.0] {
                let h = HypothesisClass::linear_classification(p, 1.3).unwrap();
                let app = adv_upper_classification(&x, &h, eps(e), ConstantMode::Appendix).unwrap().value;
                let thm = adv_upper_classification(&x, &h, eps(e), ConstantMode::Theorem { c: CLASSIFICATION_THEOREM_C })
                    .unwrap()
                    .value;
                assert!(thm >= app, "p={p} eps={e}: {thm} < {app}");
                let h = HypothesisClass::linear_regression(p, 1.3).unwrap();
                let app = adv_upper_regression(&x, &h, eps(e), ConstantMode::Appendix).unwrap().value;
                let thm = adv_upper_regression(&x, &h, eps(e), ConstantMode::Theorem { c: REGRESSION_THEOREM_C }).unwrap().value;
                assert!(thm >= app, "p={p} eps={e}: {thm} < {app}");
            }
        }
    }

    #[test]
    fn relu_bound_formula() {
        let h = HypothesisClass::two_layer_relu(NormOrder::TWO, 1.0, 1.0, 1).unwrap();
        let v = nn_adv_upper(&dm(&[&[1.0, 0.0]]), &h, eps(0.0), NormOrder::TWO).unwrap().value;
        assert!((v - 15.261_775_943_670_34).abs() < 1e-10, "{v}");
        let h3 = HypothesisClass::two_layer_relu(NormOrder::TWO, 2.0, 3.0, 1).unwrap();
        let v3 = nn_adv_upper(&dm(&[&[1.0, 0.0]]), &h3, eps(0.0), NormOrder::TWO).unwrap().value;
        assert!((v3 - 36.0 * v).abs() < 1e-9);
        assert!(nn_adv_upper(&dm(&[&[1.0, 0.0]]), &h, eps(0.0), NormOrder::ONE).is_err());
    }

    #[test]
    fn lower_gap_cases() {
        let x = dm(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let h = HypothesisClass::linear_classification(NormOrder::TWO, 1.0).unwrap();
        assert_eq!(adv_lower_gap_classification(&x, &h, Sampling::Exact).unwrap().clamped, 0.0);
        let h4 = HypothesisClass::linear_classification(NormOrder::new(4.0).unwrap(), 1.0).unwrap();
        let g = adv_lower_gap_classification(&x, &h4, Sampling::Exact).unwrap();
        assert!((g.raw - 0.5 * (1.0 - 3f64.sqrt())).abs() < 1e-12);
        assert_eq!(g.clamped, 0.0);
        let x1 = dm(&[&[1.0], &[2.0]]);
        assert_eq!(adv_lower_gap_classification(&x1, &h4, Sampling::Exact).unwrap().raw, 0.0);
    }
}
