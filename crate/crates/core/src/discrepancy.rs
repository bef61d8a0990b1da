//! `HΔH` discrepancy between two empirical domains and the assembly of the
//! domain-adaptation generalization bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner::{min_bilinear_over_box, AdversaryBudget, BilinearMode};
use crate::linalg::{dot, exact_sum, spectral_norm_symmetric, DesignMatrix, Matrix, NormOrder, DEFAULT_TOL};
use crate::rademacher::adversarial::{adversarial_disagree, directions, grid_spacing, normalized, refine};
use crate::rademacher::{HypothesisClass, HypothesisKind, LossKind, LossSpec};

/// Default confidence parameter `c`.
pub const DEFAULT_CONFIDENCE: f64 = 0.05;
/// Largest `n_S + n_T` accepted by [`hdh_discrepancy_bruteforce`].
pub const MAX_BRUTEFORCE_POINTS: usize = 24;

/// A source and a target sample over the same feature space. Rows are
/// weighted uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainPair {
    pub source: DesignMatrix,
    pub target: DesignMatrix,
    /// Whether both domains share one labeling function.
    pub shared_labeling: bool,
}

impl DomainPair {
    pub fn new(source: DesignMatrix, target: DesignMatrix, shared_labeling: bool) -> Result<Self> {
        if source.d() != target.d() {
            return Err(Error::invalid(format!("source has {} features but target has {}", source.d(), target.d())));
        }
        Ok(DomainPair { source, target, shared_labeling })
    }

    pub fn swapped(&self) -> Self {
        DomainPair { source: self.target.clone(), target: self.source.clone(), shared_labeling: self.shared_labeling }
    }
}

/// Margin loss used by the brute-force classification discrepancy:
/// `L ln(1 + e^{-z})`, decreasing and `L`-Lipschitz.
pub fn logistic_phi(z: f64, lipschitz: f64) -> f64 {
    // ln(1 + e^{-z}) without overflow for very negative z
    lipschitz * if z > 0.0 { (-z).exp().ln_1p() } else { -z + z.exp().ln_1p() }
}

/// Exact squared-loss discrepancy for the `l_2` ball:
/// `sup over ||v||_2 <= 2W of |v^T (C_S - C_T) v| = 4 W^2 ||C_S - C_T||_2`
/// with `C` the empirical second moment.
pub fn hdh_discrepancy_regression(s: &DesignMatrix, t: &DesignMatrix, h: &HypothesisClass) -> Result<f64> {
    h.require(HypothesisKind::LinearRegression)?;
    if h.p != NormOrder::TWO {
        return Err(Error::invalid(format!(
            "closed-form discrepancy needs p = 2, got p = {}; use the brute-force estimator",
            h.p
        )));
    }
    if s.d() != t.d() {
        return Err(Error::invalid("domains have different dimensions"));
    }
    let cs = s.second_moment();
    let ct = t.second_moment();
    let d = s.d();
    let diff: Vec<f64> = cs.as_slice().iter().zip(ct.as_slice()).map(|(a, b)| a - b).collect();
    let diff = Matrix::new(d, d, diff)?;
    Ok(4.0 * h.w * h.w * spectral_norm_symmetric(&diff, DEFAULT_TOL)?)
}

/// Resolution of [`hdh_discrepancy_bruteforce`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BruteForceGrid {
    /// Hypothesis directions on the unit `p`-sphere (`d = 2`).
    pub directions: usize,
    /// Points per axis of the inner perturbation grid (odd); regression only.
    pub delta_points: usize,
    /// Levels of the scale `||w|| ||w'|| / W^2` in `[0, 1]`; margin loss only.
    pub scales: usize,
}

impl Default for BruteForceGrid {
    fn default() -> Self {
        BruteForceGrid { directions: 180, delta_points: 11, scales: 40 }
    }
}

/// Brute-force `max over (w, w') of |R_T(w, w') - R_S(w, w')|` on tiny
/// instances (`d <= 2`, `n_S + n_T <= 24`), standard or adversarial.
///
/// * Squared loss: depends on `v = w - w'` ranging over the `2W` ball, and
///   is homogeneous of degree two, so the search runs over unit directions
///   (grid plus compass refinement). The inner maximum is taken over a
///   `delta_points` grid, which contains the box corners where this convex
///   inner problem attains its maximum.
/// * Margin loss `logistic_phi`: the product `w^T z w'^T z` factors into a
///   direction part and a scale in `[0, W^2]`; the inner worst case is
///   `phi` of the exact minimum product (face enumeration).
/// * 0-1 disagreement: scale free over directions plus the zero vector;
///   the adversarial disagreement is decided exactly.
///
/// A grid search underestimates the supremum; the result is a lower
/// estimate whose accuracy improves with the grid.
pub fn hdh_discrepancy_bruteforce(
    s: &DesignMatrix,
    t: &DesignMatrix,
    h: &HypothesisClass,
    loss: LossSpec,
    adversarial: Option<AdversaryBudget>,
    grid: BruteForceGrid,
) -> Result<f64> {
    if s.d() != t.d() {
        return Err(Error::invalid("domains have different dimensions"));
    }
    let d = s.d();
    if d > 2 {
        return Err(Error::TooLarge { what: "dimension", got: d, max: 2 });
    }
    if s.n() + t.n() > MAX_BRUTEFORCE_POINTS {
        return Err(Error::TooLarge { what: "total sample count", got: s.n() + t.n(), max: MAX_BRUTEFORCE_POINTS });
    }
    if grid.directions < 4 {
        return Err(Error::invalid(format!("need at least 4 directions, got {}", grid.directions)));
    }
    let eps = adversarial.map_or(0.0, AdversaryBudget::eps);
    match loss.kind {
        LossKind::Squared => {
            h.require(HypothesisKind::LinearRegression)?;
            if grid.delta_points < 3 || grid.delta_points.is_multiple_of(2) {
                return Err(Error::invalid(format!("delta grid must be odd and >= 3, got {}", grid.delta_points)));
            }
            Ok(squared_bruteforce(s, t, h, eps, grid))
        }
        LossKind::ClassificationPhi => {
            h.require(HypothesisKind::LinearClassification)?;
            if grid.scales < 2 {
                return Err(Error::invalid("need at least 2 scale levels"));
            }
            Ok(margin_bruteforce(s, t, h, loss.lipschitz, eps, grid))
        }
        LossKind::ZeroOne => {
            h.require(HypothesisKind::LinearClassification)?;
            Ok(zero_one_bruteforce(s, t, h, eps, grid))
        }
    }
}

fn mean(v: impl IntoIterator<Item = f64>, n: usize) -> f64 {
    exact_sum(v) / n as f64
}

fn delta_grid(d: usize, m: usize, eps: f64) -> Vec<Vec<f64>> {
    if eps == 0.0 {
        return vec![vec![0.0; d]];
    }
    let coord = |k: usize| eps * (2.0 * k as f64 - (m - 1) as f64) / (m - 1) as f64;
    let total = m.pow(d as u32);
    (0..total)
        .map(|flat| {
            let mut r = flat;
            let mut p = vec![0.0; d];
            for j in (0..d).rev() {
                p[j] = coord(r % m);
                r /= m;
            }
            p
        })
        .collect()
}

fn squared_bruteforce(s: &DesignMatrix, t: &DesignMatrix, h: &HypothesisClass, eps: f64, grid: BruteForceGrid) -> f64 {
    let d = s.d();
    let deltas = delta_grid(d, grid.delta_points, eps);
    let point_loss = |u: &[f64], x: &[f64]| {
        let a = dot(u, x);
        deltas.iter().map(|dl| (a + dot(u, dl)).powi(2)).fold(f64::NEG_INFINITY, f64::max)
    };
    let gap = |u: &[f64]| {
        let lt = mean(t.rows().map(|x| point_loss(u, x)), t.n());
        let ls = mean(s.rows().map(|x| point_loss(u, x)), s.n());
        (lt - ls).abs()
    };
    let dirs = directions(d, h.p, grid.directions, true);
    let values: Vec<f64> = dirs.par_iter().map(|u| gap(u)).collect();
    let (k, best) = values.iter().enumerate().fold((0, 0.0), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    let objective = |u: &[f64]| normalized(u, h.p).map_or(f64::NEG_INFINITY, |u| gap(&u));
    let (refined, _) = refine(objective, dirs[k].clone(), grid_spacing(d, grid.directions));
    4.0 * h.w * h.w * best.max(refined)
}

fn margin_bruteforce(
    s: &DesignMatrix,
    t: &DesignMatrix,
    h: &HypothesisClass,
    lipschitz: f64,
    eps: f64,
    grid: BruteForceGrid,
) -> f64 {
    let d = s.d();
    let budget = AdversaryBudget::new(eps).expect("validated budget");
    let dirs = directions(d, h.p, grid.directions, false);
    let products = |u: &[f64], v: &[f64], x: &DesignMatrix| -> Vec<f64> {
        x.rows()
            .map(|r| min_bilinear_over_box(u, v, r, budget, BilinearMode::FaceEnumeration).expect("dimensions checked").optimum)
            .collect()
    };
    let scales: Vec<f64> = (0..grid.scales).map(|k| h.w * h.w * k as f64 / (grid.scales - 1) as f64).collect();
    let pairs: Vec<(usize, usize)> = (0..dirs.len()).flat_map(|a| (0..dirs.len()).map(move |b| (a, b))).collect();
    pairs
        .par_iter()
        .map(|&(a, b)| {
            let ps = products(&dirs[a], &dirs[b], s);
            let pt = products(&dirs[a], &dirs[b], t);
            scales
                .iter()
                .map(|&c| {
                    let ls = mean(ps.iter().map(|&z| logistic_phi(c * z, lipschitz)), s.n());
                    let lt = mean(pt.iter().map(|&z| logistic_phi(c * z, lipschitz)), t.n());
                    (lt - ls).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn zero_one_bruteforce(s: &DesignMatrix, t: &DesignMatrix, h: &HypothesisClass, eps: f64, grid: BruteForceGrid) -> f64 {
    let d = s.d();
    let mut hyps = directions(d, h.p, grid.directions, false);
    hyps.push(vec![0.0; d]);
    let risk = |u: &[f64], v: &[f64], x: &DesignMatrix| {
        let k = x.rows().filter(|r| adversarial_disagree(u, v, r, eps)).count();
        k as f64 / x.n() as f64
    };
    (0..hyps.len())
        .into_par_iter()
        .map(|a| hyps.iter().map(|v| (risk(&hyps[a], v, t) - risk(&hyps[a], v, s)).abs()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// Where two constants disagree: the value in a result's statement or the
/// one its derivation produces. Selects the regression slack and the
/// corollary's discrepancy coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientVariant {
    /// Leading factor `8 sqrt(d) eps W^2`.
    #[default]
    Statement,
    /// Leading factor `8 sqrt(d) eps W`, as the last step of the derivation reads.
    Proof,
}

/// Additive slack with `disc_adv <= disc + slack`.
///
/// Margin losses: `2 W^2 L sqrt(d) eps (m_T + m_S) f`; squared loss:
/// `8 sqrt(d) eps W^2 (m_T + m_S) f` (or `W` for [`CoefficientVariant::Proof`]),
/// where `m` is the mean row `l_2` norm and `f = d^{1-2/p}` for `p > 2`,
/// else 1.
pub fn estimate_adv_disc_from_std(
    s: &DesignMatrix,
    t: &DesignMatrix,
    h: &HypothesisClass,
    eps: AdversaryBudget,
    loss: LossSpec,
    variant: CoefficientVariant,
) -> Result<f64> {
    if s.d() != t.d() {
        return Err(Error::invalid("domains have different dimensions"));
    }
    let d = s.d();
    let m = |x: &DesignMatrix| mean(x.row_norms(NormOrder::TWO), x.n());
    let norms = m(s) + m(t);
    let f = h.p.quadratic_factor(d);
    let root_d = (d as f64).sqrt();
    match (h.kind, loss.kind) {
        (HypothesisKind::LinearClassification, LossKind::ClassificationPhi) => {
            Ok(2.0 * h.w * h.w * loss.lipschitz * root_d * eps.eps() * norms * f)
        }
        (HypothesisKind::LinearRegression, LossKind::Squared) => {
            let wf = match variant {
                CoefficientVariant::Statement => h.w * h.w,
                CoefficientVariant::Proof => h.w,
            };
            Ok(8.0 * root_d * eps.eps() * wf * norms * f)
        }
        (kind, loss) => Err(Error::invalid(format!("no discrepancy slack for {kind:?} with {loss:?} loss"))),
    }
}

/// Which bound a [`BoundReport`] itemizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Standard,
    Adversarial,
    CorollaryStatement,
    CorollaryProof,
}

/// Itemized right-hand side of a generalization bound. Every component is
/// already multiplied by its coefficient, so `total` is their plain sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: BoundKind,
    pub source_risk: f64,
    pub discrepancy: f64,
    pub lambda_terms: f64,
    pub complexity_source: f64,
    pub complexity_target: f64,
    pub concentration_source: f64,
    pub concentration_target: f64,
    pub total: f64,
    pub confidence: f64,
    pub loss_bound: f64,
}

/// The three risks `lambda` can be built from. The standard bound uses only
/// the two target terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaParts {
    /// Risk of the best source model on the source labels.
    #[serde(default)]
    pub source_label: f64,
    /// Disagreement of the best target and source models on the target.
    pub target_pair: f64,
    /// Risk of the best target model (corollary: best source model) on the target labels.
    pub target_label: f64,
}

/// Inputs shared by all bound assemblers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParts {
    /// Disagreement risk with the best source model (standard bound) or
    /// label risk on the source (adversarial bounds).
    pub source_risk: f64,
    pub discrepancy: f64,
    pub lambda: LambdaParts,
    pub complexity_source: f64,
    pub complexity_target: f64,
    pub n_source: usize,
    pub n_target: usize,
    pub loss_bound: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}

impl BoundParts {
    fn validate(&self) -> Result<()> {
        let named = [
            ("source_risk", self.source_risk),
            ("discrepancy", self.discrepancy),
            ("lambda.source_label", self.lambda.source_label),
            ("lambda.target_pair", self.lambda.target_pair),
            ("lambda.target_label", self.lambda.target_label),
            ("complexity_source", self.complexity_source),
            ("complexity_target", self.complexity_target),
            ("loss_bound", self.loss_bound),
        ];
        for (name, v) in named {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid(format!("confidence c must lie in (0, 1), got {}", self.confidence)));
        }
        if self.n_source == 0 || self.n_target == 0 {
            return Err(Error::invalid("domain sample counts must be positive"));
        }
        Ok(())
    }

    fn concentration(&self, coef: f64, log_arg: f64, n: usize) -> f64 {
        coef * self.loss_bound * (log_arg.ln() / n as f64).sqrt()
    }
}

fn finish(bound: BoundKind, parts: &BoundParts, terms: [f64; 7]) -> BoundReport {
    let [source_risk, discrepancy, lambda_terms, complexity_source, complexity_target, concentration_source, concentration_target] =
        terms;
    BoundReport {
        bound,
        source_risk,
        discrepancy,
        lambda_terms,
        complexity_source,
        complexity_target,
        concentration_source,
        concentration_target,
        total: exact_sum(terms),
        confidence: parts.confidence,
        loss_bound: parts.loss_bound,
    }
}

/// Standard bound: `source disagreement risk + disc + lambda + 2M R_S + 2M R_T
/// + 3M sqrt(ln(1/c)/n_S) + 3M sqrt(ln(1/c)/n_T)`, with lambda the two target
/// terms. A nonzero `lambda.source_label` is rejected.
pub fn assemble_standard_bound(parts: &BoundParts) -> Result<BoundReport> {
    parts.validate()?;
    if parts.lambda.source_label != 0.0 {
        return Err(Error::invalid("the standard bound's lambda has no source term"));
    }
    Ok(lemma_terms(BoundKind::Standard, parts))
}

/// Adversarial bound: as the standard one with robust risks and a three-term lambda.
pub fn assemble_adversarial_bound(parts: &BoundParts) -> Result<BoundReport> {
    parts.validate()?;
    Ok(lemma_terms(BoundKind::Adversarial, parts))
}

fn lemma_terms(kind: BoundKind, p: &BoundParts) -> BoundReport {
    let c = 1.0 / p.confidence;
    let lambda = exact_sum([p.lambda.source_label, p.lambda.target_pair, p.lambda.target_label]);
    finish(
        kind,
        p,
        [
            p.source_risk,
            p.discrepancy,
            lambda,
            2.0 * p.loss_bound * p.complexity_source,
            2.0 * p.loss_bound * p.complexity_target,
            p.concentration(3.0, c, p.n_source),
            p.concentration(3.0, c, p.n_target),
        ],
    )
}

/// Corollary bound, `k` being 4 as stated or 3 as derived:
/// `6 source_risk + 6 lambda.source_label + k disc + 3 lambda.target_pair
/// + 3 lambda.target_label + 3 R_S + 3 R_T + 9M sqrt(ln(2/c)/n)` per domain.
pub fn assemble_corollary_bound(parts: &BoundParts, variant: CoefficientVariant) -> Result<BoundReport> {
    parts.validate()?;
    let (kind, k) = match variant {
        CoefficientVariant::Statement => (BoundKind::CorollaryStatement, 4.0),
        CoefficientVariant::Proof => (BoundKind::CorollaryProof, 3.0),
    };
    let c = 2.0 / parts.confidence;
    let lambda = exact_sum([6.0 * parts.lambda.source_label, 3.0 * parts.lambda.target_pair, 3.0 * parts.lambda.target_label]);
    Ok(finish(
        kind,
        parts,
        [
            6.0 * parts.source_risk,
            k * parts.discrepancy,
            lambda,
            3.0 * parts.complexity_source,
            3.0 * parts.complexity_target,
            parts.concentration(9.0, c, parts.n_source),
            parts.concentration(9.0, c, parts.n_target),
        ],
    ))
}
