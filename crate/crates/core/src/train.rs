//! Standard and adversarial training of linear classifiers with k-step PGD
//! and an `l_1` penalty, clean and robust accuracy, and a synthetic
//! two-domain Gaussian-mixture generator for the `l_1` sweep.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrepancy::DomainPair;
use crate::error::{Error, Result};
use crate::inner::AdversaryBudget;
use crate::linalg::{dot, exact_sum, p_norm, sign, DesignMatrix, NormOrder};

/// Fraction of each domain used for training in the sweep.
pub const TRAIN_FRACTION: f64 = 0.7;

/// `mu` values of the recorded sweep.
pub const REFERENCE_MU_GRID: [f64; 4] = [0.0, 1e-3, 1e-2, 1e-1];

/// `eps` values of the recorded sweep.
pub const REFERENCE_EPS_GRID: [f64; 4] = [0.0, 2.0 / 255.0, 4.0 / 255.0, 8.0 / 255.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginLoss {
    #[default]
    Logistic,
    Hinge,
}

impl MarginLoss {
    pub fn value(self, z: f64) -> f64 {
        match self {
            MarginLoss::Logistic => {
                if z > 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            MarginLoss::Hinge => (1.0 - z).max(0.0),
        }
    }

    /// Derivative in the margin `z`; the hinge uses 0 at the kink.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            MarginLoss::Logistic => {
                // -1 / (1 + e^z), written to avoid overflow
                if z > 0.0 {
                    let e = (-z).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + z.exp())
                }
            }
            MarginLoss::Hinge => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    #[default]
    Standard,
    Adversarial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub eps: AdversaryBudget,
    pub pgd_steps: usize,
    pub pgd_step_size: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub cosine_decay: bool,
    pub l1_mu: f64,
    pub loss: MarginLoss,
    pub fit_bias: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eps: AdversaryBudget::new(8.0 / 255.0).expect("positive"),
            pgd_steps: 7,
            pgd_step_size: 2.0 / 255.0,
            epochs: 200,
            learning_rate: 0.5,
            cosine_decay: true,
            l1_mu: 0.0,
            loss: MarginLoss::Logistic,
            fit_bias: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        AdversaryBudget::new(self.eps.eps())?;
        if !(self.pgd_step_size > 0.0) || !self.pgd_step_size.is_finite() {
            return Err(Error::invalid(format!("PGD step size must be positive, got {}", self.pgd_step_size)));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.l1_mu >= 0.0) || !self.l1_mu.is_finite() {
            return Err(Error::invalid(format!("l1 weight mu must be >= 0, got {}", self.l1_mu)));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        if self.cosine_decay && self.epochs > 0 {
            0.5 * self.learning_rate * (1.0 + (PI * epoch as f64 / self.epochs as f64).cos())
        } else {
            self.learning_rate
        }
    }
}

/// `x -> w^T x + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trained: Option<TrainingInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub config: TrainConfig,
    pub mode: TrainMode,
    /// Objective (mean loss plus penalty) before the last update.
    pub final_objective: f64,
}

impl LinearModel {
    pub fn zeros(d: usize) -> Self {
        LinearModel { w: vec![0.0; d], bias: 0.0, trained: None }
    }

    pub fn new(w: Vec<f64>, bias: f64) -> Result<Self> {
        if w.iter().chain([&bias]).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model weights".into()));
        }
        Ok(LinearModel { w, bias, trained: None })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.bias
    }

    /// `sign(score)` with `sign(0) = +1`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.score(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Loss of the closed-form worst case `delta = -eps y sign(w)`:
    /// `loss(y score(x) - eps ||w||_1)`.
    pub fn worst_case_loss(&self, x: &[f64], y: f64, eps: AdversaryBudget, loss: MarginLoss) -> f64 {
        loss.value(y * self.score(x) - eps.eps() * p_norm(&self.w, NormOrder::ONE))
    }
}

/// `k` steps of `delta <- clip(delta + alpha sign(grad_delta loss), eps)`
/// from `delta = 0`; returns `x + delta`.
pub fn pgd_attack_linear(model: &LinearModel, x: &[f64], y: f64, cfg: &TrainConfig) -> Vec<f64> {
    let e = cfg.eps.eps();
    let mut delta = vec![0.0; x.len()];
    let mut z = x.to_vec();
    for _ in 0..cfg.pgd_steps {
        let g = cfg.loss.derivative(y * model.score(&z)) * y;
        for j in 0..x.len() {
            delta[j] = (delta[j] + cfg.pgd_step_size * sign(g * model.w[j])).clamp(-e, e);
            z[j] = x[j] + delta[j];
        }
    }
    z
}

fn labels_pm1(data: &DesignMatrix) -> Result<&[f64]> {
    let y = data.require_labels()?;
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid(format!("labels must be -1 or +1, got {v}")));
    }
    Ok(y)
}

/// Full-batch subgradient descent on `mean loss + mu ||w||_1` with
/// `d|0| = 0`; adversarial mode replaces every input by its PGD example,
/// recomputed each epoch. Single-threaded and bit-reproducible.
pub fn train(model0: &LinearModel, data: &DesignMatrix, cfg: &TrainConfig, mode: TrainMode) -> Result<LinearModel> {
    cfg.validate()?;
    let y = labels_pm1(data)?;
    if model0.w.len() != data.d() {
        return Err(Error::invalid(format!("model has {} weights but data has {} features", model0.w.len(), data.d())));
    }
    let (n, d) = (data.n(), data.d());
    let mut w = model0.w.clone();
    let mut b = model0.bias;
    let mut objective = f64::NAN;
    for epoch in 0..cfg.epochs {
        let current = LinearModel { w: w.clone(), bias: b, trained: None };
        let inputs: Vec<Vec<f64>> = match mode {
            TrainMode::Standard => data.rows().map(<[f64]>::to_vec).collect(),
            TrainMode::Adversarial => data.rows().zip(y).map(|(x, &yi)| pgd_attack_linear(&current, x, yi, cfg)).collect(),
        };
        let margins: Vec<f64> = inputs.iter().zip(y).map(|(x, &yi)| yi * current.score(x)).collect();
        let mean_loss = exact_sum(margins.iter().map(|&z| cfg.loss.value(z))) / n as f64;
        objective = mean_loss + cfg.l1_mu * p_norm(&w, NormOrder::ONE);
        if !objective.is_finite() {
            return Err(Error::NonFinite(format!("training objective at epoch {epoch} is {objective}")));
        }
        let coef: Vec<f64> = margins.iter().zip(y).map(|(&z, &yi)| cfg.loss.derivative(z) * yi).collect();
        let lr = cfg.lr_at(epoch);
        let grad: Vec<f64> = (0..d)
            .map(|j| exact_sum(inputs.iter().zip(&coef).map(|(x, c)| c * x[j])) / n as f64 + cfg.l1_mu * sign(w[j]))
            .collect();
        for j in 0..d {
            w[j] -= lr * grad[j];
        }
        if cfg.fit_bias {
            b -= lr * exact_sum(coef.iter().copied()) / n as f64;
        }
        if w.iter().chain([&b]).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("weights diverged at epoch {epoch}")));
        }
    }
    Ok(LinearModel { w, bias: b, trained: Some(TrainingInfo { config: *cfg, mode, final_objective: objective }) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Clean accuracy.
    pub sa: f64,
    /// Accuracy under the exact worst case: correct iff `y score > eps ||w||_1`.
    pub ra: f64,
}

pub fn evaluate(model: &LinearModel, data: &DesignMatrix, eps: AdversaryBudget) -> Result<Evaluation> {
    let y = labels_pm1(data)?;
    if data.n() == 0 {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let r = eps.eps() * p_norm(&model.w, NormOrder::ONE);
    let n = data.n() as f64;
    let sa = data.rows().zip(y).filter(|(x, &yi)| model.predict(x) == yi).count() as f64 / n;
    let ra = data.rows().zip(y).filter(|(x, &yi)| yi * model.score(x) > r).count() as f64 / n;
    Ok(Evaluation { sa, ra })
}

/// Accuracy on PGD examples; never below the exact robust accuracy.
pub fn pgd_accuracy(model: &LinearModel, data: &DesignMatrix, cfg: &TrainConfig) -> Result<f64> {
    let y = labels_pm1(data)?;
    let ok = data.rows().zip(y).filter(|(x, &yi)| model.predict(&pgd_attack_linear(model, x, yi, cfg)) == yi).count();
    Ok(ok as f64 / data.n() as f64)
}

/// Two-class Gaussian mixtures. Source points are `y (separation / 2) e_1
/// + noise * N(0, I)`; the target draws fresh points from the same law,
/// rotates them by `rotation` in the `(x_1, x_2)` plane and adds
/// `translation`. Labels are the mixture component in both domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDomainSpec {
    pub n: usize,
    pub d: usize,
    pub separation: f64,
    pub noise: f64,
    pub rotation: f64,
    #[serde(default)]
    pub translation: Vec<f64>,
    pub seed: u64,
}

impl SyntheticDomainSpec {
    /// The reference configuration for the recorded sweep: one informative
    /// coordinate, 79 noise coordinates, and a target translated by 2 along
    /// every noise coordinate. Dense weights pick up a score offset on the
    /// target; sparse ones do not.
    pub fn reference() -> Self {
        let d = 80;
        let mut translation = vec![2.0; d];
        translation[0] = 0.0;
        SyntheticDomainSpec { n: 600, d, separation: 1.0, noise: 0.5, rotation: 0.0, translation, seed: 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d == 0 {
            return Err(Error::invalid("need n >= 2 and d >= 1"));
        }
        if !(self.noise > 0.0) || !self.noise.is_finite() {
            return Err(Error::invalid(format!("degenerate covariance: noise scale must be positive, got {}", self.noise)));
        }
        if !(0.0..PI).contains(&self.rotation) {
            return Err(Error::invalid(format!("rotation must lie in [0, pi), got {}", self.rotation)));
        }
        if self.rotation != 0.0 && self.d < 2 {
            return Err(Error::invalid("rotation needs d >= 2"));
        }
        if !self.translation.is_empty() && self.translation.len() != self.d {
            return Err(Error::invalid(format!("translation has length {} but d = {}", self.translation.len(), self.d)));
        }
        if !self.separation.is_finite() || self.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("separation and translation must be finite"));
        }
        Ok(())
    }

    /// Applies the target shift to one point.
    pub fn shift(&self, x: &mut [f64]) {
        if self.rotation != 0.0 {
            let (s, c) = self.rotation.sin_cos();
            let (a, b) = (x[0], x[1]);
            x[0] = c * a - s * b;
            x[1] = s * a + c * b;
        }
        for (v, t) in x.iter_mut().zip(&self.translation) {
            *v += t;
        }
    }
}

fn sample_domain(spec: &SyntheticDomainSpec, rng: &mut ChaCha8Rng, shifted: bool) -> Result<DesignMatrix> {
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        // balanced classes, alternating
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut x: Vec<f64> = (0..spec.d)
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                spec.noise * g
            })
            .collect();
        x[0] += y * spec.separation / 2.0;
        if shifted {
            spec.shift(&mut x);
        }
        rows.push(x);
        labels.push(y);
    }
    DesignMatrix::from_rows(&rows, Some(labels))
}

/// Deterministic per seed: the source is drawn first, then the target.
pub fn generate_domains(spec: &SyntheticDomainSpec) -> Result<DomainPair> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let source = sample_domain(spec, &mut rng, false)?;
    let target = sample_domain(spec, &mut rng, true)?;
    DomainPair::new(source, target, true)
}

/// Seeded split into `(train, test)` with `round(fraction n)` training rows.
pub fn train_test_split(data: &DesignMatrix, fraction: f64, seed: u64) -> Result<(DesignMatrix, DesignMatrix)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let mut idx: Vec<usize> = (0..data.n()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = ((fraction * data.n() as f64).round() as usize).clamp(1, data.n() - 1);
    Ok((data.subset(&idx[..k])?, data.subset(&idx[k..])?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub eps: f64,
    pub ra_source: f64,
    pub ra_target: f64,
    pub delta: f64,
    pub sa_source: f64,
    pub sa_target: f64,
    /// `||w||_1` of the trained model.
    pub w_l1: f64,
}

/// Trains one adversarial model per `(mu, eps)` on the source training
/// split (at that `eps`) and reports robust accuracy on the held-out source
/// and target splits. Cells run in parallel; each cell is sequential, so the
/// table does not depend on the thread count.
pub fn l1_sweep_experiment(
    spec: &SyntheticDomainSpec,
    mu_grid: &[f64],
    eps_grid: &[f64],
    cfg: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    if mu_grid.is_empty() || eps_grid.is_empty() {
        return Err(Error::invalid("mu and eps grids must be nonempty"));
    }
    let pair = generate_domains(spec)?;
    let (src_train, src_test) = train_test_split(&pair.source, TRAIN_FRACTION, spec.seed ^ 0x5eed)?;
    let (_, tgt_test) = train_test_split(&pair.target, TRAIN_FRACTION, spec.seed ^ 0x7a67)?;
    let cells: Vec<(f64, f64)> = mu_grid.iter().flat_map(|&m| eps_grid.iter().map(move |&e| (m, e))).collect();
    cells
        .par_iter()
        .map(|&(mu, e)| {
            let eps = AdversaryBudget::new(e)?;
            let cell_cfg = TrainConfig { eps, l1_mu: mu, ..*cfg };
            let model = train(&LinearModel::zeros(spec.d), &src_train, &cell_cfg, TrainMode::Adversarial)?;
            let s = evaluate(&model, &src_test, eps)?;
            let t = evaluate(&model, &tgt_test, eps)?;
            Ok(SweepRow {
                mu,
                eps: e,
                ra_source: s.ra,
                ra_target: t.ra,
                delta: s.ra - t.ra,
                sa_source: s.sa,
                sa_target: t.sa,
                w_l1: p_norm(&model.w, NormOrder::ONE),
            })
        })
        .collect()
}

/// CSV with columns `mu, eps, ra_source, ra_target, delta, sa_source,
/// sa_target`, fixed precision.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("mu,eps,ra_source,ra_target,delta,sa_source,sa_target\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.6e},{:.8},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.mu, r.eps, r.ra_source, r.ra_target, r.delta, r.sa_source, r.sa_target
        );
    }
    out
}
