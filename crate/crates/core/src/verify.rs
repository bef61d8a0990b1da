//! Seeded verification batteries.
//!
//! Each battery draws its instances from a per-instance seed derived from a
//! base seed, evaluates a list of `value <= limit` checks, and records every
//! failing check together with the instance and its seed. [`replay`]
//! regenerates one instance from that seed alone.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::discrepancy::{
    estimate_adv_disc_from_std, hdh_discrepancy_bruteforce, hdh_discrepancy_regression, BruteForceGrid, CoefficientVariant,
};
use crate::error::{Error, Result};
use crate::inner::{grid_oracle, max_shifted_square, min_shifted_square, AdversaryBudget, Sense, DEFAULT_GRID_POINTS};
use crate::linalg::{dot, p_norm, DesignMatrix, NormOrder};
use crate::rademacher::{
    adv_complexity_classification_exact_small, adv_complexity_regression_exact_small, adv_upper_classification,
    adv_upper_regression, nn_adv_upper, relu_complexity_witness, std_complexity_classification, std_complexity_regression,
    std_upper_bernstein_classification, std_upper_bernstein_regression, zero_one_adv_vs_std_check, ConstantMode, HypothesisClass,
    LossSpec, Sampling, REGRESSION_GRID_TOLERANCE,
};
use crate::train::{pgd_attack_linear, LinearModel, TrainConfig};
use crate::transfer::{erm_vs_robust_comparison, vstar_bruteforce, vstar_meet_in_middle, DiscreteDomainPair, SubsetSumInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Battery {
    /// Closed-form shifted squares against the 201-per-axis grid.
    InnerSolvers,
    /// Adversarial complexity at least the standard one (regression, 0-1).
    LowerBounds,
    /// Exact or estimated values below their upper bounds.
    UpperDominance,
    /// Fixed reference values.
    SpotValues,
    /// Brute force and meet-in-the-middle agree; `V*` shrinks as `Λ` grows.
    SubsetSum,
    /// The robust-to-standard risk transfer inequality.
    Transfer,
    /// PGD reaches the closed-form worst case.
    Pgd,
    /// Adversarial discrepancy within the slack of the standard one.
    Discrepancy,
}

impl Battery {
    pub const ALL: [Battery; 8] = [
        Battery::InnerSolvers,
        Battery::LowerBounds,
        Battery::UpperDominance,
        Battery::SpotValues,
        Battery::SubsetSum,
        Battery::Transfer,
        Battery::Pgd,
        Battery::Discrepancy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Battery::InnerSolvers => "inner-solvers",
            Battery::LowerBounds => "lower-bounds",
            Battery::UpperDominance => "upper-dominance",
            Battery::SpotValues => "spot-values",
            Battery::SubsetSum => "subset-sum",
            Battery::Transfer => "transfer",
            Battery::Pgd => "pgd",
            Battery::Discrepancy => "discrepancy",
        }
    }

    pub fn default_instances(self) -> usize {
        match self {
            Battery::InnerSolvers => 500,
            Battery::LowerBounds => 50,
            Battery::UpperDominance => 100,
            Battery::SpotValues => 1,
            Battery::SubsetSum => 500,
            Battery::Transfer => 200,
            Battery::Pgd => 100,
            Battery::Discrepancy => 50,
        }
    }

    fn tag(self) -> u64 {
        Battery::ALL.iter().position(|&b| b == self).expect("listed") as u64 + 1
    }
}

impl fmt::Display for Battery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Battery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Battery::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Battery::ALL.iter().map(|b| b.name()).collect();
            Error::invalid(format!("unknown battery {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// One `value <= limit` comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub holds: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, holds: value <= limit }
    }

    /// `|value - target| <= tol`, stored as distance against tolerance.
    pub fn close(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Check::le(name, (value - target).abs(), tol)
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check { name: name.into(), value: if ok { 0.0 } else { 1.0 }, limit: 0.0, holds: ok }
    }
}

/// A generated instance and the checks evaluated on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub battery: Battery,
    pub seed: u64,
    pub instance: Value,
    pub checks: Vec<Check>,
}

impl InstanceOutcome {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryOutcome {
    pub battery: Battery,
    pub base_seed: u64,
    pub instances: usize,
    pub checks: usize,
    /// How often each named check was evaluated; conditional checks may
    /// run on fewer instances than the battery has.
    pub check_counts: BTreeMap<String, usize>,
    /// Failing instances, with only their failing checks.
    pub violations: Vec<InstanceOutcome>,
}

impl BatteryOutcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Seed of instance `index`; splitmix64 of the base, battery and index.
pub fn instance_seed(base: u64, battery: Battery, index: usize) -> u64 {
    let mut z = base ^ battery.tag().wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Regenerates and rechecks one instance.
pub fn replay(battery: Battery, seed: u64) -> Result<InstanceOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (instance, checks) = match battery {
        Battery::InnerSolvers => inner_solvers(&mut rng)?,
        Battery::LowerBounds => lower_bounds(&mut rng)?,
        Battery::UpperDominance => upper_dominance(&mut rng)?,
        Battery::SpotValues => spot_values()?,
        Battery::SubsetSum => subset_sum(&mut rng)?,
        Battery::Transfer => transfer(&mut rng)?,
        Battery::Pgd => pgd(&mut rng)?,
        Battery::Discrepancy => discrepancy(&mut rng)?,
    };
    Ok(InstanceOutcome { battery, seed, instance, checks })
}

/// Runs `instances` (default per battery) instances in parallel; the
/// outcome is independent of the thread count.
pub fn run_battery(battery: Battery, base_seed: u64, instances: Option<usize>) -> Result<BatteryOutcome> {
    let count = instances.unwrap_or_else(|| battery.default_instances());
    let outcomes: Vec<InstanceOutcome> =
        (0..count).into_par_iter().map(|i| replay(battery, instance_seed(base_seed, battery, i))).collect::<Result<_>>()?;
    let checks = outcomes.iter().map(|o| o.checks.len()).sum();
    let mut check_counts = BTreeMap::new();
    for c in outcomes.iter().flat_map(|o| &o.checks) {
        *check_counts.entry(c.name.clone()).or_insert(0) += 1;
    }
    let violations = outcomes
        .into_iter()
        .filter(|o| !o.holds())
        .map(|mut o| {
            o.checks.retain(|c| !c.holds);
            o
        })
        .collect();
    Ok(BatteryOutcome { battery, base_seed, instances: count, checks, check_counts, violations })
}

fn uniform_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<DesignMatrix> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    DesignMatrix::from_rows(&rows, None)
}

fn rows_json(x: &DesignMatrix) -> Value {
    json!(x.rows().map(<[f64]>::to_vec).collect::<Vec<_>>())
}

fn budget(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Result<AdversaryBudget> {
    AdversaryBudget::new(rng.random_range(lo..hi))
}

type Checked = (Value, Vec<Check>);

/// Hypothesis directions for the 0-1 comparison; coarser grids miss thin
/// adversarial disagreement wedges and understate the adversarial value.
const ZERO_ONE_DIRECTIONS: usize = 1440;

/// Weight radius of the 0-1 class, large enough that the margin assumption
/// reduces to a condition on directions.
const ZERO_ONE_RADIUS: f64 = 1e3;

fn inner_solvers(rng: &mut ChaCha8Rng) -> Result<Checked> {
    let d = rng.random_range(1..=3);
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = rng.random_range(-2.0..2.0);
    let eps = budget(rng, 0.01, 1.0)?;
    let f = |delta: &[f64]| (dot(&w, delta) + a).powi(2);
    let hi = max_shifted_square(&w, a, eps);
    let lo = min_shifted_square(&w, a, eps);
    let grid_hi = grid_oracle(f, d, eps, DEFAULT_GRID_POINTS, Sense::Maximize)?;
    let grid_lo = grid_oracle(f, d, eps, DEFAULT_GRID_POINTS, Sense::Minimize)?;
    let feasible = |v: &[f64]| p_norm(v, NormOrder::INF) <= eps.eps() * (1.0 + 1e-12);
    let checks = vec![
        Check::le("grid max over closed-form max", grid_hi.optimum - hi.optimum, 1e-9),
        Check::le("closed-form min over grid min", lo.optimum - grid_lo.optimum, 1e-9),
        Check::flag("max argpoint feasible", feasible(&hi.argpoint)),
        Check::flag("min argpoint feasible", feasible(&lo.argpoint)),
        Check::close("max argpoint attains", f(&hi.argpoint), hi.optimum, 1e-12),
        Check::close("min argpoint attains", f(&lo.argpoint), lo.optimum, 1e-12),
    ];
    Ok((json!({ "w": w, "a": a, "eps": eps.eps() }), checks))
}

/// `p` in `[1, 2]`, with the endpoints drawn a third of the time each.
fn small_p(rng: &mut ChaCha8Rng) -> Result<NormOrder> {
    match rng.random_range(0..3) {
        0 => Ok(NormOrder::ONE),
        1 => Ok(NormOrder::TWO),
        _ => NormOrder::new(rng.random_range(1.0..2.0)),
    }
}

fn lower_bounds(rng: &mut ChaCha8Rng) -> Result<Checked> {
    let n = rng.random_range(2..=10);
    let d = rng.random_range(1..=2);
    let x = uniform_matrix(rng, n, d)?;
    let p = small_p(rng)?;
    let w = rng.random_range(0.5..2.0);
    let eps = budget(rng, 0.01, 0.5)?;
    let reg = HypothesisClass::linear_regression(p, w)?;
    // Sign classifiers are scale free; W only enters the margin assumption.
    let cls = HypothesisClass::linear_classification(p, ZERO_ONE_RADIUS)?;
    let adv = adv_complexity_regression_exact_small(&x, &reg, eps, None)?.value;
    // Same grid at eps = 0; for p = 2 the exact value is also available.
    let std_grid = adv_complexity_regression_exact_small(&x, &reg, AdversaryBudget::ZERO, None)?.value;
    let mut checks =
        vec![Check::le("regression std (grid) minus adv", std_grid - adv, REGRESSION_GRID_TOLERANCE * (1.0 + std_grid))];
    if p == NormOrder::TWO {
        let std = std_complexity_regression(&x, &reg, Sampling::Exact)?.lower().value;
        checks.push(Check::le("regression std (exact) minus adv", std - adv, REGRESSION_GRID_TOLERANCE * (1.0 + std)));
    }
    // The 0-1 ordering is only claimed under the margin assumption.
    let z = zero_one_adv_vs_std_check(&x, &cls, eps, ZERO_ONE_DIRECTIONS)?;
    if z.margin_assumption {
        checks.push(Check::le("0-1 std minus adv", z.std - z.adv, z.slack));
    }
    let instance = json!({
        "x": rows_json(&x),
        "p": p.value(),
        "W": w,
        "eps": eps.eps(),
        "margin_assumption": z.margin_assumption,
    });
    Ok((instance, checks))
}

fn upper_dominance(rng: &mut ChaCha8Rng) -> Result<Checked> {
    let n = rng.random_range(1..=8);
    let d = rng.random_range(1..=3);
    let x = uniform_matrix(rng, n, d)?;
    let p = [NormOrder::ONE, NormOrder::TWO, NormOrder::INF][rng.random_range(0..3)];
    let w = rng.random_range(0.5..2.0);
    let eps = budget(rng, 0.0, 0.3)?;
    let mc_seed = rng.random::<u64>();
    let tol = |v: f64| 1e-12 * (1.0 + v.abs());
    let mut checks = Vec::new();

    let cls = HypothesisClass::linear_classification(p, w)?;
    let reg = HypothesisClass::linear_regression(p, w)?;
    let std_cls = std_complexity_classification(&x, &cls, Sampling::Exact)?.upper().value;
    let std_reg = std_complexity_regression(&x, &reg, Sampling::Exact)?.upper().value;
    let bern_cls = std_upper_bernstein_classification(&x, &cls)?.value;
    let bern_reg = std_upper_bernstein_regression(&x, &reg)?.value;
    checks.push(Check::le("classification std exact over Bernstein", std_cls, bern_cls + tol(bern_cls)));
    checks.push(Check::le("regression std exact over Bernstein", std_reg, bern_reg + tol(bern_reg)));
    let mc = std_complexity_classification(&x, &cls, Sampling::monte_carlo(2000, mc_seed))?.upper();
    checks.push(Check::le("classification std MC over Bernstein", mc.value - 4.0 * mc.stderr, bern_cls + tol(bern_cls)));

    // Adversarial dominance chains at p = 2, where the standard values are exact.
    let cls2 = HypothesisClass::linear_classification(NormOrder::TWO, w)?;
    let reg2 = HypothesisClass::linear_regression(NormOrder::TWO, w)?;
    let std_reg2 = std_complexity_regression(&x, &reg2, Sampling::Exact)?.lower().value;
    let gap_reg = adv_upper_regression(&x, &reg2, eps, ConstantMode::Appendix)?.value;
    let adv_reg = adv_complexity_regression_exact_small(&x, &reg2, eps, None)?.value;
    checks.push(Check::le("regression adv over std plus gap", adv_reg, std_reg2 + gap_reg + tol(std_reg2 + gap_reg)));
    if d <= 2 && n <= 6 {
        let std_cls2 = std_complexity_classification(&x, &cls2, Sampling::Exact)?.lower().value;
        let gap_cls = adv_upper_classification(&x, &cls2, eps, ConstantMode::Appendix)?.value;
        let adv_cls = adv_complexity_classification_exact_small(&x, &cls2, eps, Some(48))?.value;
        checks.push(Check::le("classification adv over std plus gap", adv_cls, std_cls2 + gap_cls + tol(std_cls2 + gap_cls)));
    }

    let relu = HypothesisClass::two_layer_relu(p, w, 1.0, 2)?;
    let q = p.dual();
    let upper0 = nn_adv_upper(&x, &relu, AdversaryBudget::ZERO, q)?.value;
    let upper = nn_adv_upper(&x, &relu, eps, q)?.value;
    let witness = relu_complexity_witness(&x, &relu, 200, mc_seed)?.value;
    checks.push(Check::le("relu eps-free bound over eps bound", upper0, upper));
    checks.push(Check::le("relu witness over eps-free bound", witness, upper0 + tol(upper0)));

    Ok((json!({ "x": rows_json(&x), "p": p.value(), "W": w, "eps": eps.eps(), "mc_seed": mc_seed }), checks))
}

fn spot_values() -> Result<Checked> {
    let x = DesignMatrix::from_rows(&[vec![1.0, 0.0]], None)?;
    let h = HypothesisClass::linear_classification(NormOrder::TWO, 1.0)?;
    let bern = std_upper_bernstein_classification(&x, &h)?.value;
    let inst = SubsetSumInstance::new(vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5], vec![1, 0, 0], vec![1, 2])?;
    let brute = vstar_bruteforce(&inst)?;
    let mitm = vstar_meet_in_middle(&inst)?;
    let checks = vec![
        Check::close("Bernstein classification, unit sample", bern, 2.127207, 1e-5),
        Check::close("V* brute force", brute.optimum, 0.3, 0.0),
        Check::close("V* meet in the middle", mitm.optimum, 0.3, 0.0),
    ];
    Ok((json!({ "bernstein": bern, "vstar": brute.optimum, "witness": brute.witness }), checks))
}

fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).filter(|_| rng.random_bool(0.5)).collect()
}

fn subset_sum(rng: &mut ChaCha8Rng) -> Result<Checked> {
    let n = rng.random_range(1..=20);
    let p = simplex(rng, n);
    let pp = simplex(rng, n);
    let ell: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let free = random_subset(rng, n);
    let wider: Vec<usize> = (0..n).filter(|i| free.contains(i) || rng.random_bool(0.5)).collect();
    let inst = SubsetSumInstance::new(p, pp, ell, free)?;
    let brute = vstar_bruteforce(&inst)?;
    let mitm = vstar_meet_in_middle(&inst)?;
    let wide = vstar_meet_in_middle(&inst.with_free(wider.clone())?)?;
    let checks = vec![
        Check::flag("optimum bit-equal", brute.optimum.to_bits() == mitm.optimum.to_bits()),
        Check::flag("witness equal", brute.witness == mitm.witness),
        Check::le("V* on the wider set over V*", wide.optimum, brute.optimum),
    ];
    let mut instance = serde_json::to_value(&inst)?;
    instance["wider_free"] = json!(wider.iter().map(|i| i + 1).collect::<Vec<_>>());
    Ok((instance, checks))
}

fn transfer(rng: &mut ChaCha8Rng) -> Result<Checked> {
    let n = rng.random_range(1..=10);
    let d = rng.random_range(1..=3);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let support = DesignMatrix::from_rows(&rows, Some(labels))?;
    let pair = DiscreteDomainPair::new(support, simplex(rng, n), simplex(rng, n))?;
    let mut w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    if w.iter().all(|&v| v == 0.0) {
        w[0] = 1.0;
    }
    let eps = budget(rng, 0.0, 0.5)?;
    let cmp = erm_vs_robust_comparison(&pair, &w, eps)?;
    let checks = vec![
        Check::le("robust transfer: lhs over rhs", cmp.robust.lhs, cmp.robust.rhs + 1e-12),
        Check::le("eps = 0 transfer: lhs over rhs", cmp.erm.lhs, cmp.erm.rhs + 1e-12),
        Check::le("V*(Λ_ε) over V*(Λ_0)", cmp.robust.vstar, cmp.erm.vstar),
    ];
    let instance = json!({
        "support": rows,
        "labels": pair.support().labels(),
        "mass_t": pair.mass_t(),
        "mass_t_prime": pair.mass_t_prime(),
        "w": w,
        "eps": eps.eps(),
    });
    Ok((instance, checks))
}

fn pgd(rng: &mut ChaCha8Rng) -> Result<Checked> {
    let d = rng.random_range(1..=10);
    let w: Vec<f64> = (0..d).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(-2.0..2.0) }).collect();
    let bias = rng.random_range(-1.0..1.0);
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let model = LinearModel::new(w.clone(), bias)?;
    let cfg = TrainConfig::default();
    let z = pgd_attack_linear(&model, &x, y, &cfg);
    let got = cfg.loss.value(y * model.score(&z));
    let want = model.worst_case_loss(&x, y, cfg.eps, cfg.loss);
    let checks = vec![
        Check::close("PGD loss against closed form", got, want, 1e-9),
        Check::le(
            "PGD step size",
            p_norm(&x.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>(), NormOrder::INF),
            cfg.eps.eps(),
        ),
    ];
    Ok((json!({ "w": w, "bias": bias, "x": x, "y": y }), checks))
}

fn discrepancy(rng: &mut ChaCha8Rng) -> Result<Checked> {
    let d = rng.random_range(1..=2);
    let ns = rng.random_range(1..=4);
    let nt = rng.random_range(1..=4);
    let s = uniform_matrix(rng, ns, d)?;
    let t = uniform_matrix(rng, nt, d)?;
    let w = rng.random_range(0.5..2.0);
    let eps = budget(rng, 0.01, 0.3)?;
    let h = HypothesisClass::linear_regression(NormOrder::TWO, w)?;
    let loss = LossSpec::squared();
    // Exact closed form for the standard value; the adversarial one is a
    // grid lower estimate, so a grid tolerance covers only rounding.
    let std = hdh_discrepancy_regression(&s, &t, &h)?;
    let adv = hdh_discrepancy_bruteforce(&s, &t, &h, loss, Some(eps), BruteForceGrid::default())?;
    let tol = REGRESSION_GRID_TOLERANCE * (1.0 + std);
    let mut checks = Vec::new();
    for (label, variant) in [("statement", CoefficientVariant::Statement), ("proof", CoefficientVariant::Proof)] {
        let slack = estimate_adv_disc_from_std(&s, &t, &h, eps, loss, variant)?;
        checks.push(Check::le(format!("adv discrepancy over std plus {label} slack"), adv, std + slack + tol));
    }
    Ok((json!({ "source": rows_json(&s), "target": rows_json(&t), "W": w, "eps": eps.eps() }), checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for b in Battery::ALL {
            assert_eq!(b.name().parse::<Battery>().unwrap(), b);
        }
        assert!("nope".parse::<Battery>().is_err());
    }

    #[test]
    fn seeds_differ_across_batteries_and_indices() {
        let a = instance_seed(1, Battery::Pgd, 0);
        assert_ne!(a, instance_seed(1, Battery::Pgd, 1));
        assert_ne!(a, instance_seed(1, Battery::Transfer, 0));
        assert_ne!(a, instance_seed(2, Battery::Pgd, 0));
    }

    #[test]
    fn replay_is_deterministic() {
        let s = instance_seed(3, Battery::Transfer, 5);
        assert_eq!(replay(Battery::Transfer, s).unwrap(), replay(Battery::Transfer, s).unwrap());
    }

    #[test]
    fn small_batteries_pass() {
        for b in [Battery::Pgd, Battery::SpotValues, Battery::SubsetSum, Battery::Transfer] {
            let out = run_battery(b, 11, Some(20)).unwrap();
            assert!(out.passed(), "{b}: {:?}", out.violations);
        }
    }
}
