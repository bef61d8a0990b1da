//! Robust-to-standard risk transfer on discrete domains: the subset-sum
//! quantity `V*`, the flippable index set `Λ_ε`, and the transfer
//! inequality `R_T'(w) <= R~_T(w) + V*(p', p, ell, Λ_ε)`.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner::AdversaryBudget;
use crate::linalg::{dot, exact_sum, p_norm, DesignMatrix, NormOrder};

/// Largest free set for [`vstar_bruteforce`].
pub const MAX_BRUTEFORCE_FREE: usize = 24;
/// Largest free set for [`vstar_meet_in_middle`].
pub const MAX_MITM_FREE: usize = 48;
/// Tolerance for a mass vector to count as on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;
// Approximate float sums differ from the correctly rounded ones by far less
// than this; candidates inside the band are re-evaluated exactly.
const CANDIDATE_BAND: f64 = 1e-9;

fn check_simplex(name: &str, v: &[f64]) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid(format!("{name} has a negative or non-finite entry {x}")));
    }
    let s = exact_sum(v.iter().copied());
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

/// `min over binary ell~ agreeing with ell off Λ of |p^T ell~ - p'^T ell|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceJson", into = "InstanceJson")]
pub struct SubsetSumInstance {
    p: Vec<f64>,
    p_prime: Vec<f64>,
    ell: Vec<u8>,
    free: Vec<usize>,
}

/// Wire format with 1-based `free` indices.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceJson {
    p: Vec<f64>,
    p_prime: Vec<f64>,
    ell: Vec<u8>,
    free: Vec<usize>,
}

impl TryFrom<InstanceJson> for SubsetSumInstance {
    type Error = Error;

    fn try_from(j: InstanceJson) -> Result<Self> {
        if let Some(&bad) = j.free.iter().find(|&&i| i == 0) {
            return Err(Error::invalid(format!("free indices are 1-based, got {bad}")));
        }
        SubsetSumInstance::new(j.p, j.p_prime, j.ell, j.free.iter().map(|i| i - 1).collect())
    }
}

impl From<SubsetSumInstance> for InstanceJson {
    fn from(s: SubsetSumInstance) -> Self {
        InstanceJson { p: s.p, p_prime: s.p_prime, ell: s.ell, free: s.free.iter().map(|i| i + 1).collect() }
    }
}

impl SubsetSumInstance {
    /// `free` holds 0-based indices; duplicates are rejected.
    pub fn new(p: Vec<f64>, p_prime: Vec<f64>, ell: Vec<u8>, free: Vec<usize>) -> Result<Self> {
        let n = p.len();
        if p_prime.len() != n || ell.len() != n {
            return Err(Error::invalid(format!(
                "p, p_prime and ell must have equal length, got {}, {}, {}",
                n,
                p_prime.len(),
                ell.len()
            )));
        }
        check_simplex("p", &p)?;
        check_simplex("p_prime", &p_prime)?;
        if let Some(b) = ell.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("ell entries must be 0 or 1, got {b}")));
        }
        let set: BTreeSet<usize> = free.iter().copied().collect();
        if set.len() != free.len() {
            return Err(Error::invalid("free set has duplicate indices"));
        }
        if let Some(&i) = set.iter().find(|&&i| i >= n) {
            return Err(Error::invalid(format!("free index {} out of range 1..={n}", i + 1)));
        }
        Ok(SubsetSumInstance { p, p_prime, ell, free: set.into_iter().collect() })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn p_prime(&self) -> &[f64] {
        &self.p_prime
    }

    pub fn ell(&self) -> &[u8] {
        &self.ell
    }

    /// Sorted 0-based free indices.
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Same instance with another free set.
    pub fn with_free(&self, free: Vec<usize>) -> Result<Self> {
        Self::new(self.p.clone(), self.p_prime.clone(), self.ell.clone(), free)
    }

    /// Correctly rounded `|p^T ell~ - p'^T ell|`. Both solvers rank
    /// candidates by this value, so they agree bit for bit.
    pub fn objective(&self, witness: &[u8]) -> f64 {
        let plus = self.p.iter().zip(witness).filter(|(_, &b)| b == 1).map(|(&p, _)| p);
        let minus = self.p_prime.iter().zip(&self.ell).filter(|(_, &b)| b == 1).map(|(&p, _)| -p);
        exact_sum(plus.chain(minus)).abs()
    }

    /// `|p^T ell - p'^T ell|`, the value at the feasible point `ell~ = ell`.
    pub fn unconstrained_gap(&self) -> f64 {
        self.objective(&self.ell)
    }

    fn witness_from(&self, bits: u64) -> Vec<u8> {
        let mut w = self.ell.clone();
        for (k, &i) in self.free.iter().enumerate() {
            w[i] = (bits >> k & 1) as u8;
        }
        w
    }

    /// Float target for the free part: `p'^T ell - sum over fixed i of p_i ell_i`.
    fn free_target(&self) -> f64 {
        let fixed: BTreeSet<usize> = self.free.iter().copied().collect();
        let base = (0..self.len()).filter(|i| !fixed.contains(i) && self.ell[*i] == 1).map(|i| self.p[i]);
        let target = self.p_prime.iter().zip(&self.ell).filter(|(_, &b)| b == 1).map(|(&p, _)| p);
        exact_sum(target.chain(base.map(|v| -v)))
    }

    fn half_sums(&self, idx: &[usize]) -> Vec<f64> {
        let mut sums = vec![0.0; 1 << idx.len()];
        for (k, &i) in idx.iter().enumerate() {
            let step = 1 << k;
            for m in 0..step {
                sums[m | step] = sums[m] + self.p[i];
            }
        }
        sums
    }
}

/// Optimal value and a minimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VStarSolution {
    pub optimum: f64,
    pub witness: Vec<u8>,
}

/// Picks the exact optimum among near-optimal candidates; ties go to the
/// lexicographically smallest witness.
fn settle(inst: &SubsetSumInstance, candidates: impl IntoIterator<Item = u64>) -> VStarSolution {
    candidates
        .into_iter()
        .map(|bits| {
            let witness = inst.witness_from(bits);
            VStarSolution { optimum: inst.objective(&witness), witness }
        })
        .min_by(|a, b| a.optimum.total_cmp(&b.optimum).then_with(|| a.witness.cmp(&b.witness)))
        .expect("at least one candidate")
}

/// Exhaustive search over the `2^|Λ|` completions; `|Λ| <= 24`.
pub fn vstar_bruteforce(inst: &SubsetSumInstance) -> Result<VStarSolution> {
    let k = inst.free.len();
    if k > MAX_BRUTEFORCE_FREE {
        return Err(Error::TooLarge { what: "free set", got: k, max: MAX_BRUTEFORCE_FREE });
    }
    let target = inst.free_target();
    let sums = inst.half_sums(&inst.free);
    let gap = |m: usize| (sums[m] - target).abs();
    let best = (0..sums.len()).into_par_iter().map(gap).reduce(|| f64::INFINITY, f64::min);
    let candidates: Vec<u64> = (0..sums.len()).filter(|&m| gap(m) <= best + CANDIDATE_BAND).map(|m| m as u64).collect();
    Ok(settle(inst, candidates))
}

/// Meet in the middle: split `Λ`, enumerate both halves' sums, and match
/// each left sum against the sorted right sums; `|Λ| <= 48`. Returns the
/// same optimum and witness as [`vstar_bruteforce`].
pub fn vstar_meet_in_middle(inst: &SubsetSumInstance) -> Result<VStarSolution> {
    let k = inst.free.len();
    if k > MAX_MITM_FREE {
        return Err(Error::TooLarge { what: "free set", got: k, max: MAX_MITM_FREE });
    }
    let target = inst.free_target();
    let (left, right) = inst.free.split_at(k / 2);
    let ls = inst.half_sums(left);
    let mut rs: Vec<(f64, u64)> = inst.half_sums(right).into_iter().enumerate().map(|(m, s)| (s, m as u64)).collect();
    rs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keys: Vec<f64> = rs.iter().map(|r| r.0).collect();

    let closest = |want: f64| -> f64 {
        let pos = keys.partition_point(|&v| v < want);
        let mut best = f64::INFINITY;
        for j in [pos.wrapping_sub(1), pos] {
            if let Some(&v) = keys.get(j) {
                best = best.min((v - want).abs());
            }
        }
        best
    };
    let best = ls.par_iter().map(|&a| closest(target - a)).reduce(|| f64::INFINITY, f64::min);
    let band = best + CANDIDATE_BAND;
    let shift = left.len();
    let candidates: Vec<u64> = ls
        .par_iter()
        .enumerate()
        .flat_map_iter(|(lm, &a)| {
            let want = target - a;
            let lo = keys.partition_point(|&v| v < want - band);
            let hi = keys.partition_point(|&v| v <= want + band);
            rs[lo..hi].iter().map(move |&(_, rm)| lm as u64 | rm << shift)
        })
        .collect();
    Ok(settle(inst, candidates))
}

/// `Λ_ε = {i : |w^T x_i| <= eps ||w||_1}`, the points an `l_inf`
/// adversary of radius `eps` can move onto or across the decision boundary.
pub fn lambda_eps_set(x: &DesignMatrix, w: &[f64], eps: AdversaryBudget) -> Result<Vec<usize>> {
    if w.len() != x.d() {
        return Err(Error::invalid(format!("w has length {} but data has {} features", w.len(), x.d())));
    }
    let l1 = p_norm(w, NormOrder::ONE);
    if l1 == 0.0 {
        return Err(Error::invalid("w must not be zero: the sign classifier is undefined"));
    }
    let r = eps.eps() * l1;
    Ok(x.rows().enumerate().filter(|(_, xi)| dot(w, xi).abs() <= r).map(|(i, _)| i).collect())
}

/// Finite support with two mass vectors and `+-1` labels shared by both.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDomainPair {
    support: DesignMatrix,
    mass_t: Vec<f64>,
    mass_t_prime: Vec<f64>,
}

impl DiscreteDomainPair {
    /// `support` must carry labels in `{-1, +1}`.
    pub fn new(support: DesignMatrix, mass_t: Vec<f64>, mass_t_prime: Vec<f64>) -> Result<Self> {
        let y = support.require_labels()?;
        if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::invalid(format!("labels must be -1 or +1, got {v}")));
        }
        let n = support.n();
        if mass_t.len() != n || mass_t_prime.len() != n {
            return Err(Error::invalid("mass vectors must match the support size"));
        }
        check_simplex("mass_t", &mass_t)?;
        check_simplex("mass_t_prime", &mass_t_prime)?;
        Ok(DiscreteDomainPair { support, mass_t, mass_t_prime })
    }

    pub fn support(&self) -> &DesignMatrix {
        &self.support
    }

    pub fn mass_t(&self) -> &[f64] {
        &self.mass_t
    }

    pub fn mass_t_prime(&self) -> &[f64] {
        &self.mass_t_prime
    }

    fn labels(&self) -> &[f64] {
        self.support.labels().expect("validated")
    }
}

/// Both sides of the transfer inequality for one `(w, eps)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCheck {
    pub eps: f64,
    /// Clean 0-1 risk on `T'`.
    pub lhs: f64,
    /// Robust 0-1 risk on `T`.
    pub robust_risk: f64,
    pub vstar: f64,
    pub witness: Vec<u8>,
    /// 0-based `Λ_ε`.
    pub lambda: Vec<usize>,
    pub rhs: f64,
    pub holds: bool,
}

/// Clean 0-1 losses with `sign(0) = +1`.
fn clean_losses(pair: &DiscreteDomainPair, w: &[f64]) -> Vec<u8> {
    pair.support
        .rows()
        .zip(pair.labels())
        .map(|(x, &y)| {
            let pred = if dot(w, x) >= 0.0 { 1.0 } else { -1.0 };
            u8::from(pred != y)
        })
        .collect()
}

/// Robust 0-1 losses: correct only when `y w^T x > eps ||w||_1` strictly.
fn robust_losses(pair: &DiscreteDomainPair, w: &[f64], eps: f64) -> Vec<u8> {
    let r = eps * p_norm(w, NormOrder::ONE);
    pair.support.rows().zip(pair.labels()).map(|(x, &y)| u8::from(!(y * dot(w, x) > r))).collect()
}

fn weighted(mass: &[f64], losses: &[u8]) -> f64 {
    exact_sum(mass.iter().zip(losses).filter(|(_, &l)| l == 1).map(|(&m, _)| m))
}

/// Evaluates `R_T'(w) <= R~_T(w) + V*(p', p, ell, Λ_ε)` exactly, with
/// `ell` the clean losses and `V*` from the meet-in-the-middle solver.
pub fn risk_transfer_bound(pair: &DiscreteDomainPair, w: &[f64], eps: AdversaryBudget) -> Result<TransferCheck> {
    if pair.support.n() > MAX_BRUTEFORCE_FREE {
        return Err(Error::TooLarge { what: "support size", got: pair.support.n(), max: MAX_BRUTEFORCE_FREE });
    }
    let lambda = lambda_eps_set(&pair.support, w, eps)?;
    let ell = clean_losses(pair, w);
    let robust = robust_losses(pair, w, eps.eps());
    let inst = SubsetSumInstance::new(pair.mass_t.clone(), pair.mass_t_prime.clone(), ell.clone(), lambda.clone())?;
    let sol = vstar_meet_in_middle(&inst)?;
    let lhs = weighted(&pair.mass_t_prime, &ell);
    let robust_risk = weighted(&pair.mass_t, &robust);
    let rhs = robust_risk + sol.optimum;
    Ok(TransferCheck {
        eps: eps.eps(),
        lhs,
        robust_risk,
        vstar: sol.optimum,
        witness: sol.witness,
        lambda,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}

/// The transfer bound of a robust model next to the `eps = 0` bound of
/// the same weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErmComparison {
    pub robust: TransferCheck,
    pub erm: TransferCheck,
    /// `V*(Λ_ε) <= V*(Λ_0)`.
    pub vstar_monotone: bool,
}

pub fn erm_vs_robust_comparison(pair: &DiscreteDomainPair, w: &[f64], eps: AdversaryBudget) -> Result<ErmComparison> {
    let robust = risk_transfer_bound(pair, w, eps)?;
    let erm = risk_transfer_bound(pair, w, AdversaryBudget::ZERO)?;
    let vstar_monotone = robust.vstar <= erm.vstar;
    Ok(ErmComparison { robust, erm, vstar_monotone })
}
