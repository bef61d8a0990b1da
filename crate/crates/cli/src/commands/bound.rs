use advhdh::discrepancy::{
    assemble_adversarial_bound, assemble_corollary_bound, assemble_standard_bound, estimate_adv_disc_from_std,
    hdh_discrepancy_regression, DEFAULT_CONFIDENCE,
};
use advhdh::rademacher::{
    adv_upper_classification, adv_upper_regression, std_upper_bernstein_classification, std_upper_bernstein_regression,
    ConstantMode,
};
use advhdh::report::bound_table;
use advhdh::{
    AdversaryBudget, BoundParts, CoefficientVariant, DesignMatrix, HypothesisClass, HypothesisKind, LambdaParts, LossSpec,
    NormOrder,
};
use serde_json::json;

use crate::args::{BoundArg, BoundArgs, ClassArg};
use crate::commands::complexity::hypothesis;
use crate::error::CliError;
use crate::output::{load_csv, Ctx};

/// Computes a part from the source and target samples.
type Compute<'a> = &'a dyn Fn(&DesignMatrix, &DesignMatrix) -> Result<f64, CliError>;

/// Complexity upper bound of one sample: Bernstein, plus the adversarial
/// gap when the bound is adversarial.
fn complexity(x: &DesignMatrix, h: &HypothesisClass, eps: AdversaryBudget, adversarial: bool) -> Result<f64, CliError> {
    let (std, gap) = match h.kind {
        HypothesisKind::LinearRegression => {
            (std_upper_bernstein_regression(x, h)?, adv_upper_regression(x, h, eps, ConstantMode::Appendix)?)
        }
        HypothesisKind::LinearClassification => {
            (std_upper_bernstein_classification(x, h)?, adv_upper_classification(x, h, eps, ConstantMode::Appendix)?)
        }
        HypothesisKind::TwoLayerRelu => return Err(CliError::usage("bound computes complexities for linear classes only")),
    };
    Ok(if adversarial { std.value + gap.value } else { std.value })
}

pub fn run(ctx: &Ctx, a: BoundArgs) -> Result<(), CliError> {
    let kind = a.kind.unwrap_or(BoundArg::Adversarial);
    let adversarial = kind != BoundArg::Standard;
    let variant = if kind == BoundArg::CorollaryProof { CoefficientVariant::Proof } else { CoefficientVariant::Statement };
    let eps = AdversaryBudget::new(a.eps.unwrap_or(0.0))?;
    let data = match (&a.source, &a.target) {
        (Some(s), Some(t)) => Some((load_csv(s)?, load_csv(t)?)),
        (None, None) => None,
        _ => return Err(CliError::usage("--source and --target must be given together")),
    };
    let class = a.class.unwrap_or(ClassArg::LinearRegression);
    let h = hypothesis(class, a.p.unwrap_or(NormOrder::TWO), a.w.unwrap_or(1.0), 1.0, 1)?;
    let mut computed = Vec::new();

    let need = |name: &str| CliError::usage(format!("--{name} is required without --source/--target data"));
    let (n_source, n_target) = match (&data, a.n_source, a.n_target) {
        (_, Some(s), Some(t)) => (s, t),
        (Some((s, t)), ns, nt) => (ns.unwrap_or(s.n()), nt.unwrap_or(t.n())),
        (None, None, _) => return Err(need("n-source")),
        (None, _, None) => return Err(need("n-target")),
    };
    let mut pick = |given: Option<f64>, name: &'static str, f: Compute| match (given, &data) {
        (Some(v), _) => Ok(v),
        (None, Some((s, t))) => {
            computed.push(name);
            f(s, t)
        }
        (None, None) => Ok(0.0),
    };
    let complexity_source = pick(a.complexity_source, "complexity_source", &|s, _| complexity(s, &h, eps, adversarial))?;
    let complexity_target = pick(a.complexity_target, "complexity_target", &|_, t| complexity(t, &h, eps, adversarial))?;
    let discrepancy = pick(a.discrepancy, "discrepancy", &|s, t| {
        if h.kind != HypothesisKind::LinearRegression {
            return Err(CliError::usage("the discrepancy is computed for linear regression only; pass --discrepancy"));
        }
        let std = hdh_discrepancy_regression(s, t, &h)?;
        let slack = if adversarial { estimate_adv_disc_from_std(s, t, &h, eps, LossSpec::squared(), variant)? } else { 0.0 };
        Ok(std + slack)
    })?;

    let parts = BoundParts {
        source_risk: a.source_risk.unwrap_or(0.0),
        discrepancy,
        lambda: LambdaParts {
            source_label: a.lambda_source_label.unwrap_or(0.0),
            target_pair: a.lambda_target_pair.unwrap_or(0.0),
            target_label: a.lambda_target_label.unwrap_or(0.0),
        },
        complexity_source,
        complexity_target,
        n_source,
        n_target,
        loss_bound: a.loss_bound.unwrap_or(1.0),
        confidence: a.confidence.unwrap_or(DEFAULT_CONFIDENCE),
    };
    let report = match kind {
        BoundArg::Standard => assemble_standard_bound(&parts)?,
        BoundArg::Adversarial => assemble_adversarial_bound(&parts)?,
        BoundArg::CorollaryStatement | BoundArg::CorollaryProof => assemble_corollary_bound(&parts, variant)?,
    };
    print!("{}", bound_table(&report));
    let mut doc = json!({
        "command": "bound",
        "parts": parts,
        "report": report,
        "computed": computed,
    });
    if data.is_some() {
        doc["class"] = json!(h);
        doc["eps"] = json!(eps.eps());
    }
    let out = ctx.write_json("bound.json", doc)?;
    println!("wrote {}", out.display());
    Ok(())
}
