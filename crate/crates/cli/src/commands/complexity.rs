use advhdh::rademacher::{
    adv_complexity_classification_exact_small, adv_complexity_regression_exact_small, adv_lower_gap_classification,
    adv_upper_classification, adv_upper_regression, nn_adv_upper, relu_complexity_witness, std_complexity_classification,
    std_complexity_regression, std_upper_bernstein_classification, std_upper_bernstein_regression, ConstantMode,
    CLASSIFICATION_THEOREM_C, DEFAULT_MC_SAMPLES, DEFAULT_RELU_PAIRS, MAX_EXACT_N, REGRESSION_GRID_TOLERANCE,
    REGRESSION_THEOREM_C,
};
use advhdh::verify::Check;
use advhdh::{
    AdversaryBudget, Complexity, DesignMatrix, EstimateReport, HypothesisClass, NormOrder, RademacherEstimate, Sampling,
};
use serde_json::{json, Value};

use crate::args::{ClassArg, ComplexityArgs, ConstantsArg, MethodArg};
use crate::error::CliError;
use crate::output::{load_csv, Ctx};

/// Largest dimension the exact adversarial search accepts, per class.
const EXACT_ADV_MAX_D_CLASSIFICATION: usize = 2;
const EXACT_ADV_MAX_D_REGRESSION: usize = 3;

fn rel(v: f64) -> f64 {
    1e-12 * (1.0 + v.abs())
}

pub fn hypothesis(class: ClassArg, p: NormOrder, w: f64, a: f64, m: usize) -> advhdh::Result<HypothesisClass> {
    match class {
        ClassArg::LinearClassification => HypothesisClass::linear_classification(p, w),
        ClassArg::LinearRegression => HypothesisClass::linear_regression(p, w),
        ClassArg::TwoLayerRelu => HypothesisClass::two_layer_relu(p, w, a, m),
    }
}

/// Collected estimates; names double as the `quantity` field.
struct Table {
    params: Value,
    rows: Vec<EstimateReport>,
}

impl Table {
    fn push(&mut self, name: &str, e: &RademacherEstimate) {
        self.rows.push(EstimateReport::new(name, e, self.params.clone()));
    }

    fn push_complexity(&mut self, name: &str, c: &Complexity) {
        match c {
            Complexity::Value(e) => self.push(name, e),
            Complexity::Bracket { lower, upper } => {
                self.push(&format!("{name}-lower"), lower);
                self.push(&format!("{name}-upper"), upper);
            }
        }
    }
}

pub fn run(ctx: &Ctx, a: ComplexityArgs) -> Result<(), CliError> {
    let path = a.data.ok_or_else(|| CliError::usage("complexity needs --data"))?;
    let x = load_csv(&path)?;
    let class = a.class.unwrap_or(ClassArg::LinearClassification);
    let h = hypothesis(class, a.p.unwrap_or(NormOrder::TWO), a.w.unwrap_or(1.0), a.a.unwrap_or(1.0), a.m.unwrap_or(1))?;
    let eps = AdversaryBudget::new(a.eps.unwrap_or(0.0))?;
    let method = a.method.unwrap_or(MethodArg::All);
    let mode = match a.constants.unwrap_or(ConstantsArg::Appendix) {
        ConstantsArg::Appendix => ConstantMode::Appendix,
        ConstantsArg::Theorem => ConstantMode::Theorem {
            c: a.c.unwrap_or(if class == ClassArg::LinearRegression { REGRESSION_THEOREM_C } else { CLASSIFICATION_THEOREM_C }),
        },
    };
    let enumerate = match method {
        MethodArg::Exact => true,
        MethodArg::All => x.n() <= MAX_EXACT_N,
        MethodArg::Mc | MethodArg::Bounds => false,
    };
    let estimate = enumerate || matches!(method, MethodArg::Mc | MethodArg::All);
    let bounds = matches!(method, MethodArg::Bounds | MethodArg::All);
    let mc = Sampling::monte_carlo(a.samples.unwrap_or(DEFAULT_MC_SAMPLES), ctx.seed);
    let sampling = if enumerate { Sampling::Exact } else { mc };

    let mut t = Table { params: json!({ "eps": eps.eps() }), rows: Vec::new() };
    let mut checks = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let zero = eps.eps() == 0.0;

    match class {
        ClassArg::LinearClassification | ClassArg::LinearRegression => {
            let regression = class == ClassArg::LinearRegression;
            let std = if !estimate {
                None
            } else if regression {
                Some(std_complexity_regression(&x, &h, sampling)?)
            } else {
                Some(std_complexity_classification(&x, &h, sampling)?)
            };
            if let Some(s) = &std {
                t.push_complexity("std", s);
            }
            // At eps = 0 the adversarial class is the standard one.
            let max_d = if regression { EXACT_ADV_MAX_D_REGRESSION } else { EXACT_ADV_MAX_D_CLASSIFICATION };
            let adv = match &std {
                Some(s) if zero => {
                    t.push_complexity("adv", s);
                    Some(s.lower())
                }
                Some(_) if enumerate && x.d() <= max_d => {
                    let e = if regression {
                        adv_complexity_regression_exact_small(&x, &h, eps, a.directions)?
                    } else {
                        adv_complexity_classification_exact_small(&x, &h, eps, a.directions)?
                    };
                    t.push("adv", &e);
                    Some(e)
                }
                Some(_) => {
                    notes.push(format!("adv: the exact search needs n <= {MAX_EXACT_N} and d <= {max_d}"));
                    None
                }
                None => None,
            };
            if bounds {
                let (bern, gap) = if regression {
                    (std_upper_bernstein_regression(&x, &h)?, adv_upper_regression(&x, &h, eps, mode)?)
                } else {
                    (std_upper_bernstein_classification(&x, &h)?, adv_upper_classification(&x, &h, eps, mode)?)
                };
                let upper = RademacherEstimate::analytic(bern.value + gap.value);
                t.push("std-upper-bernstein", &bern);
                t.push("adv-gap-bound", &gap);
                t.push("adv-upper-bound", &upper);
                if !regression {
                    let lower_sampling = if x.n() <= MAX_EXACT_N { Sampling::Exact } else { mc };
                    let g = adv_lower_gap_classification(&x, &h, lower_sampling)?;
                    let mut e = RademacherEstimate::analytic(g.clamped);
                    e.stderr = g.stderr;
                    e.method = g.method;
                    e.samples = g.samples;
                    t.push("adv-lower-gap", &e);
                }
                if let Some(s) = &std {
                    let lo = s.lower();
                    checks.push(Check::le("std below Bernstein bound", lo.value - 4.0 * lo.stderr, bern.value + rel(bern.value)));
                }
                if let Some(e) = &adv {
                    checks.push(Check::le(
                        "adv below std bound plus gap",
                        e.value - 4.0 * e.stderr,
                        upper.value + rel(upper.value),
                    ));
                }
            }
            if let (true, Some(s), Some(e)) = (regression && h.p.value() <= 2.0, &std, &adv) {
                let lo = s.lower();
                checks.push(Check::le(
                    "std minus adv within grid tolerance",
                    lo.value - 4.0 * lo.stderr - e.value,
                    REGRESSION_GRID_TOLERANCE * (1.0 + lo.value),
                ));
            }
        }
        ClassArg::TwoLayerRelu => {
            let witness = if estimate && x.n() <= MAX_EXACT_N {
                let w = relu_complexity_witness(&x, &h, a.pairs.unwrap_or(DEFAULT_RELU_PAIRS), ctx.seed)?;
                t.push("std-witness-lower", &w);
                if zero {
                    t.push("adv-witness-lower", &w);
                }
                Some(w)
            } else {
                if estimate {
                    notes.push(format!("std: the ReLU witness needs n <= {MAX_EXACT_N}"));
                }
                None
            };
            if bounds {
                let q = h.p.dual();
                let std_upper = nn_adv_upper(&x, &h, AdversaryBudget::ZERO, q)?;
                let adv_upper = nn_adv_upper(&x, &h, eps, q)?;
                t.push("std-upper-bound", &std_upper);
                t.push("adv-upper-bound", &adv_upper);
                checks.push(Check::le("std upper below adv upper", std_upper.value, adv_upper.value + rel(adv_upper.value)));
                if let Some(w) = &witness {
                    checks.push(Check::le("witness below std upper", w.value, std_upper.value + rel(std_upper.value)));
                }
            }
        }
    }

    let report = json!({
        "command": "complexity",
        "data": { "path": path.display().to_string(), "n": x.n(), "d": x.d() },
        "class": h,
        "eps": eps.eps(),
        "method": method_name(method),
        "seed": ctx.seed,
        "estimates": t.rows,
        "checks": checks,
        "notes": notes,
    });
    let out = ctx.write_json("complexity.json", report)?;
    summarize(&x, &t.rows, &checks);
    println!("wrote {}", out.display());
    Ok(())
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Exact => "exact",
        MethodArg::Mc => "mc",
        MethodArg::Bounds => "bounds",
        MethodArg::All => "all",
    }
}

fn summarize(x: &DesignMatrix, rows: &[EstimateReport], checks: &[Check]) {
    println!("n = {}, d = {}", x.n(), x.d());
    for r in rows {
        if r.stderr > 0.0 {
            println!("{:<22} {:.6} +- {:.2e}", r.quantity, r.value, r.stderr);
        } else {
            println!("{:<22} {:.6}", r.quantity, r.value);
        }
    }
    for c in checks {
        println!("{} {}", if c.holds { "ok  " } else { "FAIL" }, c.name);
    }
}
