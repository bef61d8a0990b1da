use advhdh::transfer::{erm_vs_robust_comparison, vstar_bruteforce, vstar_meet_in_middle};
use advhdh::{AdversaryBudget, DiscreteDomainPair, SubsetSumInstance};
use serde_json::{json, Map, Value};

use crate::args::{SolverArg, SubsetSumArgs, TransferArgs};
use crate::error::CliError;
use crate::output::{load_csv, read_text, Ctx};

pub fn subset_sum(ctx: &Ctx, a: SubsetSumArgs) -> Result<(), CliError> {
    let path = a.instance.ok_or_else(|| CliError::usage("subset-sum needs --instance"))?;
    let inst = SubsetSumInstance::from_json_str(&read_text(&path)?)?;
    let solver = a.solver.unwrap_or(SolverArg::Both);
    let mut solutions = Map::new();
    let brute = matches!(solver, SolverArg::BruteForce | SolverArg::Both).then(|| vstar_bruteforce(&inst)).transpose()?;
    let mitm = matches!(solver, SolverArg::MeetInMiddle | SolverArg::Both).then(|| vstar_meet_in_middle(&inst)).transpose()?;
    if let Some(s) = &brute {
        solutions.insert("brute-force".into(), json!(s));
        println!("brute-force     V* = {}", s.optimum);
    }
    if let Some(s) = &mitm {
        solutions.insert("meet-in-middle".into(), json!(s));
        println!("meet-in-middle  V* = {}", s.optimum);
    }
    let mut doc = json!({ "command": "subset-sum", "instance": inst, "solutions": Value::Object(solutions) });
    let disagree = match (&brute, &mitm) {
        (Some(b), Some(m)) => {
            let agree = b.optimum.to_bits() == m.optimum.to_bits() && b.witness == m.witness;
            doc["solvers_agree"] = agree.into();
            !agree
        }
        _ => false,
    };
    let out = ctx.write_json("subset-sum.json", doc)?;
    println!("wrote {}", out.display());
    if disagree {
        return Err(CliError::Violation("the two solvers disagree".into()));
    }
    Ok(())
}

pub fn transfer_check(ctx: &Ctx, a: TransferArgs) -> Result<(), CliError> {
    let path = a.support.ok_or_else(|| CliError::usage("transfer-check needs --support"))?;
    let need = |name: &str| CliError::usage(format!("transfer-check needs --{name}"));
    let mass_t = a.mass_t.ok_or_else(|| need("mass-t"))?;
    let mass_t_prime = a.mass_t_prime.ok_or_else(|| need("mass-t-prime"))?;
    let w = a.w.ok_or_else(|| need("w"))?;
    let eps = AdversaryBudget::new(a.eps.unwrap_or(0.0))?;
    let pair = DiscreteDomainPair::new(load_csv(&path)?, mass_t, mass_t_prime)?;
    let cmp = erm_vs_robust_comparison(&pair, &w, eps)?;
    for (name, c) in [("robust", &cmp.robust), ("erm", &cmp.erm)] {
        println!(
            "{name:<7} eps = {:.6}: R_T' = {:.6} <= {:.6} + {:.6} = {:.6} {}",
            c.eps,
            c.lhs,
            c.robust_risk,
            c.vstar,
            c.rhs,
            if c.holds { "holds" } else { "VIOLATED" }
        );
    }
    let holds = cmp.robust.holds && cmp.erm.holds;
    let doc = json!({ "command": "transfer-check", "w": w, "comparison": cmp });
    let out = ctx.write_json("transfer-check.json", doc)?;
    println!("wrote {}", out.display());
    if !holds {
        return Err(CliError::Violation("the transfer inequality is violated".into()));
    }
    Ok(())
}
