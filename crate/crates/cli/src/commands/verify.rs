use advhdh::verify::{replay, run_battery, BatteryOutcome, InstanceOutcome};
use advhdh::Battery;
use serde_json::json;

use crate::args::VerifyArgs;
use crate::error::CliError;
use crate::output::Ctx;

fn print_instance(o: &InstanceOutcome) {
    for c in o.checks.iter().filter(|c| !c.holds) {
        println!("  seed {}: `{}` value {:e} > limit {:e}", o.seed, c.name, c.value, c.limit);
    }
}

pub fn run(ctx: &Ctx, a: VerifyArgs) -> Result<(), CliError> {
    let batteries = a.only.unwrap_or_else(|| Battery::ALL.to_vec());
    if let Some(seed) = a.replay {
        let [b] = batteries[..] else {
            return Err(CliError::usage("--replay needs exactly one --only battery"));
        };
        let o = replay(b, seed)?;
        let ok = o.holds();
        println!("{} {b} seed {seed}", if ok { "PASS" } else { "FAIL" });
        print_instance(&o);
        let out = ctx.write_json("replay.json", json!({ "command": "verify", "replay": o }))?;
        println!("wrote {}", out.display());
        return if ok { Ok(()) } else { Err(CliError::Violation(format!("{b} instance {seed} violates a check"))) };
    }

    let mut outcomes: Vec<BatteryOutcome> = Vec::new();
    for b in batteries {
        let o = run_battery(b, ctx.seed, a.instances)?;
        println!(
            "{} {b}: {} instances, {} checks, {} violating",
            if o.passed() { "PASS" } else { "FAIL" },
            o.instances,
            o.checks,
            o.violations.len()
        );
        o.violations.iter().for_each(print_instance);
        outcomes.push(o);
    }
    let violating: usize = outcomes.iter().map(|o| o.violations.len()).sum();
    let summary: Vec<_> = outcomes
        .iter()
        .map(|o| json!({ "battery": o.battery, "instances": o.instances, "checks": o.checks, "violations": o.violations.len(), "passed": o.passed() }))
        .collect();
    let out = ctx.write_json("verify.json", json!({ "command": "verify", "base_seed": ctx.seed, "batteries": summary }))?;
    println!("wrote {}", out.display());
    if violating > 0 {
        // Each entry carries its battery and instance seed, which `--replay` takes.
        let all: Vec<&InstanceOutcome> = outcomes.iter().flat_map(|o| &o.violations).collect();
        let path = ctx.write_json("violations.json", json!({ "command": "verify", "base_seed": ctx.seed, "violations": all }))?;
        println!("wrote {}", path.display());
        return Err(CliError::Violation(format!("{violating} instance(s) violate a check")));
    }
    Ok(())
}
