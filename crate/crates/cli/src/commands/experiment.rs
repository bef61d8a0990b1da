use advhdh::train::{evaluate, l1_sweep_experiment, pgd_accuracy, sweep_csv, train, REFERENCE_EPS_GRID, REFERENCE_MU_GRID};
use advhdh::{AdversaryBudget, DesignMatrix, LinearModel, SyntheticDomainSpec, TrainConfig, TrainMode};
use serde_json::{json, Value};

use crate::args::{DomainFlags, SweepArgs, TrainArgs, TrainFlags};
use crate::error::CliError;
use crate::output::{load_csv, Ctx};

fn train_config(f: &TrainFlags, eps: Option<f64>, l1_mu: Option<f64>, seed: u64) -> Result<TrainConfig, CliError> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        eps: eps.map(AdversaryBudget::new).transpose()?.unwrap_or(d.eps),
        pgd_steps: f.pgd_steps.unwrap_or(d.pgd_steps),
        pgd_step_size: f.pgd_step_size.unwrap_or(d.pgd_step_size),
        epochs: f.epochs.unwrap_or(d.epochs),
        learning_rate: f.learning_rate.unwrap_or(d.learning_rate),
        cosine_decay: f.cosine_decay.unwrap_or(d.cosine_decay),
        l1_mu: l1_mu.unwrap_or(d.l1_mu),
        loss: f.loss.unwrap_or(d.loss),
        fit_bias: f.fit_bias.unwrap_or(d.fit_bias),
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn scores(model: &LinearModel, data: &DesignMatrix, cfg: &TrainConfig) -> Result<Value, CliError> {
    let e = evaluate(model, data, cfg.eps)?;
    Ok(json!({ "n": data.n(), "sa": e.sa, "ra": e.ra, "pgd_ra": pgd_accuracy(model, data, cfg)? }))
}

pub fn train_cmd(ctx: &Ctx, a: TrainArgs, flags: TrainFlags) -> Result<(), CliError> {
    let path = a.data.ok_or_else(|| CliError::usage("train needs --data"))?;
    let data = load_csv(&path)?;
    data.require_labels()?;
    let test = a.test.as_deref().map(load_csv).transpose()?;
    if let Some(t) = &test {
        t.require_labels()?;
    }
    let cfg = train_config(&flags, a.eps, a.l1_mu, ctx.seed)?;
    let mode = a.mode.unwrap_or(TrainMode::Standard);
    let model = train(&LinearModel::zeros(data.d()), &data, &cfg, mode)?;
    let mut doc = json!({ "command": "train", "model": model, "train": scores(&model, &data, &cfg)? });
    if let Some(t) = &test {
        doc["test"] = scores(&model, t, &cfg)?;
    }
    for split in ["train", "test"] {
        if let Some(s) = doc.get(split) {
            println!("{split:<5} SA = {:.4}  RA = {:.4}  PGD RA = {:.4}", s["sa"], s["ra"], s["pgd_ra"]);
        }
    }
    let out = ctx.write_json("train.json", doc)?;
    println!("wrote {}", out.display());
    Ok(())
}

/// The reference domains with config overrides. Changing `d` without
/// giving a translation drops the reference translation, whose length is
/// tied to the reference `d`.
fn domain_spec(f: DomainFlags, seed: u64) -> SyntheticDomainSpec {
    let r = SyntheticDomainSpec::reference();
    let translation = match (f.translation, f.d) {
        (Some(t), _) => t,
        (None, Some(d)) if d != r.d => Vec::new(),
        (None, _) => r.translation,
    };
    SyntheticDomainSpec {
        n: f.n.unwrap_or(r.n),
        d: f.d.unwrap_or(r.d),
        separation: f.separation.unwrap_or(r.separation),
        noise: f.noise.unwrap_or(r.noise),
        rotation: f.rotation.unwrap_or(r.rotation),
        translation,
        seed,
    }
}

pub fn sweep(ctx: &Ctx, a: SweepArgs, flags: TrainFlags, domains: DomainFlags) -> Result<(), CliError> {
    let mu = a.mu.unwrap_or_else(|| REFERENCE_MU_GRID.to_vec());
    let eps = a.eps.unwrap_or_else(|| REFERENCE_EPS_GRID.to_vec());
    let spec = domain_spec(domains, ctx.seed);
    // The grids set the budget and l1 weight of every cell.
    let cfg = train_config(&flags, None, None, ctx.seed)?;
    let rows = l1_sweep_experiment(&spec, &mu, &eps, &cfg)?;
    let csv = sweep_csv(&rows);
    print!("{csv}");
    let out = ctx.write_text("sweep.csv", &csv)?;
    println!("wrote {}", out.display());
    Ok(())
}
