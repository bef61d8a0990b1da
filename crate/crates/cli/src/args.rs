//! Command-line and config-file arguments.
//!
//! Every per-command struct doubles as a TOML section: fields are optional
//! so that a value given on the command line can shadow the config file,
//! which in turn shadows the library default.

use std::path::PathBuf;

use advhdh::{Battery, MarginLoss, NormOrder, TrainMode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

/// Generates `or`, which keeps each field of `self` and falls back to
/// `lower` where `self` has none.
macro_rules! layered {
    ($t:ident { $($f:ident),* $(,)? }) => {
        impl $t {
            pub fn or(self, lower: Self) -> Self {
                $t { $($f: self.$f.or(lower.$f)),* }
            }
        }
    };
}

#[derive(Debug, Parser)]
#[command(name = "advhdh", version, about = "Adversarial domain-adaptation bounds and robustness experiments")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 makes parallel reductions bit-reproducible.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory reports are written to.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML config file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Leave the generation time out of reports.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Standard and adversarial Rademacher complexities of a dataset.
    Complexity(ComplexityArgs),
    /// Assemble a generalization bound from given or computed parts.
    Bound(BoundArgs),
    /// Solve a V* subset-sum instance.
    SubsetSum(SubsetSumArgs),
    /// Check the robust-to-clean risk transfer inequality on a discrete pair.
    TransferCheck(TransferArgs),
    /// Train a linear classifier, optionally adversarially.
    Train(TrainArgs),
    /// Robust accuracy drop across an l1 weight and epsilon grid.
    Sweep(SweepArgs),
    /// Run the seeded verification batteries.
    Verify(VerifyArgs),
}

/// Accepts plain numbers and fractions such as `8/255`.
pub fn number(s: &str) -> Result<f64, String> {
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("cannot parse {s:?} as a number"));
    match s.split_once('/') {
        Some((a, b)) => Ok(parse(a)? / parse(b)?),
        None => parse(s),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassArg {
    LinearClassification,
    LinearRegression,
    TwoLayerRelu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    /// Enumerate all sign patterns.
    Exact,
    /// Monte Carlo over sign patterns.
    Mc,
    /// Closed-form upper bounds only.
    Bounds,
    /// Exact (or Monte Carlo above the enumeration limit) plus bounds.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantsArg {
    Appendix,
    Theorem,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ComplexityArgs {
    /// Dataset CSV (feature columns, optional `label` column).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub class: Option<ClassArg>,
    /// Norm order of the weight ball (`inf` allowed).
    #[arg(long)]
    pub p: Option<NormOrder>,
    /// Weight radius.
    #[arg(long = "W", value_parser = number)]
    #[serde(rename = "W")]
    pub w: Option<f64>,
    /// Outer radius of the ReLU class.
    #[arg(long = "A", value_parser = number)]
    #[serde(rename = "A")]
    pub a: Option<f64>,
    /// Hidden width of the ReLU class.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_parser = number)]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_enum)]
    pub constants: Option<ConstantsArg>,
    /// The constant of the theorem-form gap bounds.
    #[arg(long, value_parser = number)]
    pub c: Option<f64>,
    /// Directions per hypothesis in the exact classification search.
    #[arg(long)]
    pub directions: Option<usize>,
    /// Network pairs in the ReLU witness.
    #[arg(long)]
    pub pairs: Option<usize>,
}

layered!(ComplexityArgs { data, class, p, w, a, m, eps, method, samples, constants, c, directions, pairs });

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundArg {
    Standard,
    Adversarial,
    CorollaryStatement,
    CorollaryProof,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BoundArgs {
    #[arg(long, value_enum)]
    pub kind: Option<BoundArg>,
    /// Source sample CSV; with `--target`, fills in the missing parts.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Hypothesis class used for computed parts.
    #[arg(long, value_enum)]
    pub class: Option<ClassArg>,
    #[arg(long)]
    pub p: Option<NormOrder>,
    #[arg(long = "W", value_parser = number)]
    #[serde(rename = "W")]
    pub w: Option<f64>,
    #[arg(long, value_parser = number)]
    pub eps: Option<f64>,
    #[arg(long, value_parser = number)]
    pub source_risk: Option<f64>,
    #[arg(long, value_parser = number)]
    pub discrepancy: Option<f64>,
    #[arg(long, value_parser = number)]
    pub lambda_source_label: Option<f64>,
    #[arg(long, value_parser = number)]
    pub lambda_target_pair: Option<f64>,
    #[arg(long, value_parser = number)]
    pub lambda_target_label: Option<f64>,
    #[arg(long, value_parser = number)]
    pub complexity_source: Option<f64>,
    #[arg(long, value_parser = number)]
    pub complexity_target: Option<f64>,
    #[arg(long)]
    pub n_source: Option<usize>,
    #[arg(long)]
    pub n_target: Option<usize>,
    /// Bound M on the loss.
    #[arg(long, value_parser = number)]
    pub loss_bound: Option<f64>,
    /// Failure probability c in (0, 1).
    #[arg(long, value_parser = number)]
    pub confidence: Option<f64>,
}

layered!(BoundArgs {
    kind,
    source,
    target,
    class,
    p,
    w,
    eps,
    source_risk,
    discrepancy,
    lambda_source_label,
    lambda_target_pair,
    lambda_target_label,
    complexity_source,
    complexity_target,
    n_source,
    n_target,
    loss_bound,
    confidence,
});

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    BruteForce,
    MeetInMiddle,
    Both,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SubsetSumArgs {
    /// JSON instance with `p`, `p_prime`, `ell` and 1-based `free`.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
}

layered!(SubsetSumArgs { instance, solver });

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TransferArgs {
    /// Labelled support points as CSV.
    #[arg(long)]
    pub support: Option<PathBuf>,
    /// Masses of T on the support, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = number)]
    pub mass_t: Option<Vec<f64>>,
    /// Masses of T' on the support.
    #[arg(long, value_delimiter = ',', value_parser = number)]
    pub mass_t_prime: Option<Vec<f64>>,
    /// Linear classifier weights.
    #[arg(long, value_delimiter = ',', value_parser = number, allow_hyphen_values = true)]
    pub w: Option<Vec<f64>>,
    #[arg(long, value_parser = number)]
    pub eps: Option<f64>,
}

layered!(TransferArgs { support, mass_t, mass_t_prime, w, eps });

/// Optimizer and attack settings shared by `train` and `sweep`; the config
/// section is `[training]`. The budget and l1 weight are per command.
#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrainFlags {
    #[arg(long)]
    pub pgd_steps: Option<usize>,
    #[arg(long, value_parser = number)]
    pub pgd_step_size: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_parser = number)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub cosine_decay: Option<bool>,
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<MarginLoss>,
    #[arg(long)]
    pub fit_bias: Option<bool>,
}

layered!(TrainFlags { pgd_steps, pgd_step_size, epochs, learning_rate, cosine_decay, loss, fit_bias });

fn parse_loss(s: &str) -> Result<MarginLoss, String> {
    match s {
        "logistic" => Ok(MarginLoss::Logistic),
        "hinge" => Ok(MarginLoss::Hinge),
        _ => Err(format!("unknown loss {s:?}; expected logistic or hinge")),
    }
}

fn parse_mode(s: &str) -> Result<TrainMode, String> {
    match s {
        "standard" => Ok(TrainMode::Standard),
        "adversarial" => Ok(TrainMode::Adversarial),
        _ => Err(format!("unknown mode {s:?}; expected standard or adversarial")),
    }
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrainArgs {
    /// Labelled training CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Labelled evaluation CSV.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<TrainMode>,
    /// Attack budget for adversarial training and robust accuracy.
    #[arg(long, value_parser = number)]
    pub eps: Option<f64>,
    /// l1 penalty weight.
    #[arg(long, value_parser = number)]
    pub l1_mu: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub flags: TrainFlags,
}

impl TrainArgs {
    pub fn or(self, lower: Self) -> Self {
        TrainArgs {
            data: self.data.or(lower.data),
            test: self.test.or(lower.test),
            mode: self.mode.or(lower.mode),
            eps: self.eps.or(lower.eps),
            l1_mu: self.l1_mu.or(lower.l1_mu),
            flags: self.flags,
        }
    }
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepArgs {
    /// l1 weights, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = number, num_args = 0..)]
    pub mu: Option<Vec<f64>>,
    /// Attack budgets, comma separated; fractions such as `8/255` are accepted.
    #[arg(long, value_delimiter = ',', value_parser = number, num_args = 0..)]
    pub eps: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(skip)]
    pub flags: TrainFlags,
}

impl SweepArgs {
    pub fn or(self, lower: Self) -> Self {
        SweepArgs { mu: self.mu.or(lower.mu), eps: self.eps.or(lower.eps), flags: self.flags }
    }
}

/// Overrides of the reference synthetic domains; the config section is
/// `[domains]`. The seed always comes from `--seed`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DomainFlags {
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub separation: Option<f64>,
    pub noise: Option<f64>,
    pub rotation: Option<f64>,
    pub translation: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyArgs {
    /// Restrict to these batteries (repeatable).
    #[arg(long)]
    pub only: Option<Vec<Battery>>,
    /// Instances per battery instead of each battery's default.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Rerun the single instance with this seed (needs exactly one `--only`).
    #[arg(long)]
    pub replay: Option<u64>,
}

layered!(VerifyArgs { only, instances, replay });

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn fractions_parse() {
        assert_eq!(number("8/255"), Ok(8.0 / 255.0));
        assert_eq!(number(" 0.5 "), Ok(0.5));
        assert!(number("x").is_err());
    }
}
