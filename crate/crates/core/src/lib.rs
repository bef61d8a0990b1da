//! Standard and adversarial Rademacher complexity over the symmetric
//! difference class `HΔH` of linear (and two-layer ReLU) hypotheses, together
//! with the domain-adaptation discrepancies and bounds built from them, the
//! subset-sum risk-transfer bound, and desk-scale adversarial training of
//! linear classifiers.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrepancy;
pub mod error;
pub mod inner;
pub mod linalg;
pub mod rademacher;
pub mod report;
pub mod train;
pub mod transfer;
pub mod verify;

pub use discrepancy::{BoundKind, BoundParts, BoundReport, CoefficientVariant, DomainPair, LambdaParts};
pub use error::{Error, Result};
pub use inner::{AdversaryBudget, InnerSolution};
pub use linalg::{DesignMatrix, Matrix, NormOrder};
pub use rademacher::{
    Complexity, EstimateMethod, HypothesisClass, HypothesisKind, LossKind, LossSpec, RademacherEstimate, Sampling,
};
pub use report::EstimateReport;
pub use train::{LinearModel, MarginLoss, SyntheticDomainSpec, TrainConfig, TrainMode};
pub use transfer::{DiscreteDomainPair, SubsetSumInstance, VStarSolution};
pub use verify::Battery;
