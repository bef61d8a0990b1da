use advhdh::discrepancy::{assemble_adversarial_bound, hdh_discrepancy_regression};
use advhdh::linalg::p_norm;
use advhdh::rademacher::{adv_upper_classification, std_upper_bernstein_regression, ConstantMode};
use advhdh::train::{generate_domains, l1_sweep_experiment, train, REFERENCE_EPS_GRID, REFERENCE_MU_GRID};
use advhdh::*;

fn reference_rows() -> Vec<advhdh::train::SweepRow> {
    l1_sweep_experiment(&SyntheticDomainSpec::reference(), &REFERENCE_MU_GRID, &REFERENCE_EPS_GRID, &TrainConfig::default())
        .unwrap()
}

#[test]
fn sweep_invariants_on_the_reference_spec() {
    let rows = reference_rows();
    assert_eq!(rows.len(), REFERENCE_MU_GRID.len() * REFERENCE_EPS_GRID.len());
    let source = generate_domains(&SyntheticDomainSpec::reference()).unwrap().source;
    for &e in &REFERENCE_EPS_GRID {
        let col: Vec<_> = rows.iter().filter(|r| r.eps == e).collect();
        // ||w||_1, and with it the p = 1 adversarial gap bound, shrinks as mu grows
        let gaps: Vec<f64> = col
            .iter()
            .map(|r| {
                let h = HypothesisClass::linear_classification(NormOrder::ONE, r.w_l1).unwrap();
                adv_upper_classification(&source, &h, AdversaryBudget::new(e).unwrap(), ConstantMode::Appendix).unwrap().value
            })
            .collect();
        for k in 1..col.len() {
            assert!(col[k].mu > col[k - 1].mu);
            assert!(col[k].w_l1 <= col[k - 1].w_l1, "eps {e}: {:?}", col);
            assert!(gaps[k] <= gaps[k - 1]);
        }
        for r in &col {
            assert!(r.ra_source <= r.sa_source && r.ra_target <= r.sa_target);
            if e == 0.0 {
                assert_eq!(r.delta, r.sa_source - r.sa_target);
            }
        }
    }
}

#[test]
fn identical_domains_show_no_drop() {
    let spec = SyntheticDomainSpec { n: 4000, d: 10, separation: 1.0, noise: 0.5, rotation: 0.0, translation: vec![], seed: 3 };
    let rows = l1_sweep_experiment(&spec, &[0.0, 1e-2], &[0.0, 8.0 / 255.0], &TrainConfig::default()).unwrap();
    for r in rows {
        assert!(r.delta.abs() < 0.05, "{r:?}");
    }
}

#[test]
fn zero_shift_domains_have_close_means() {
    let spec = SyntheticDomainSpec { n: 2000, d: 3, separation: 1.0, noise: 0.5, rotation: 0.0, translation: vec![], seed: 8 };
    let pair = generate_domains(&spec).unwrap();
    for j in 0..3 {
        let m = |x: &DesignMatrix| x.rows().map(|r| r[j]).sum::<f64>() / x.n() as f64;
        assert!((m(&pair.source) - m(&pair.target)).abs() < 3.0 / (spec.n as f64).sqrt());
    }
}

#[test]
fn huge_l1_weight_keeps_weights_small() {
    let spec = SyntheticDomainSpec { n: 200, d: 5, separation: 2.0, noise: 0.5, rotation: 0.0, translation: vec![], seed: 2 };
    let pair = generate_domains(&spec).unwrap();
    let cfg = TrainConfig { l1_mu: 1e3, epochs: 5, learning_rate: 1e-3, ..TrainConfig::default() };
    let m = train(&LinearModel::zeros(5), &pair.source, &cfg, TrainMode::Adversarial).unwrap();
    // Once |w_j| exceeds one step, the penalty step (mu) outweighs the data
    // step (at most max |x_ij| + eps), so no coordinate leaves
    // [-step, step] with step = lr * (gradient bound + mu).
    let grad_bound = pair.source.rows().map(|r| p_norm(r, NormOrder::INF)).fold(0.0, f64::max) + cfg.eps.eps();
    let step = cfg.learning_rate * (grad_bound + cfg.l1_mu);
    assert!(m.w.iter().all(|w| w.abs() <= step), "{:?}", m.w);
    assert!(p_norm(&m.w, NormOrder::ONE) <= 5.0 * step);
}

#[test]
fn seeded_training_is_bit_reproducible() {
    let spec = SyntheticDomainSpec {
        n: 120,
        d: 4,
        separation: 1.0,
        noise: 0.6,
        rotation: 0.4,
        translation: vec![0.1, 0.0, 0.0, 0.2],
        seed: 12,
    };
    let pair = generate_domains(&spec).unwrap();
    let cfg = TrainConfig { l1_mu: 1e-2, ..TrainConfig::default() };
    let a = train(&LinearModel::zeros(4), &pair.source, &cfg, TrainMode::Adversarial).unwrap();
    let b = train(&LinearModel::zeros(4), &pair.source, &cfg, TrainMode::Adversarial).unwrap();
    assert_eq!(a, b);
}

#[test]
fn end_to_end_bound_on_a_synthetic_pair() {
    let spec = SyntheticDomainSpec { n: 10, d: 2, separation: 1.0, noise: 0.5, rotation: 0.5, translation: vec![], seed: 4 };
    let pair = generate_domains(&spec).unwrap();
    let h = HypothesisClass::linear_regression(NormOrder::TWO, 1.0).unwrap();
    let build = || {
        let disc = hdh_discrepancy_regression(&pair.source, &pair.target, &h).unwrap();
        let cs = std_upper_bernstein_regression(&pair.source, &h).unwrap().value;
        let ct = std_upper_bernstein_regression(&pair.target, &h).unwrap().value;
        let parts = BoundParts {
            source_risk: 0.2,
            discrepancy: disc,
            lambda: LambdaParts { source_label: 0.0, target_pair: 0.0, target_label: 0.0 },
            complexity_source: cs,
            complexity_target: ct,
            n_source: pair.source.n(),
            n_target: pair.target.n(),
            loss_bound: 4.0,
            confidence: 0.05,
        };
        assemble_adversarial_bound(&parts).unwrap()
    };
    let (a, b) = (build(), build());
    assert_eq!(a, b);
    assert!(a.discrepancy > 0.0 && a.total > a.source_risk);
}
