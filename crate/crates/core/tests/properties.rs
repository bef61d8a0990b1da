use advhdh::discrepancy::{assemble_adversarial_bound, assemble_standard_bound};
use advhdh::inner::{max_shifted_square, min_shifted_square};
use advhdh::linalg::{dot, exact_sum, lambda_max_symmetric, p_norm, spectral_norm_symmetric, DEFAULT_TOL};
use advhdh::rademacher::{expected_spectral_norm, std_complexity_classification, std_complexity_regression};
use advhdh::train::{evaluate, pgd_attack_linear};
use advhdh::transfer::{vstar_bruteforce, vstar_meet_in_middle};
use advhdh::*;
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = f64> {
    -1.0..1.0f64
}

fn rows(n: std::ops::RangeInclusive<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(unit(), d), n)
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..1.0f64, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn symmetric(d: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0..3.0f64, d * d).prop_map(move |v| {
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = 0.5 * (v[i * d + j] + v[j * d + i]);
            }
        }
        Matrix::new(d, d, m).unwrap()
    })
}

fn eigenvalues(m: &Matrix) -> Vec<f64> {
    let d = m.rows();
    let a = nalgebra::DMatrix::from_row_slice(d, d, m.as_slice());
    a.symmetric_eigen().eigenvalues.iter().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shifted_squares_bracket_every_feasible_point(
        w in prop::collection::vec(unit(), 1..5),
        a in -2.0..2.0f64,
        e in 0.0..1.0f64,
        t in prop::collection::vec(unit(), 5),
    ) {
        let eps = AdversaryBudget::new(e).unwrap();
        let delta: Vec<f64> = t.iter().take(w.len()).map(|v| v * e).collect();
        let f = (dot(&w, &delta) + a).powi(2);
        let hi = max_shifted_square(&w, a, eps);
        let lo = min_shifted_square(&w, a, eps);
        prop_assert!(f <= hi.optimum * (1.0 + 1e-12) + 1e-12);
        prop_assert!(f >= lo.optimum * (1.0 - 1e-12) - 1e-12);
        for s in [&hi, &lo] {
            prop_assert!(p_norm(&s.argpoint, NormOrder::INF) <= e * (1.0 + 1e-12));
            prop_assert!(((dot(&w, &s.argpoint) + a).powi(2) - s.optimum).abs() <= 1e-12 * (1.0 + s.optimum));
        }
    }

    #[test]
    fn spectral_norm_matches_eigen_oracle(m in (1usize..6).prop_flat_map(symmetric)) {
        let ev = eigenvalues(&m);
        let top = ev.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let max = ev.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v));
        let s = spectral_norm_symmetric(&m, DEFAULT_TOL).unwrap();
        let l = lambda_max_symmetric(&m, DEFAULT_TOL).unwrap();
        prop_assert!((s - top).abs() <= 1e-6 * (1.0 + top), "{s} vs {top}");
        prop_assert!((l - max).abs() <= 1e-6 * (1.0 + top), "{l} vs {max}");
    }

    #[test]
    fn exact_sum_ignores_order(v in prop::collection::vec(-1e12..1e12f64, 0..40), seed in any::<u64>()) {
        let mut w = v.clone();
        // deterministic shuffle from the seed
        let mut s = seed | 1;
        for i in (1..w.len()).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            w.swap(i, (s % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(exact_sum(v).to_bits(), exact_sum(w).to_bits());
    }

    #[test]
    fn subset_sum_solvers_agree(
        (p, pp, ell, free) in (1usize..15).prop_flat_map(|n| (
            simplex(n), simplex(n),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(any::<bool>(), n),
        ))
    ) {
        let free: Vec<usize> = free.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect();
        let inst = SubsetSumInstance::new(p, pp, ell.clone(), free.clone()).unwrap();
        let b = vstar_bruteforce(&inst).unwrap();
        let m = vstar_meet_in_middle(&inst).unwrap();
        prop_assert_eq!(b.optimum.to_bits(), m.optimum.to_bits());
        prop_assert_eq!(&b.witness, &m.witness);
        // the unchanged loss vector is feasible
        prop_assert!(b.optimum <= inst.objective(&ell));
        prop_assert_eq!(inst.objective(&b.witness).to_bits(), b.optimum.to_bits());
        for (i, (&got, &orig)) in b.witness.iter().zip(&ell).enumerate() {
            if !free.contains(&i) {
                prop_assert_eq!(got, orig);
            }
        }
        // more freedom never hurts
        let all: Vec<usize> = (0..ell.len()).collect();
        let wide = vstar_meet_in_middle(&inst.with_free(all).unwrap()).unwrap();
        prop_assert!(wide.optimum <= b.optimum);
    }

    #[test]
    fn pgd_hits_the_corner_and_flips_with_the_label(
        w in prop::collection::vec(-2.0..2.0f64, 1..8),
        b in unit(),
        x in prop::collection::vec(unit(), 8),
    ) {
        let x = &x[..w.len()];
        let m = LinearModel::new(w, b).unwrap();
        let cfg = TrainConfig::default();
        let up = pgd_attack_linear(&m, x, 1.0, &cfg);
        let down = pgd_attack_linear(&m, x, -1.0, &cfg);
        // recovered perturbations are exact up to the rounding of x + delta
        for j in 0..x.len() {
            prop_assert!(((up[j] - x[j]) + (down[j] - x[j])).abs() <= 1e-12);
        }
        let got = cfg.loss.value(m.score(&up));
        prop_assert!((got - m.worst_case_loss(x, 1.0, cfg.eps, cfg.loss)).abs() <= 1e-9);
    }

    #[test]
    fn robust_accuracy_is_bounded_and_monotone(
        r in rows(1..=20, 3),
        labels in prop::collection::vec(any::<bool>(), 20),
        w in prop::collection::vec(unit(), 3),
        e1 in 0.0..0.5f64,
        e2 in 0.0..0.5f64,
    ) {
        let y: Vec<f64> = labels[..r.len()].iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let data = DesignMatrix::from_rows(&r, Some(y)).unwrap();
        let m = LinearModel::new(w, 0.0).unwrap();
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let a = evaluate(&m, &data, AdversaryBudget::new(lo).unwrap()).unwrap();
        let b = evaluate(&m, &data, AdversaryBudget::new(hi).unwrap()).unwrap();
        let z = evaluate(&m, &data, AdversaryBudget::ZERO).unwrap();
        prop_assert!(b.ra <= a.ra && a.ra <= a.sa);
        prop_assert_eq!(a.sa, z.sa);
        // RA = SA at eps = 0 except for points exactly on the boundary
        prop_assert!(z.ra <= z.sa);
    }

    #[test]
    fn complexities_ignore_row_order(r in rows(1..=7, 2), shift in 0usize..7) {
        let mut q = r.clone();
        let k = shift % q.len();
        q.rotate_left(k);
        let a = DesignMatrix::from_rows(&r, None).unwrap();
        let b = DesignMatrix::from_rows(&q, None).unwrap();
        let h = HypothesisClass::linear_classification(NormOrder::TWO, 1.0).unwrap();
        let g = HypothesisClass::linear_regression(NormOrder::TWO, 1.0).unwrap();
        let ca = std_complexity_classification(&a, &h, Sampling::Exact).unwrap().lower().value;
        let cb = std_complexity_classification(&b, &h, Sampling::Exact).unwrap().lower().value;
        let ra = std_complexity_regression(&a, &g, Sampling::Exact).unwrap().lower().value;
        let rb = std_complexity_regression(&b, &g, Sampling::Exact).unwrap().lower().value;
        prop_assert!((ca - cb).abs() <= 1e-12 * (1.0 + ca));
        prop_assert!((ra - rb).abs() <= 1e-12 * (1.0 + ra));
    }

    #[test]
    fn bound_total_is_the_sum_and_grows_with_each_part(
        vals in prop::collection::vec(0.0..2.0f64, 8),
        n in (1usize..500, 1usize..500),
        bump in 0usize..6,
    ) {
        let parts = BoundParts {
            source_risk: vals[0],
            discrepancy: vals[1],
            lambda: LambdaParts { source_label: vals[2], target_pair: vals[3], target_label: vals[4] },
            complexity_source: vals[5],
            complexity_target: vals[6],
            n_source: n.0,
            n_target: n.1,
            loss_bound: 1.0 + vals[7],
            confidence: 0.05,
        };
        let r = assemble_adversarial_bound(&parts).unwrap();
        let sum = exact_sum([
            r.source_risk, r.discrepancy, r.lambda_terms, r.complexity_source,
            r.complexity_target, r.concentration_source, r.concentration_target,
        ]);
        prop_assert_eq!(r.total.to_bits(), sum.to_bits());
        let mut more = parts;
        match bump {
            0 => more.source_risk += 0.1,
            1 => more.discrepancy += 0.1,
            2 => more.lambda.target_pair += 0.1,
            3 => more.complexity_source += 0.1,
            4 => more.complexity_target += 0.1,
            _ => more.confidence = 0.01,
        }
        prop_assert!(assemble_adversarial_bound(&more).unwrap().total > r.total);
        let std_parts = BoundParts { lambda: LambdaParts { source_label: 0.0, ..parts.lambda }, ..parts };
        prop_assert!(assemble_standard_bound(&std_parts).is_ok());
    }
}

#[test]
fn monte_carlo_within_four_stderr_of_enumeration() {
    let r: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos(), 0.1 * i as f64]).collect();
    let x = DesignMatrix::from_rows(&r, None).unwrap();
    let exact = expected_spectral_norm(&x, Sampling::Exact).unwrap();
    let mc = expected_spectral_norm(&x, Sampling::monte_carlo(50_000, 5)).unwrap();
    assert!((mc.value - exact.value).abs() <= 4.0 * mc.stderr, "{mc:?} vs {exact:?}");
}

#[test]
fn csv_round_trip_is_lossless() {
    let r = vec![vec![0.1, -2.5e-7], vec![1.0 / 3.0, 4.0]];
    let x = DesignMatrix::from_rows(&r, Some(vec![1.0, -1.0])).unwrap();
    let s = x.to_csv_string().unwrap();
    let y = DesignMatrix::from_csv_reader(s.as_bytes()).unwrap();
    assert_eq!(x, y);
}
