use metafuse_core::metrics::{binary_metrics, BinaryCounts};
use metafuse_core::{class_metrics, confusion, roc_auroc, ConfusionMatrix, Measures};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Q = Ratio<i128>;

fn q(n: u64) -> Q {
    Q::from_integer(i128::from(n))
}

fn div(n: Q, d: Q) -> Q {
    if d == q(0) {
        q(0)
    } else {
        n / d
    }
}

fn f(r: Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exact per-class measures from the raw counts.
fn oracle(tp: u64, fp: u64, tn: u64, fn_: u64) -> [f64; 9] {
    let (tp, fp, tn, fn_) = (q(tp), q(fp), q(tn), q(fn_));
    let sens = div(tp, tp + fn_);
    let spec = div(tn, tn + fp);
    let prec = div(tp, tp + fp);
    let npv = div(tn, tn + fn_);
    let acc = div(tp + tn, tp + tn + fp + fn_);
    let f1 = div(q(2) * tp, q(2) * tp + fp + fn_);
    let prod = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let num = tp * tn - fp * fn_;
    let mcc = if prod == q(0) {
        0.0
    } else {
        // sign(num) * sqrt(num^2 / prod), the ratio is exact.
        let sq = f(num * num / prod).sqrt();
        if num < q(0) {
            -sq
        } else {
            sq
        }
    };
    [f(acc), f(sens), f(spec), f(prec), f(npv), f(f1), f(sens + spec - q(1)), f(prec + npv - q(1)), mcc]
}

fn check(m: &Measures, expected: [f64; 9]) {
    for ((name, got), want) in Measures::NAMES.iter().zip(m.values()).zip(expected) {
        assert!((got - want).abs() < 1e-12, "{name}: {got} vs {want}");
        if *name == "mcc" {
            assert!((-1.0..=1.0).contains(&got));
        }
    }
}

#[test]
fn every_binary_matrix_up_to_six_samples() {
    let mut seen = 0;
    for n in 0..=6u64 {
        for tp in 0..=n {
            for fp in 0..=n - tp {
                for tn in 0..=n - tp - fp {
                    let fn_ = n - tp - fp - tn;
                    let m = binary_metrics(BinaryCounts { tp, fp, tn, fn_ });
                    check(&m.measures, oracle(tp, fp, tn, fn_));
                    seen += 1;
                }
            }
        }
    }
    // Sum over n of C(n + 3, 3).
    assert_eq!(seen, 210);
}

#[test]
fn random_multiclass_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let k = rng.random_range(2..=8);
        let counts: Vec<u64> =
            (0..k * k).map(|_| if rng.random_bool(0.2) { 0 } else { rng.random_range(0..500) }).collect();
        let cm = ConfusionMatrix::from_counts(k, counts.clone()).unwrap();
        let total: u64 = counts.iter().sum();
        for c in 0..k {
            let tp = counts[c * k + c];
            let fn_: u64 = (0..k).filter(|&j| j != c).map(|j| counts[c * k + j]).sum();
            let fp: u64 = (0..k).filter(|&i| i != c).map(|i| counts[i * k + c]).sum();
            let tn = total - tp - fn_ - fp;
            check(&class_metrics(&cm, c).measures, oracle(tp, fp, tn, fn_));
        }
    }
}

#[test]
fn confusion_counts_pairs() {
    let cm = confusion(&[0, 0, 1, 2, 2, 2], &[0, 1, 1, 2, 0, 2], 3).unwrap();
    assert_eq!(cm.get(0, 1), 1);
    assert_eq!(cm.get(2, 0), 1);
    assert_eq!(cm.trace(), 4);
    assert!(confusion(&[0, 3], &[0, 0], 3).is_err());
}

/// `P(s+ > s-) + ½ P(s+ = s-)` by counting every pair.
fn mann_whitney(scores: &[f64], pos: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if pos[i] && !pos[j] {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

#[test]
fn auroc_matches_pair_counting_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(2..200);
        let levels = rng.random_range(1..20);
        let mut pos: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        pos[0] = true;
        pos[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / 7.0).collect();
        let roc = roc_auroc(&scores, &pos).unwrap();
        assert!((roc.auroc - mann_whitney(&scores, &pos)).abs() < 1e-12);
    }
}

#[test]
fn auroc_extremes() {
    let pos = [true, true, false, false, false];
    assert_eq!(roc_auroc(&[0.9, 0.8, 0.3, 0.2, 0.1], &pos).unwrap().auroc, 1.0);
    assert_eq!(roc_auroc(&[0.1, 0.2, 0.3, 0.8, 0.9], &pos).unwrap().auroc, 0.0);
    assert_eq!(roc_auroc(&[0.5; 5], &pos).unwrap().auroc, 0.5);
    assert!(roc_auroc(&[0.5; 2], &[true, true]).is_err());
}

proptest! {
    #[test]
    fn mcc_symmetric_under_class_swap(tp in 0u64..1000, fp in 0u64..1000, tn in 0u64..1000, fn_ in 0u64..1000) {
        let a = binary_metrics(BinaryCounts { tp, fp, tn, fn_ }).measures.mcc;
        let b = binary_metrics(BinaryCounts { tp: tn, fp: fn_, tn: tp, fn_: fp }).measures.mcc;
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn roc_points_monotone(scores in prop::collection::vec(0u8..10, 2..60), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pos: Vec<bool> = scores.iter().map(|_| rng.random_bool(0.5)).collect();
        pos[0] = true;
        pos[1] = false;
        let s: Vec<f64> = scores.iter().map(|&v| f64::from(v)).collect();
        let roc = roc_auroc(&s, &pos).unwrap();
        prop_assert_eq!(roc.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(roc.points.last().copied(), Some((1.0, 1.0)));
        for w in roc.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        prop_assert!((0.0..=1.0).contains(&roc.auroc));
    }
}
