use bsr_core::corpus::{IdentityType, Label};
use bsr_core::lambda::{Verdict, VerdictValue};
use bsr_core::metrics::{decision_b, f1, lss_beta, rfs, ConfusionMatrix, EvalRecord};
use proptest::prelude::*;

fn verdict(label: Label) -> Option<Verdict> {
    Some(Verdict {
        value: match label {
            Label::Yes => VerdictValue::Yes,
            Label::No => VerdictValue::No,
        },
        evidence: String::new(),
    })
}

fn label(b: bool) -> Label {
    if b {
        Label::Yes
    } else {
        Label::No
    }
}

/// samples[n][k] = (answer, truth)
fn records(samples: &[Vec<(bool, bool)>]) -> Vec<EvalRecord> {
    samples
        .iter()
        .enumerate()
        .flat_map(|(n, sample)| {
            sample.iter().enumerate().map(move |(k, &(answer, truth))| EvalRecord {
                instance_id: format!("s{n}/k{k}"),
                sample_id: Some(format!("s{n}")),
                law_id: "law".into(),
                identity_type: Some(IdentityType::Religion),
                identity_key: Some(format!("k{k}")),
                label: label(truth),
                verdict: verdict(label(answer)),
                checkpoint: None,
            })
        })
        .collect()
}

fn dataset() -> impl Strategy<Value = Vec<Vec<(bool, bool)>>> {
    (1usize..=8).prop_flat_map(|k| prop::collection::vec(prop::collection::vec(any::<(bool, bool)>(), k), 1..=50))
}

/// Weighted harmonic mean, written independently of the library's form.
fn reference_lss(r: f64, f: f64, beta: f64) -> f64 {
    if r == 0.0 || f == 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    (1.0 + b2) / (b2 / r + 1.0 / f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn lss_bounds(r in 0.0f64..=1.0, f in 0.0f64..=1.0, beta in 1e-3f64..=100.0) {
        let l = lss_beta(r, f, beta).unwrap();
        prop_assert!((0.0..=1.0).contains(&l));
        prop_assert!(l >= r.min(f) && l <= r.max(f));
        prop_assert!((l - reference_lss(r, f, beta)).abs() < 1e-12);
        let l1 = lss_beta(r, f, 1.0).unwrap();
        prop_assert!(l1 <= 2.0 * r.min(f) + 1e-15);
    }

    #[test]
    fn lss_monotone_in_each_argument(r in 0.0f64..=1.0, f in 0.0f64..=1.0, d in 0.0f64..=1.0, beta in 1e-2f64..=100.0) {
        let r2 = (r + d).min(1.0);
        let f2 = (f + d).min(1.0);
        prop_assert!(lss_beta(r2, f, beta).unwrap() >= lss_beta(r, f, beta).unwrap() - 1e-15);
        prop_assert!(lss_beta(r, f2, beta).unwrap() >= lss_beta(r, f, beta).unwrap() - 1e-15);
    }

    #[test]
    fn lss_swap_symmetry(r in 0.0f64..=1.0, f in 0.0f64..=1.0, beta in 1e-2f64..=100.0) {
        let a = lss_beta(r, f, beta).unwrap();
        let b = lss_beta(f, r, 1.0 / beta).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rfs_invariances(data in dataset(), seed in any::<u64>()) {
        let base = rfs(&records(&data)).unwrap().value;
        // permute identities within each sample
        let permuted: Vec<Vec<(bool, bool)>> = data.iter().enumerate().map(|(n, s)| {
            let mut s = s.clone();
            let len = s.len();
            s.rotate_left((seed as usize + n) % len);
            s.reverse();
            s
        }).collect();
        prop_assert_eq!(rfs(&records(&permuted)).unwrap().value, base);
        // negate every verdict of a subset of samples
        let negated: Vec<Vec<(bool, bool)>> = data.iter().enumerate().map(|(n, s)| {
            s.iter().map(|&(a, t)| (if (seed >> (n % 64)) & 1 == 1 { !a } else { a }, t)).collect()
        }).collect();
        prop_assert_eq!(rfs(&records(&negated)).unwrap().value, base);
        // arbitrary relabelling
        let relabelled: Vec<Vec<(bool, bool)>> = data.iter().enumerate().map(|(n, s)| {
            s.iter().enumerate().map(|(k, &(a, _))| (a, (seed.rotate_left((n * 7 + k) as u32) & 1) == 1)).collect()
        }).collect();
        prop_assert_eq!(rfs(&records(&relabelled)).unwrap().value, base);
    }

    #[test]
    fn f1_matches_confusion_oracle(pairs in prop::collection::vec(any::<(bool, bool)>(), 1..300)) {
        let recs = records(&pairs.iter().map(|&p| vec![p]).collect::<Vec<_>>());
        let (mut tp, mut fp, mut fn_) = (0.0f64, 0.0f64, 0.0f64);
        for &(a, t) in &pairs {
            match (a, t) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                _ => {}
            }
        }
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let expected = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        prop_assert_eq!(f1(&recs).unwrap().value, expected);
    }
}

#[test]
fn decision_b_brute_force_up_to_twelve() {
    for k in 1..=12u32 {
        for bits in 0u32..(1 << k) {
            let tuple: Vec<Label> = (0..k).map(|i| label(bits >> i & 1 == 1)).collect();
            let distinct: std::collections::HashSet<Label> = tuple.iter().copied().collect();
            assert_eq!(decision_b(&tuple).unwrap(), u8::from(distinct.len() == 1));
        }
    }
}

#[test]
fn confusion_counts_sum() {
    let m = ConfusionMatrix::from_pairs([(Label::Yes, Label::No), (Label::No, Label::No)]);
    assert_eq!((m.tp, m.fp, m.fn_, m.tn), (0, 1, 0, 1));
    assert_eq!(m.f1(), 0.0);
}
