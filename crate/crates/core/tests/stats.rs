use memorability::stats::{
    consistency_curve, group_variance_analysis, rank_transform, spearman, split_half_consistency,
    ResponseMatrix,
};
use memorability::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Average ranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
fn counting_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

fn closed_form_no_ties(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (counting_ranks(a), counting_ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn random_matrix(seed: u64, n: usize, t: usize) -> ResponseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<f64> = (0..t).map(|_| rng.random_range(0.2..0.9)).collect();
    let rows = (0..n)
        .map(|_| p.iter().map(|&pj| Some(rng.random::<f64>() < pj)).collect())
        .collect();
    ResponseMatrix::from_rows(
        (0..n).map(|i| format!("p{i}")).collect(),
        (0..t).map(|j| format!("t{j}")).collect(),
        rows,
    )
    .unwrap()
}

#[test]
fn spearman_examples() {
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    assert!(matches!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::DegenerateInput(_))));
    assert!(matches!(spearman(&[1.0], &[1.0]), Err(Error::InvalidInput(_))));
    assert_eq!(*rank_transform(&[3.0, 1.0, 3.0, 2.0]).unwrap(), [3.5, 1.0, 3.5, 2.0]);
}

#[test]
fn curve_is_deterministic_and_bounded() {
    let m = random_matrix(1, 60, 20);
    let a = consistency_curve(&m, &[5, 10, 30], 20, 3).unwrap();
    let b = consistency_curve(&m, &[5, 10, 30], 20, 3).unwrap();
    assert_eq!(a, b);
    for r in &a {
        assert!(r.per_split_rhos.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
    assert!(!a[2].subsampled);
    assert!(matches!(
        split_half_consistency(&m, 31, 5, 0),
        Err(Error::InsufficientParticipants { needed: 62, available: 60 })
    ));
}

#[test]
fn larger_groups_shrink_variance() {
    let m = random_matrix(2, 200, 15);
    let curves = group_variance_analysis(&m, &[10, 80], 200, 4).unwrap();
    let shrunk = curves[0]
        .points
        .iter()
        .zip(&curves[1].points)
        .filter(|(a, b)| b.variance < a.variance)
        .count();
    assert!(shrunk >= 14, "{shrunk}");
}

proptest! {
    #[test]
    fn matches_closed_form_without_ties(seed in any::<u64>(), n in 2usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let got = spearman(&a, &b).unwrap();
        prop_assert!((got - closed_form_no_ties(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn ranks_match_counting_oracle(v in prop::collection::vec(0u8..6, 1..40)) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        prop_assert_eq!(rank_transform(&v).unwrap().into_inner(), counting_ranks(&v));
    }

    #[test]
    fn spearman_is_symmetric_and_bounded(
        pairs in prop::collection::vec((0u8..5, 0u8..5), 3..30)
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        match (spearman(&a, &b), spearman(&b, &a)) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!(x, y);
                prop_assert!((-1.0..=1.0).contains(&x));
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false),
        }
    }

    #[test]
    fn monotone_transform_preserves_rho(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..5.0)).collect();
        let b: Vec<f64> = (0..25).map(|_| rng.random()).collect();
        let ea: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        prop_assert!((spearman(&a, &b).unwrap() - spearman(&ea, &b).unwrap()).abs() < 1e-12);
    }
}
