mod common;

use common::{copy_prob_for_mi, Chain};
use miscale::entropy::{entropy_grassberger, entropy_naive, pack_pair, Arity, CountTable};
use miscale::estimators::{twopoint_mi_hat, twopoint_scan, MarginalMode};
use miscale::fit::{fit_powerlaw_offset, ScalingSeries};
use miscale::ngram::{count_pairs_at_distance, count_unigrams, TokenCorpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn uniform_unigrams_have_grassberger_entropy_ln_256() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let docs: Vec<Vec<u32>> = (0..1000)
        .map(|_| (0..1000).map(|_| rng.random_range(0..256)).collect())
        .collect();
    let corpus = TokenCorpus::from_token_lists(docs).unwrap();
    let t = count_unigrams(&corpus).unwrap();
    assert_eq!(t.total(), 1_000_000);
    assert!((entropy_grassberger(&t).unwrap() - 256f64.ln()).abs() < 0.01);
}

#[test]
fn grassberger_reduces_undersampling_bias() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let reps = 200;
    let (mut g, mut n) = (0.0, 0.0);
    for _ in 0..reps {
        let mut t = CountTable::new(Arity::Unigram);
        for _ in 0..5000 {
            t.increment(rng.random_range(0..1000u64));
        }
        g += entropy_grassberger(&t).unwrap();
        n += entropy_naive(&t).unwrap();
    }
    let truth = 1000f64.ln();
    let (bg, bn) = ((g / reps as f64 - truth).abs(), (n / reps as f64 - truth).abs());
    assert!(bg < bn, "grassberger bias {bg} vs naive {bn}");
}

#[test]
fn independent_pairs_give_near_zero_mi() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pairs = CountTable::new(Arity::Pair);
    let mut uni = CountTable::new(Arity::Unigram);
    for _ in 0..1_000_000 {
        let (a, b) = (rng.random_range(0..16u32), rng.random_range(0..16u32));
        pairs.increment(pack_pair(a, b));
        uni.increment(u64::from(a));
        uni.increment(u64::from(b));
    }
    for mode in [MarginalMode::Pooled, MarginalMode::Coordinate] {
        let v = twopoint_mi_hat(Some(&uni), &pairs, mode).unwrap();
        assert!(v.abs() < 0.01, "{mode:?}: {v}");
    }
}

#[test]
fn identical_chain_two_point_is_distance_free() {
    let chain = Chain::identical(4);
    let corpus = TokenCorpus::from_token_lists(chain.sample(1000, 1000, 12)).unwrap();
    assert_eq!(corpus.token_count(), 1_000_000);
    let scan = twopoint_scan(&corpus, &[1, 4, 16, 64, 256], MarginalMode::Pooled).unwrap();
    assert_eq!(scan.len(), 5);
    for (d, v) in &scan {
        assert!((v - 4f64.ln()).abs() < 0.02, "d={d}: {v}");
        assert!((v - scan[0].1).abs() < 1e-4);
    }
}

#[test]
fn offset_fit_recovers_decay_under_estimator_bias() {
    // Documents at distance d have length d + 1, so each holds exactly one
    // pair at that distance. Its endpoints follow a copy channel with MI
    // A·d^(−α); a fixed pair count keeps the estimator bias roughly constant.
    let (m, amp, alpha, n_pairs) = (8u32, 0.3, 0.5, 16_384usize);
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let distances: Vec<usize> = (0..9).map(|k| 1 << k).collect();
    let mut y = Vec::new();
    for &d in &distances {
        let r = copy_prob_for_mi(m, amp * (d as f64).powf(-alpha));
        let docs: Vec<Vec<u32>> = (0..n_pairs)
            .map(|_| {
                let mut doc: Vec<u32> = (0..=d).map(|_| rng.random_range(0..m)).collect();
                if rng.random::<f64>() < r {
                    doc[d] = doc[0];
                }
                doc
            })
            .collect();
        let corpus = TokenCorpus::from_token_lists(docs).unwrap();
        let pairs = count_pairs_at_distance(&corpus, d).unwrap();
        assert_eq!(pairs.total() as usize, n_pairs);
        let uni = count_unigrams(&corpus).unwrap();
        y.push(twopoint_mi_hat(Some(&uni), &pairs, MarginalMode::Pooled).unwrap());
    }
    let x: Vec<f64> = distances.iter().map(|&d| d as f64).collect();
    let f = fit_powerlaw_offset(&ScalingSeries::new(x, y.clone()).unwrap()).unwrap();
    assert!(((-f.exponent) - alpha).abs() < 0.1 * alpha, "{f:?} from {y:?}");
}
