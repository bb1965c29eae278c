mod common;

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistbeam::lm::{LanguageModel, NgramModel};
use twistbeam::tokens::{token_order, EOS};

fn random_corpus(rng: &mut ChaCha8Rng, words: usize, stories: usize, max_len: usize) -> String {
    let vocab: Vec<String> = (0..words).map(|i| format!("w{i}")).collect();
    let mut out = String::new();
    for _ in 0..stories {
        let len = rng.random_range(1..=max_len);
        let story: Vec<&str> = (0..len)
            .map(|_| vocab.choose(rng).unwrap().as_str())
            .collect();
        out.push_str(&story.join(" "));
        out.push('\n');
    }
    out
}

#[test]
fn full_distributions_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let corpus = random_corpus(&mut rng, 30, 80, 12);
    for (order, k) in [(1, 0.0), (2, 0.5), (3, 0.1), (4, 0.0)] {
        let model = NgramModel::train(&corpus, order, k).unwrap();
        let mut words: Vec<String> = model.predictable_tokens().to_vec();
        words.push("never-seen".into());
        for _ in 0..1000 {
            let len = rng.random_range(0..6);
            let prefix: Vec<String> = (0..len)
                .map(|_| words.choose(&mut rng).unwrap().clone())
                .collect();
            let total: f64 = model.full_distribution(&prefix).iter().map(|p| p.1).sum();
            assert!((total - 1.0).abs() < 1e-9, "order {order}: {total}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn top_one_is_the_argmax(seed in any::<u64>(), order in 1usize..4, k in prop_oneof![Just(0.0), 0.01f64..2.0]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng, 8, 10, 6);
        let model = NgramModel::train(&corpus, order, k).unwrap();
        let v = model.predictable_size();
        let tokens = model.predictable_tokens().to_vec();
        for _ in 0..10 {
            let len = rng.random_range(0..4);
            let prefix: Vec<String> = (0..len).map(|_| tokens.choose(&mut rng).unwrap().clone()).collect();
            let all = model.next_token_distribution(&prefix, v).unwrap();
            prop_assert_eq!(all.len(), v);
            let mut best = 0;
            for i in 1..all.len() {
                let (t, lp) = (&all.tokens()[i], all.logprobs()[i]);
                let (bt, blp) = (&all.tokens()[best], all.logprobs()[best]);
                if lp > blp || (lp == blp && token_order(t, bt).is_lt()) {
                    best = i;
                }
            }
            let one = model.next_token_distribution(&prefix, 1).unwrap();
            prop_assert_eq!(&one.tokens()[0], &all.tokens()[best]);
            prop_assert_eq!(one.logprobs()[0], all.logprobs()[best]);
        }
    }

    /// With k = 0 and an order longer than any story, every story's path is
    /// memorized. When stories start with distinct words, replacing a later
    /// token leaves a transition the model never saw, so the corrupted copy
    /// can only score worse.
    #[test]
    fn memorized_corpus_beats_corrupted_copies(seed in any::<u64>(), stories in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words: Vec<String> = (0..6).map(|i| format!("w{i}")).collect();
        let corpus: Vec<Vec<String>> = (0..stories)
            .map(|s| {
                let len = rng.random_range(2..7);
                let mut story = vec![format!("start{s}")];
                story.extend((1..len).map(|_| words.choose(&mut rng).unwrap().clone()));
                story
            })
            .collect();
        let text: String = corpus.iter().map(|s| s.join(" ") + "\n").collect();
        let model = NgramModel::train(&text, 8, 0.0).unwrap();
        let ppl = |stories: &[Vec<String>]| -> f64 {
            let mut nll = 0.0;
            let mut n = 0.0;
            for s in stories {
                let mut target = s.clone();
                target.push(EOS.to_string());
                let p = model.sequence_perplexity(&[], &target).unwrap();
                nll += target.len() as f64 * p.ln();
                n += target.len() as f64;
            }
            (nll / n).exp()
        };
        let clean = ppl(&corpus);
        let mut corrupted = corpus.clone();
        let victim = rng.random_range(0..stories);
        let pos = rng.random_range(1..corrupted[victim].len());
        let old = corrupted[victim][pos].clone();
        corrupted[victim][pos] = words.iter().find(|w| **w != old).unwrap().clone();
        prop_assert!(clean <= ppl(&corrupted), "{} > {}", clean, ppl(&corrupted));
    }
}

#[test]
fn greedy_text_beats_shuffled_text() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let corpus = random_corpus(&mut rng, 25, 200, 15);
    let model = NgramModel::train(&corpus, 2, 0.1).unwrap();
    let words = model.predictable_tokens().to_vec();
    for _ in 0..50 {
        let ctx = vec![words.choose(&mut rng).unwrap().clone()];
        let mut prefix = ctx.clone();
        let mut story = Vec::new();
        for _ in 0..12 {
            let best = model.next_token_distribution(&prefix, 1).unwrap().tokens()[0].clone();
            prefix.push(best.clone());
            story.push(best);
        }
        let mut shuffled = story.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let a = model.sequence_perplexity(&ctx, &story).unwrap();
        let b = model.sequence_perplexity(&ctx, &shuffled).unwrap();
        assert!(a <= b, "{story:?}: {a} > {b}");
    }
}
