//! Property tests for the invariants of each module.

use std::collections::HashSet;
use std::sync::Arc;

use ndarray::Array2;
use proptest::prelude::*;
use simsse::attacks::{
    ihop_attack, refined_score_attack, score_attack, solve_linear_assignment, CostMatrix, IhopParams,
};
use simsse::cooc::{cooccurrence_matrix, similarity_report, CoocMatrix};
use simsse::corpus::porter::stem;
use simsse::corpus::{build_universe, vectorize, Corpus, DocumentVector, KeywordSet, KeywordUniverse, RawDocument, Tokenizer};
use simsse::fixtures::{corpus_from_bits, four_keyword_corpus};
use simsse::leakage::{build_index, observe_queries, select_known_queries};
use simsse::split::split_uniform;
use simsse::stats::{
    expit, logit, max_index_size, ols, pinball, quantile_regression, QuantileFit,
};
use simsse::synth::{sample_corpus, BernoulliModel, DocumentModel};

fn corpus_strategy(max_m: usize, max_n: usize) -> impl Strategy<Value = Corpus> {
    (1..=max_m).prop_flat_map(move |m| {
        prop::collection::vec(prop::collection::vec(any::<bool>(), m), 0..=max_n).prop_map(move |docs| {
            let universe = Arc::new(KeywordUniverse::synthetic(m));
            let documents = docs
                .iter()
                .enumerate()
                .map(|(i, bits)| DocumentVector {
                    id: format!("d{i}"),
                    timestamp: Some(i as i64),
                    membership: KeywordSet::from_indices(m, bits.iter().enumerate().filter(|b| *b.1).map(|b| b.0)),
                })
                .collect();
            Corpus::new(universe, documents)
        })
    })
}

const WORDS: &[&str] = &[
    "running", "runner", "encryption", "encrypted", "keyword", "keywords", "index", "indexes", "attack", "attacks",
    "the", "and", "query", "queries", "document", "documents", "similar", "similarity", "leakage", "server",
];

fn text_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec((prop::sample::select(WORDS), prop::sample::select(&[" ", ", ", ". ", "\n", "-"][..])), 0..30)
        .prop_map(|parts| parts.into_iter().map(|(w, s)| format!("{w}{s}")).collect())
}

fn brute_force(costs: &Array2<f64>) -> f64 {
    fn go(costs: &Array2<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
        if row == costs.nrows() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..costs.ncols() {
            if !used[c] {
                used[c] = true;
                best = best.min(costs[[row, c]] + go(costs, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(costs, 0, &mut vec![false; costs.ncols()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tokenize_is_deterministic(text in text_strategy()) {
        let t = Tokenizer::english();
        prop_assert_eq!(t.tokenize(&text), t.tokenize(&text));
        for tok in t.tokenize(&text) {
            prop_assert!(!tok.is_empty() && tok.chars().all(|c| c.is_ascii_lowercase()));
        }
    }

    #[test]
    fn universe_ignores_document_order(texts in prop::collection::vec(text_strategy(), 3..12), seed in any::<u64>()) {
        let t = Tokenizer::english();
        let raws: Vec<RawDocument> = texts
            .iter()
            .enumerate()
            .map(|(i, text)| RawDocument { id: format!("r{i}"), timestamp: None, text: text.clone() })
            .collect();
        let mut shuffled = raws.clone();
        let rot = (seed % raws.len() as u64) as usize;
        shuffled.rotate_left(rot);
        shuffled.reverse();
        let a = build_universe(&raws, 3, &t);
        let b = build_universe(&shuffled, 3, &t);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.keywords(), b.keywords()),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one order failed and the other did not"),
        }
    }

    #[test]
    fn membership_bounded_by_tokens(text in text_strategy()) {
        let t = Tokenizer::english();
        let raw = RawDocument { id: "x".into(), timestamp: None, text: text.clone() };
        let universe = KeywordUniverse::new(WORDS.iter().map(|w| stem(w)).collect::<HashSet<_>>().into_iter().collect()).unwrap();
        let v = vectorize(&raw, &universe, &t);
        prop_assert!(v.membership.count_ones() <= t.tokenize(&text).len());
    }

    #[test]
    fn cooccurrence_symmetric_and_bounded(c in corpus_strategy(8, 40)) {
        let m = cooccurrence_matrix(&c);
        let k = m.counts();
        for i in 0..m.m() {
            for j in 0..m.m() {
                prop_assert_eq!(k[[i, j]], k[[j, i]]);
                prop_assert!(k[[i, j]] <= k[[i, i]].min(k[[j, j]]));
            }
        }
    }

    #[test]
    fn epsilon_invariant_under_keyword_permutation(
        a in corpus_strategy(6, 30),
        seed in any::<u64>(),
    ) {
        prop_assume!(a.n() >= 2);
        let m = a.m();
        let b = sample_corpus(&DocumentModel::Bernoulli(BernoulliModel::new(vec![0.4; m]).unwrap()), 17, seed);
        let ca = cooccurrence_matrix(&a);
        let cb = cooccurrence_matrix(&b);
        let perm: Vec<usize> = (0..m).map(|i| (i * 5 + (seed as usize % m)) % m).collect();
        let perm_ok = perm.iter().collect::<HashSet<_>>().len() == m;
        prop_assume!(perm_ok);
        let permute = |c: &CoocMatrix| {
            CoocMatrix::new(Array2::from_shape_fn((m, m), |(i, j)| c.get(perm[i], perm[j])), c.n()).unwrap()
        };
        let e1 = similarity_report(&ca, &cb).unwrap().epsilon;
        let e2 = similarity_report(&permute(&ca), &permute(&cb)).unwrap().epsilon;
        prop_assert!((e1 - e2).abs() <= 1e-12 * e1.max(1.0));
    }

    #[test]
    fn uniform_split_is_disjoint(c in corpus_strategy(4, 40), n_atk in 0usize..20, n_ind in 0usize..20, seed in any::<u64>()) {
        prop_assume!(n_atk + n_ind <= c.n());
        let pair = split_uniform(&c, n_atk, n_ind, seed).unwrap();
        let a: HashSet<&str> = pair.atk.documents().iter().map(|d| d.id.as_str()).collect();
        prop_assert_eq!(a.len(), n_atk);
        prop_assert_eq!(pair.ind.n(), n_ind);
        prop_assert!(pair.ind.documents().iter().all(|d| !a.contains(d.id.as_str())));
    }

    #[test]
    fn unpadded_full_observation_is_a_permutation(c in corpus_strategy(7, 30), seed in any::<u64>()) {
        let m = c.m();
        let index = build_index(&c, seed, 1).unwrap();
        let (view, truth) = observe_queries(&index, m, seed ^ 1).unwrap();
        let cind = cooccurrence_matrix(&c);
        let pi: Vec<usize> = view.queries().iter().map(|&t| truth.keyword(t).unwrap()).collect();
        prop_assert_eq!(pi.iter().collect::<HashSet<_>>().len(), m);
        for a in 0..m {
            for b in 0..m {
                prop_assert_eq!(view.qcooc()[[a, b]], cind.get(pi[a], pi[b]));
            }
        }
    }

    #[test]
    fn padding_keeps_true_results(c in corpus_strategy(6, 30), g in 1usize..6, seed in any::<u64>()) {
        let index = build_index(&c, seed, g).unwrap();
        for kw in 0..c.m() {
            let post: HashSet<u32> = index.postings(kw).iter().copied().collect();
            prop_assert_eq!(post.len(), index.postings(kw).len());
            prop_assert_eq!(post.len() % g, 0);
            for (d, doc) in c.documents().iter().enumerate() {
                if doc.membership.contains(kw) {
                    prop_assert!(post.contains(&(d as u32)));
                }
            }
        }
    }

    #[test]
    fn assignment_matches_enumeration(rows in 0usize..=6, extra in 0usize..=3, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let cols = rows + extra;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let costs = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(0..20) as f64);
        let a = solve_linear_assignment(&CostMatrix::new(costs.clone()).unwrap()).unwrap();
        prop_assert_eq!(a.cost, brute_force(&costs));
        prop_assert_eq!(a.cols.iter().collect::<HashSet<_>>().len(), rows);
    }

    #[test]
    fn ihop_is_injective_and_deterministic(c in corpus_strategy(8, 40), seed in any::<u64>(), l in 1usize..8) {
        prop_assume!(c.n() >= 2 && l <= c.m());
        let catk = cooccurrence_matrix(&c);
        let index = build_index(&c, seed, 1).unwrap();
        let (view, _) = observe_queries(&index, l, seed).unwrap();
        let params = IhopParams { n_iters: 30, ..IhopParams::default() };
        let p = ihop_attack(&view, &catk, &params, seed).unwrap();
        prop_assert!(p.is_injective());
        prop_assert_eq!(p, ihop_attack(&view, &catk, &params, seed).unwrap());
    }

    #[test]
    fn score_attacks_ignore_count_scaling(c in corpus_strategy(8, 40), factor in 1u64..50, seed in any::<u64>()) {
        prop_assume!(c.n() >= 1 && c.m() >= 2);
        let catk = cooccurrence_matrix(&c);
        let scaled = CoocMatrix::new(catk.counts().mapv(|v| v * factor), catk.n() * factor as usize).unwrap();
        let index = build_index(&c, seed, 1).unwrap();
        let (view, truth) = observe_queries(&index, c.m(), seed).unwrap();
        let view = select_known_queries(&view, &truth, 1, seed).unwrap();
        prop_assert_eq!(score_attack(&view, &catk).unwrap(), score_attack(&view, &scaled).unwrap());
        prop_assert_eq!(
            refined_score_attack(&view, &catk, 2).unwrap(),
            refined_score_attack(&view, &scaled, 2).unwrap()
        );
    }

    #[test]
    fn expit_inverts_logit(p in 1e-9f64..(1.0 - 1e-9)) {
        prop_assert!((expit(logit(p).unwrap()) - p).abs() <= 1e-12);
    }

    #[test]
    fn ols_exact_on_collinear_data(a in -10.0f64..10.0, b in -10.0f64..10.0, x0 in -5.0f64..5.0, dx in 0.1f64..2.0) {
        let x: Vec<f64> = (0..10).map(|i| x0 + dx * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| a + b * v).collect();
        let f = ols(&x, &y).unwrap();
        prop_assert!((f.a - a).abs() < 1e-9 && (f.b - b).abs() < 1e-9);
    }

    #[test]
    fn quantile_fit_beats_ols_line(
        pts in prop::collection::vec((-4.0f64..0.0, -3.0f64..3.0), 10..60),
        alpha in prop::sample::select(vec![0.1, 0.25, 0.5, 0.75, 0.9, 0.95]),
    ) {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.0 * 0.5 + p.1).collect();
        let Ok(q) = quantile_regression(&x, &y, alpha) else { return Ok(()) };
        let Ok(o) = ols(&x, &y) else { return Ok(()) };
        let ols_loss: f64 = x.iter().zip(&y).map(|(xi, yi)| pinball(yi - o.a - o.b * xi, alpha)).sum();
        prop_assert!(q.pinball_loss <= ols_loss + 1e-9);
    }

    #[test]
    fn max_index_size_brackets(a in -8.0f64..2.0, b in -4.0f64..-0.1, beta in 0.001f64..0.9, bound in prop::option::of(1u64..100_000)) {
        let fit = QuantileFit { a, b, alpha: 0.95, pinball_loss: 0.0, n_points: 0 };
        if let Ok(n) = max_index_size(&fit, beta, bound) {
            let atk = bound.map(|v| v as f64);
            if n > 0 {
                prop_assert!(fit.max_accuracy(n as f64, atk) <= beta);
            }
            prop_assert!(fit.max_accuracy((n + 1) as f64, atk) > beta);
        }
    }
}

#[test]
fn tokenize_is_not_idempotent_under_porter() {
    // Re-stemming a stem can shorten it further, so tokenize is only
    // deterministic, not idempotent.
    assert_eq!(stem("agreed"), "agre");
    assert_eq!(stem("agre"), "agr");
}

#[test]
fn same_seed_same_corpus() {
    let model = DocumentModel::Bernoulli(BernoulliModel::new(vec![0.1, 0.5, 0.9]).unwrap());
    let a = sample_corpus(&model, 500, 42);
    let b = sample_corpus(&model, 500, 42);
    let mut ja = Vec::new();
    let mut jb = Vec::new();
    a.write_json(&mut ja).unwrap();
    b.write_json(&mut jb).unwrap();
    assert_eq!(ja, jb);
}

#[test]
fn cofrequency_converges_to_theory() {
    use simsse::cooc::cofrequency;
    use simsse::synth::{sample_cooccurrence, theoretical_coprob};
    let p = vec![0.05, 0.2, 0.5, 0.7, 0.95];
    let model = BernoulliModel::new(p).unwrap();
    let n = 100_000;
    let emp = cofrequency(&sample_cooccurrence(&DocumentModel::Bernoulli(model.clone()), n, 8)).unwrap();
    let theory = theoretical_coprob(&model);
    for ((i, j), &t) in theory.indexed_iter() {
        let bound = 4.0 * (t * (1.0 - t) / n as f64).sqrt();
        assert!((emp[[i, j]] - t).abs() <= bound, "({i},{j}): {} vs {t}", emp[[i, j]]);
    }
}

#[test]
fn four_keyword_attacks_agree() {
    let c = four_keyword_corpus();
    let catk = cooccurrence_matrix(&c);
    let index = build_index(&c, 3, 1).unwrap();
    let (view, truth) = observe_queries(&index, 4, 3).unwrap();
    let view = select_known_queries(&view, &truth, 1, 3).unwrap();
    let s = score_attack(&view, &catk).unwrap();
    let r = refined_score_attack(&view, &catk, 1).unwrap();
    for &t in view.queries() {
        assert_eq!(s.keyword(t), truth.keyword(t));
        assert_eq!(r.keyword(t), truth.keyword(t));
    }
    let _ = corpus_from_bits(1, &[]);
}
