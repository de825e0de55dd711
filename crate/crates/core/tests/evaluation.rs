use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use undermine::corpus::{ArgumentPost, Corpus, CounterTriple, Split};
use undermine::evaluation::{
    align, bleu_n, compare_reports, count_chunks, evaluate_run, meteor, paired_t_one_tailed,
    score_from_counts, weak_premise_coverage, GeneratedCounter, ReferenceMode,
};
use undermine::text::{words, StopWords};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn bleu_examples() {
    assert!(close(bleu_n("a b c d", &["a b c d"], 1).unwrap(), 100.0, 1e-9));
    assert!(close(bleu_n("a b c d", &["a b x y"], 1).unwrap(), 50.0, 1e-9));
    let expected = 100.0 * (0.5f64 * (1.0 / 3.0)).sqrt();
    assert!(close(bleu_n("a b c d", &["a b x y"], 2).unwrap(), expected, 1e-9));
    assert!(close(expected, 40.82, 5e-3));
    assert_eq!(bleu_n("", &["a b"], 1).unwrap(), 0.0);
}

#[test]
fn meteor_examples() {
    assert_eq!(meteor("a b", &["c d"]).unwrap(), 0.0);
    assert!(close(meteor("a b c d", &["a b c d"]).unwrap(), 0.9922, 5e-5));
    assert!(close(meteor("a b", &["b a"]).unwrap(), 0.5, 1e-12));
}

#[test]
fn coverage_examples() {
    let stop = StopWords::english();
    let premise = "rich people avoid wealth taxes";
    assert_eq!(weak_premise_coverage(premise, premise, &stop), Some(1.0));
    let got = weak_premise_coverage("wealth and taxes matter", "rich people avoid wealth taxes today", &stop);
    // premise content: rich people avoid wealth taxes today (6), shared 2
    assert!(close(got.unwrap(), 2.0 / 6.0, 1e-12));
    assert_eq!(
        weak_premise_coverage("poor cats", "rich dogs bark loudly", &stop),
        Some(0.0)
    );
    assert_eq!(
        weak_premise_coverage("poor rich", "rich dogs bark loudly", &stop),
        Some(0.25)
    );
}

#[test]
fn t_test_examples() {
    let r = paired_t_one_tailed(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
    assert!(close(r.t, 0.0, 1e-12) && close(r.p, 0.5, 1e-12));
    let r = paired_t_one_tailed(&[2.0, 4.0, 6.0, 8.0], &[1.0, 3.0, 5.0, 9.0]).unwrap();
    assert!(close(r.t, 1.0, 1e-12));
    assert_eq!(r.df, 3);
    // P(T_3 > 1) = 1/2 - (atan(1/√3) + (1/√3)/(1 + 1/3)) / π
    let x = 1.0 / 3f64.sqrt();
    let oracle = 0.5 - (x.atan() + x / (1.0 + x * x)) / std::f64::consts::PI;
    assert!(close(r.p, oracle, 1e-9), "{} vs {}", r.p, oracle);
    assert!(close(r.p, 0.196, 1e-3));
    assert!(paired_t_one_tailed(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(paired_t_one_tailed(&[1.0], &[2.0]).is_err());
}

/// Every one-to-one monotone-free matching of equal tokens, by search.
fn best_by_search(c: &[String], r: &[String]) -> (usize, usize) {
    fn go(i: usize, c: &[String], r: &[String], used: &mut Vec<bool>, acc: &mut Vec<(usize, usize)>, best: &mut (usize, usize)) {
        if i == c.len() {
            let m = acc.len();
            let ch = count_chunks(acc);
            if m > best.0 || (m == best.0 && ch < best.1) {
                *best = (m, ch);
            }
            return;
        }
        go(i + 1, c, r, used, acc, best);
        for j in 0..r.len() {
            if !used[j] && c[i] == r[j] {
                used[j] = true;
                acc.push((i, j));
                go(i + 1, c, r, used, acc, best);
                acc.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, usize::MAX);
    go(0, c, r, &mut vec![false; r.len()], &mut Vec::new(), &mut best);
    if best.0 == 0 {
        best.1 = 0;
    }
    best
}

fn small_text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 1..6).prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn alignment_has_maximum_matches(c in small_text(), r in small_text()) {
        let (c, r) = (words(&c), words(&r));
        let a = align(&c, &r);
        let (m, best_chunks) = best_by_search(&c, &r);
        prop_assert_eq!(a.len(), m);
        // greedy longest-run is never more than one chunk off the optimum on short inputs
        prop_assert!(count_chunks(&a) <= best_chunks + 1);
        for &(i, j) in &a {
            prop_assert_eq!(&c[i], &r[j]);
        }
        let cs: BTreeSet<usize> = a.iter().map(|p| p.0).collect();
        let rs: BTreeSet<usize> = a.iter().map(|p| p.1).collect();
        prop_assert_eq!(cs.len(), a.len());
        prop_assert_eq!(rs.len(), a.len());
    }

    #[test]
    fn scores_are_bounded_and_self_maximal(c in small_text(), r in small_text(), extra in small_text()) {
        let m = meteor(&c, &[&r]).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert!(meteor(&c, &[&c]).unwrap() >= m);
        prop_assert!(meteor(&c, &[&r, &extra]).unwrap() >= m);
        for n in 1..=2 {
            let b = bleu_n(&c, &[&r], n).unwrap();
            prop_assert!((0.0..=100.0).contains(&b));
            if words(&c).len() >= n {
                prop_assert!(close(bleu_n(&c, &[&c], n).unwrap(), 100.0, 1e-9));
            }
            // a closer-length extra reference may tighten the brevity penalty
            let (lc, lr, le) = (words(&c).len(), words(&r).len(), words(&extra).len());
            if lc.abs_diff(le) > lc.abs_diff(lr) || le <= lc {
                prop_assert!(bleu_n(&c, &[&r, &extra], n).unwrap() >= b - 1e-9);
            }
        }
    }

    #[test]
    fn score_matches_closed_form(cand in 1usize..20, reference in 1usize..20, frac in 0.0f64..1.0, cfrac in 0.0f64..1.0) {
        let matches = ((cand.min(reference) as f64) * frac).ceil().max(1.0) as usize;
        let chunks = 1 + ((matches - 1) as f64 * cfrac) as usize;
        let p = matches as f64 / cand as f64;
        let r = matches as f64 / reference as f64;
        let f = 10.0 * p * r / (r + 9.0 * p);
        let expected = f * (1.0 - 0.5 * (chunks as f64 / matches as f64).powi(3));
        prop_assert!(close(score_from_counts(cand, reference, matches, chunks), expected, 1e-12));
    }

    #[test]
    fn coverage_is_a_fraction(c in "[a-z ]{0,40}", p in "[a-z ]{0,40}") {
        let stop = StopWords::english();
        if let Some(v) = weak_premise_coverage(&c, &p, &stop) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if let Some(v) = weak_premise_coverage(&p, &p, &stop) {
            prop_assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn t_flips_sign_on_swap(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..20)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let (Ok(x), Ok(y)) = (paired_t_one_tailed(&a, &b), paired_t_one_tailed(&b, &a)) {
            prop_assert!(close(x.t, -y.t, 1e-9));
            prop_assert!(close(x.p + y.p, 1.0, 1e-9));
        }
    }
}

fn fixture() -> Corpus {
    let mut posts = Vec::new();
    let mut triples = Vec::new();
    for i in 0..6 {
        let premises: Vec<String> = vec![
            format!("premise zero topic{i} about schools"),
            format!("premise one topic{i} about roads and bridges"),
            format!("premise two topic{i} about hospitals"),
        ];
        let attacked = BTreeSet::from([i % 3]);
        posts.push(ArgumentPost {
            id: format!("post-{i}"),
            claim: format!("claim {i}"),
            premises: premises.clone(),
            weak_indices: attacked.clone(),
            split: Split::Test,
        });
        triples.push(CounterTriple {
            post_id: format!("post-{i}"),
            claim: format!("claim {i}"),
            premises,
            attacked_indices: attacked,
            counter: format!("that is wrong about topic{i} because costs rise"),
            full_comment: Some(format!("i disagree . that is wrong about topic{i} because costs rise . thanks")),
        });
    }
    Corpus::new(posts, triples).unwrap()
}

fn gold_run(corpus: &Corpus) -> Vec<GeneratedCounter> {
    corpus
        .triples()
        .iter()
        .map(|t| GeneratedCounter {
            post_id: t.post_id.clone(),
            attacked_indices: t.attacked_indices.iter().copied().collect(),
            counter: t.counter.clone(),
            seed: 0,
        })
        .collect()
}

#[test]
fn identity_run_is_perfect() {
    let corpus = fixture();
    let report = evaluate_run(&gold_run(&corpus), &corpus, ReferenceMode::CounterSentences, &StopWords::english()).unwrap();
    assert_eq!(report.per_example.len(), 6);
    assert!(close(report.aggregates.bleu1, 100.0, 1e-9));
    assert!(report.aggregates.meteor >= 0.99);
    let full = evaluate_run(&gold_run(&corpus), &corpus, ReferenceMode::FullComment, &StopWords::english()).unwrap();
    assert!(full.aggregates.bleu1 < 100.0);
}

#[test]
fn aggregates_equal_recomputed_means() {
    let corpus = fixture();
    let mut run = gold_run(&corpus);
    for (i, g) in run.iter_mut().enumerate() {
        g.counter = format!("roads {} hospitals", "costs ".repeat(i));
    }
    let report = evaluate_run(&run, &corpus, ReferenceMode::CounterSentences, &StopWords::english()).unwrap();
    let n = report.per_example.len() as f64;
    let mean = |f: fn(&undermine::evaluation::ExampleScores) -> f64| report.per_example.iter().map(f).sum::<f64>() / n;
    assert!(close(report.aggregates.bleu1, mean(|e| e.bleu1), 1e-12));
    assert!(close(report.aggregates.bleu2, mean(|e| e.bleu2), 1e-12));
    assert!(close(report.aggregates.meteor, mean(|e| e.meteor), 1e-12));
    let covs: Vec<f64> = report.per_example.iter().filter_map(|e| e.coverage).collect();
    assert!(close(report.aggregates.coverage, covs.iter().sum::<f64>() / covs.len() as f64, 1e-12));
    let binned: usize = report.coverage_histogram.iter().map(|b| b.count).sum();
    assert_eq!(binned, covs.len());
    let ids: Vec<&str> = report.per_example.iter().map(|e| e.post_id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn empty_or_unresolved_runs_fail() {
    let corpus = fixture();
    let stop = StopWords::english();
    assert!(evaluate_run(&[], &corpus, ReferenceMode::CounterSentences, &stop).is_err());
    let mut run = gold_run(&corpus);
    run[0].post_id = "nowhere".into();
    assert!(evaluate_run(&run, &corpus, ReferenceMode::CounterSentences, &stop).is_err());
}

#[test]
fn comparison_calls_the_t_test_per_metric() {
    let corpus = fixture();
    let stop = StopWords::english();
    let gold = gold_run(&corpus);
    let mut noisy = gold.clone();
    for (i, g) in noisy.iter_mut().enumerate() {
        g.counter = g.counter.split(' ').take(2 + i % 4).collect::<Vec<_>>().join(" ");
    }
    let a = evaluate_run(&gold, &corpus, ReferenceMode::CounterSentences, &stop).unwrap();
    let b = evaluate_run(&noisy, &corpus, ReferenceMode::CounterSentences, &stop).unwrap();
    let sig = compare_reports(&a, "gold", &b, "noisy").unwrap();
    let by_metric: BTreeMap<&str, _> = sig.iter().map(|s| (s.metric.as_str(), s)).collect();
    let xs: Vec<f64> = a.per_example.iter().map(|e| e.meteor).collect();
    let ys: Vec<f64> = b.per_example.iter().map(|e| e.meteor).collect();
    let direct = paired_t_one_tailed(&xs, &ys).unwrap();
    let m = by_metric["meteor"];
    assert_eq!(m.t, Some(direct.t));
    assert_eq!(m.p, Some(direct.p));

    let same = compare_reports(&a, "gold", &a, "gold").unwrap();
    assert!(same.iter().all(|s| s.t.is_none() && s.note.is_some()));
}
