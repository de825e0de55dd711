use std::collections::BTreeSet;
use std::io::Write;

use proptest::prelude::*;
use undermine::corpus::{
    build_triples, load_corpus, read_corpus, synth_corpus, CommentRecord, PostRecord, Split,
    DEFAULT_MARKER,
};
use undermine::pipeline::{content_tokens, overlap_count};
use undermine::text::{default_synth_vocab, StopWords};
use undermine::ErrorKind;

fn record(quotes: &[&[i64]]) -> PostRecord {
    PostRecord {
        id: "p1".into(),
        title: "taxes should be higher".into(),
        sentences: vec!["first".into(), "second".into(), "third".into()],
        comments: quotes
            .iter()
            .map(|q| CommentRecord {
                quoted: q.to_vec(),
                text: "counter text".into(),
                full_text: None,
            })
            .collect(),
        split: Split::Train,
    }
}

#[test]
fn weak_set_is_the_union_of_quotes() {
    let mapped = build_triples(&record(&[&[1], &[1, 2]])).unwrap();
    assert_eq!(mapped.triples.len(), 2);
    assert_eq!(mapped.post.weak_indices, BTreeSet::from([1, 2]));
}

#[test]
fn post_without_comments_is_kept() {
    let mapped = build_triples(&record(&[])).unwrap();
    assert!(mapped.triples.is_empty());
    assert!(mapped.post.weak_indices.is_empty());
}

#[test]
fn repeated_quotes_collapse() {
    let mapped = build_triples(&record(&[&[2, 2]])).unwrap();
    assert_eq!(mapped.triples[0].attacked_indices, BTreeSet::from([2]));
}

#[test]
fn out_of_range_quote_names_the_post() {
    let err = build_triples(&record(&[&[3]])).unwrap_err();
    assert!(err.to_string().contains("p1"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn malformed_line_reports_its_number() {
    let good = serde_json::to_string(&record(&[&[0]])).unwrap();
    let text = format!("{good}\n{{\"id\": \"x\"\n");
    let err = read_corpus(text.as_bytes()).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn unknown_fields_are_rejected() {
    let text = r#"{"id":"a","title":"t","sentences":["s"],"split":"test","extra":1}"#;
    assert!(read_corpus(text.as_bytes()).is_err());
}

#[test]
fn missing_file_is_an_error() {
    let err = load_corpus(std::path::Path::new("/nonexistent/corpus.jsonl")).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn file_round_trip_preserves_the_corpus() {
    let corpus = synth_corpus(5, 40, &default_synth_vocab()).unwrap();
    let mut file = tempfile::NamedTempFile::new().unwrap();
    corpus.write_jsonl(&mut file).unwrap();
    file.flush().unwrap();
    let back = load_corpus(file.path()).unwrap();
    assert_eq!(back.posts(), corpus.posts());
    assert_eq!(back.triples(), corpus.triples());
    assert_eq!(back.manifest(), corpus.manifest());
}

#[test]
fn synth_is_byte_deterministic() {
    let vocab = default_synth_vocab();
    let mut a = Vec::new();
    let mut b = Vec::new();
    synth_corpus(1, 50, &vocab).unwrap().write_jsonl(&mut a).unwrap();
    synth_corpus(1, 50, &vocab).unwrap().write_jsonl(&mut b).unwrap();
    assert_eq!(a, b);
    let mut c = Vec::new();
    synth_corpus(2, 50, &vocab).unwrap().write_jsonl(&mut c).unwrap();
    assert_ne!(a, c);
}

#[test]
fn synth_rejects_zero_posts() {
    assert!(synth_corpus(1, 0, &default_synth_vocab()).is_err());
}

#[test]
fn synth_marker_appears_in_exactly_the_weak_premises() {
    let corpus = synth_corpus(1, 100, &default_synth_vocab()).unwrap();
    for post in corpus.posts() {
        assert!(!post.weak_indices.is_empty(), "{}", post.id);
        for (i, premise) in post.premises.iter().enumerate() {
            let marked = premise.split_whitespace().any(|w| w == DEFAULT_MARKER);
            assert_eq!(marked, post.weak_indices.contains(&i), "{} premise {i}", post.id);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synth_invariants(seed in any::<u64>(), n in 1usize..40) {
        let corpus = synth_corpus(seed, n, &default_synth_vocab()).unwrap();
        let stop = StopWords::english();
        prop_assert_eq!(corpus.posts().len(), n);
        for post in corpus.posts() {
            prop_assert!((3..=8).contains(&post.premises.len()));
            let share = post.weak_indices.len() as f64 / post.premises.len() as f64;
            prop_assert!(share > 0.0 && share <= 1.0);
        }
        for t in corpus.triples() {
            let post = corpus.post(&t.post_id).unwrap();
            prop_assert!(t.attacked_indices.is_subset(&post.weak_indices));
            for &i in &t.attacked_indices {
                let premise = &post.premises[i];
                let total = content_tokens(premise, &stop).len();
                let shared = overlap_count(&t.counter, premise, &stop);
                prop_assert!(2 * shared >= total, "{}: {}/{}", t.post_id, shared, total);
            }
        }
        let counted: usize = corpus.manifest().splits.values().map(|c| c.posts).sum();
        prop_assert_eq!(counted, n);
    }
}
