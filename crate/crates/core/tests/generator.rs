use std::collections::BTreeSet;

use candle_core::{Tensor, D};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use undermine::corpus::{synth_corpus, CounterTriple};
use undermine::generator::{
    augment, build_sequence, counter_baseline_sequence, encode_argument, generate_counter_ids,
    joint_loss, make_distractor, sample, truncated_distribution, GeneratorConfig, GeneratorModel,
    GeneratorTrainer, SamplingConfig, TokenType, TrainingSequence, Variant,
};
use undermine::text::{default_synth_vocab, Special, Vocab};

fn vocab_for(triples: &[CounterTriple]) -> Vocab {
    Vocab::build(
        triples
            .iter()
            .flat_map(|t| std::iter::once(t.claim.as_str()).chain(t.premises.iter().map(String::as_str)).chain([t.counter.as_str()])),
    )
}

fn synth_triples(seed: u64, n: usize) -> Vec<CounterTriple> {
    synth_corpus(seed, n, &default_synth_vocab()).unwrap().triples().to_vec()
}

fn tiny(vocab: Vocab, variant: Variant) -> GeneratorModel {
    GeneratorModel::new(
        vocab,
        GeneratorConfig {
            hidden: 16,
            layers: 1,
            heads: 2,
            context: 128,
            variant,
            seed: 3,
        },
    )
    .unwrap()
}

/// Expected type of every argument position, recomputed from the triple.
fn expected_types(triple: &CounterTriple, vocab: &Vocab, variant: Variant) -> Vec<TokenType> {
    let mut types = vec![TokenType::Arg; 1 + vocab.encode(&triple.claim).len()];
    for (i, p) in triple.premises.iter().enumerate() {
        let weak = variant != Variant::CounterBaseline && triple.attacked_indices.contains(&i);
        let n = vocab.encode(p).len() + if weak && variant == Variant::WithWeak { 2 } else { 0 };
        types.extend(std::iter::repeat_n(if weak { TokenType::Weak } else { TokenType::Arg }, n));
    }
    types
}

fn check_layout(seq: &TrainingSequence, triple: &CounterTriple, vocab: &Vocab) {
    let ids = &seq.token_ids;
    assert_eq!(ids.len(), seq.token_type_ids.len());
    assert_eq!(ids[0], Special::Bos.id());
    assert_eq!(*ids.last().unwrap(), Special::Eos.id());
    assert_eq!(ids.iter().filter(|&&t| t == Special::Counter.id()).count(), 1);
    assert_eq!(ids[seq.counter_start], Special::Counter.id());
    assert_eq!(&seq.token_type_ids[..seq.counter_start], expected_types(triple, vocab, seq.variant));
    assert!(seq.token_type_ids[seq.counter_start..].iter().all(|&t| t == TokenType::Counter));
    for (p, t) in seq.lm_targets.iter().enumerate() {
        let in_counter = p >= seq.counter_start && p + 1 < ids.len();
        assert_eq!(t.is_some(), in_counter);
        if let Some(t) = t {
            assert_eq!(*t, ids[p + 1]);
        }
    }
}

#[test]
fn encoding_contract_on_random_triples() {
    let triples = synth_triples(21, 60);
    let vocab = vocab_for(&triples);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let t = &triples[rng.random_range(0..triples.len())];
        let without = build_sequence(t, &t.counter, 1, Variant::WithoutWeak, &vocab, 512).unwrap();
        let with = build_sequence(t, &t.counter, 1, Variant::WithWeak, &vocab, 512).unwrap();
        let base = counter_baseline_sequence(t, &t.counter, &vocab, 512).unwrap();
        for s in [&without, &with, &base] {
            check_layout(s, t, &vocab);
        }
        assert_eq!(with.len() - without.len(), 2 * t.attacked_indices.len());
        assert_eq!(with.token_ids.iter().filter(|&&i| i == Special::Weak.id()).count(), 2 * t.attacked_indices.len());
        assert!(!base.token_type_ids.contains(&TokenType::Weak));
        assert_eq!(base.token_ids, without.token_ids);
        assert_eq!(base.counter_start, without.counter_start);
    }
}

#[test]
fn toggling_one_premise_changes_only_its_types() {
    let t = &synth_triples(2, 10)[0];
    let vocab = vocab_for(std::slice::from_ref(t));
    let (ids_a, types_a) = encode_argument(&vocab, &t.claim, &t.premises, &t.attacked_indices, Variant::WithoutWeak).unwrap();
    let toggled = (0..t.premises.len()).find(|i| !t.attacked_indices.contains(i)).unwrap();
    let mut attacked = t.attacked_indices.clone();
    attacked.insert(toggled);
    let (ids_b, types_b) = encode_argument(&vocab, &t.claim, &t.premises, &attacked, Variant::WithoutWeak).unwrap();
    assert_eq!(ids_a, ids_b);
    let start = 1 + vocab.encode(&t.claim).len() + t.premises[..toggled].iter().map(|p| vocab.encode(p).len()).sum::<usize>();
    let span = start..start + vocab.encode(&t.premises[toggled]).len();
    for p in 0..types_a.len() {
        assert_eq!(types_a[p] != types_b[p], span.contains(&p), "position {p}");
    }
}

#[test]
fn empty_attack_set_types_everything_as_argument() {
    let mut t = synth_triples(2, 10)[0].clone();
    t.attacked_indices.clear();
    let vocab = vocab_for(std::slice::from_ref(&t));
    let s = build_sequence(&t, &t.counter, 1, Variant::WithWeak, &vocab, 256).unwrap();
    assert!(s.token_type_ids[..s.counter_start].iter().all(|&k| k == TokenType::Arg));
}

#[test]
fn distractors_draw_post_sentences() {
    let triples = synth_triples(8, 30);
    let vocab = vocab_for(&triples);
    for t in &triples {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let (s, pick) = make_distractor(t, Variant::WithoutWeak, &vocab, 512, &mut a).unwrap();
        assert_eq!(make_distractor(t, Variant::WithoutWeak, &vocab, 512, &mut b).unwrap().1, pick);
        assert_eq!(s.cls_label, 0);
        assert_eq!(s.counter_tokens(), vocab.encode(&t.premises[pick]).as_slice());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let all = augment(&triples, Variant::WithWeak, &vocab, 512, &mut rng).unwrap();
    assert_eq!(all.len(), 2 * triples.len());
    assert_eq!(all.iter().filter(|s| s.cls_label == 1).count(), triples.len());
}

fn set_zero(model: &GeneratorModel, name: &str) {
    let var = model.var(name).unwrap_or_else(|| panic!("no variable {name}"));
    var.set(&var.as_tensor().zeros_like().unwrap()).unwrap();
}

#[test]
fn zeroed_type_table_hides_weak_marks() {
    let t = synth_triples(6, 10)[0].clone();
    let vocab = vocab_for(std::slice::from_ref(&t));
    let model = tiny(vocab.clone(), Variant::WithoutWeak);
    let marked = build_sequence(&t, &t.counter, 1, Variant::WithoutWeak, &vocab, 128).unwrap();
    let plain = counter_baseline_sequence(&t, &t.counter, &vocab, 128).unwrap();
    assert_eq!(marked.token_ids, plain.token_ids);

    let diff = |m: &GeneratorModel| -> f32 {
        let (lm, cls) = m.forward(&[&marked, &plain]).unwrap();
        let d_lm = (lm.get(0).unwrap() - lm.get(1).unwrap()).unwrap().abs().unwrap().max_all().unwrap();
        let d_cls = (cls.get(0).unwrap() - cls.get(1).unwrap()).unwrap().abs().unwrap().max_all().unwrap();
        d_lm.to_scalar::<f32>().unwrap().max(d_cls.to_scalar::<f32>().unwrap())
    };
    assert!(diff(&model) > 1e-4, "weak marks should matter before zeroing");
    let table = model.token_type_var();
    table.set(&table.as_tensor().zeros_like().unwrap()).unwrap();
    assert!(diff(&model) < 1e-6);
}

fn type_row(model: &GeneratorModel, row: usize) -> Vec<f32> {
    model.token_type_var().as_tensor().get(row).unwrap().to_vec1().unwrap()
}

#[test]
fn weak_row_learns_only_from_weak_positions() {
    let triples = synth_triples(6, 10);
    let vocab = vocab_for(&triples);
    let weak_row = TokenType::Weak.id() as usize;

    let model = tiny(vocab.clone(), Variant::WithoutWeak);
    let before = type_row(&model, weak_row);
    let plain: Vec<TrainingSequence> = triples
        .iter()
        .map(|t| counter_baseline_sequence(t, &t.counter, &vocab, 128).unwrap())
        .collect();
    let mut trainer = GeneratorTrainer::new(&model, 1e-2).unwrap();
    trainer.step(&model, &plain.iter().collect::<Vec<_>>()).unwrap();
    assert_eq!(type_row(&model, weak_row), before);
    assert_ne!(type_row(&model, TokenType::Arg.id() as usize), type_row(&tiny(vocab.clone(), Variant::WithoutWeak), 0));

    let marked: Vec<TrainingSequence> = triples
        .iter()
        .map(|t| build_sequence(t, &t.counter, 1, Variant::WithoutWeak, &vocab, 128).unwrap())
        .collect();
    trainer.step(&model, &marked.iter().collect::<Vec<_>>()).unwrap();
    assert_ne!(type_row(&model, weak_row), before);
}

/// Mean NLL over counter-segment targets of genuine sequences, read off
/// the model's own logits.
fn manual_l1(model: &GeneratorModel, batch: &[&TrainingSequence]) -> f64 {
    let (lm, _) = model.forward(batch).unwrap();
    let logp = candle_nn::ops::log_softmax(&lm, D::Minus1).unwrap();
    let logp: Vec<Vec<Vec<f32>>> = logp.to_vec3().unwrap();
    let mut total = 0.0;
    let mut n = 0;
    for (b, seq) in batch.iter().enumerate() {
        if seq.cls_label == 0 {
            continue;
        }
        for (p, t) in seq.lm_targets.iter().enumerate() {
            if let Some(t) = t {
                total -= f64::from(logp[b][p][*t as usize]);
                n += 1;
            }
        }
    }
    total / n as f64
}

#[test]
fn l1_covers_only_genuine_counter_positions() {
    let triples = synth_triples(9, 10);
    let vocab = vocab_for(&triples);
    let model = tiny(vocab.clone(), Variant::WithoutWeak);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seqs = augment(&triples[..4], Variant::WithoutWeak, &vocab, 128, &mut rng).unwrap();
    let all: Vec<&TrainingSequence> = seqs.iter().collect();
    let genuine: Vec<&TrainingSequence> = seqs.iter().filter(|s| s.cls_label == 1).collect();
    let l_all = joint_loss(&model, &all).unwrap().values().unwrap();
    let l_genuine = joint_loss(&model, &genuine).unwrap().values().unwrap();
    assert!((l_all.lm - manual_l1(&model, &all)).abs() < 1e-4);
    assert!((l_all.lm - l_genuine.lm).abs() < 1e-5, "distractors leaked into L1");
    assert!((l_all.total - (l_all.lm + l_all.cls)).abs() < 1e-5);
}

#[test]
fn distractor_only_batch_has_zero_l1() {
    let triples = synth_triples(9, 10);
    let vocab = vocab_for(&triples);
    let model = tiny(vocab.clone(), Variant::WithoutWeak);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (d, _) = make_distractor(&triples[0], Variant::WithoutWeak, &vocab, 128, &mut rng).unwrap();
    let v = joint_loss(&model, &[&d]).unwrap().values().unwrap();
    assert_eq!(v.lm, 0.0);
    assert!(v.cls > 0.0);
}

#[test]
fn uniform_lm_head_gives_log_vocab_size() {
    let t = CounterTriple {
        post_id: "p".into(),
        claim: "a".into(),
        premises: vec!["b".into()],
        attacked_indices: BTreeSet::from([0]),
        counter: "c a b".into(),
        full_comment: None,
    };
    let vocab = Vocab::build(["a b c"]);
    assert_eq!(vocab.len(), 11);
    let model = tiny(vocab.clone(), Variant::WithoutWeak);
    set_zero(&model, "lm_head.weight");
    let seq = build_sequence(&t, &t.counter, 1, Variant::WithoutWeak, &vocab, 128).unwrap();
    let l1 = joint_loss(&model, &[&seq]).unwrap().values().unwrap().lm;
    assert!((l1 - 11f64.ln()).abs() < 1e-5, "{l1}");
    assert!((11f64.ln() - 2.3979).abs() < 1e-4);
}

#[test]
fn separating_classifier_drives_l2_to_zero() {
    let triples = synth_triples(9, 4);
    let vocab = vocab_for(&triples);
    let model = tiny(vocab.clone(), Variant::WithoutWeak);
    let genuine = build_sequence(&triples[0], &triples[0].counter, 1, Variant::WithoutWeak, &vocab, 128).unwrap();
    set_zero(&model, "cls_head.weight");
    let bias = model.var("cls_head.bias").unwrap();
    bias.set(&Tensor::new(&[-40f32, 40.0], bias.device()).unwrap()).unwrap();
    let v = joint_loss(&model, &[&genuine]).unwrap().values().unwrap();
    assert!(v.cls < 1e-6, "{}", v.cls);
}

#[test]
fn top_k_two_frequencies_match_renormalized_softmax() {
    let logits = [2.0f32, 1.0, 0.3];
    let cfg = SamplingConfig {
        top_k: 2,
        top_p: 1.0,
        temperature: 1.0,
        ..SamplingConfig::default()
    };
    let dist = truncated_distribution(&logits, &cfg, |_| true);
    let p0 = 1.0 / (1.0 + (-1.0f64).exp());
    assert_eq!(dist.len(), 2);
    assert!((dist[0].1 - p0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let draws = 10_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        counts[sample(&dist, &mut rng).unwrap() as usize] += 1;
    }
    assert_eq!(counts[2], 0);
    let sigma = (draws as f64 * p0 * (1.0 - p0)).sqrt();
    assert!((counts[0] as f64 - draws as f64 * p0).abs() <= 3.0 * sigma, "{counts:?}");
}

proptest! {
    #[test]
    fn truncated_distribution_is_normalized(
        logits in prop::collection::vec(-6.0f32..6.0, 1..30),
        k in 0usize..10,
        p in 0.05f64..1.0,
        temp in 0.2f64..3.0,
    ) {
        let cfg = SamplingConfig { top_k: k, top_p: p, temperature: temp, ..SamplingConfig::default() };
        let dist = truncated_distribution(&logits, &cfg, |_| true);
        prop_assert!(!dist.is_empty());
        if k > 0 {
            prop_assert!(dist.len() <= k);
        }
        let z: f64 = dist.iter().map(|d| d.1).sum();
        prop_assert!((z - 1.0).abs() < 1e-9);
        for w in dist.windows(2) {
            prop_assert!(w[0].1 >= w[1].1);
        }
    }
}

#[test]
fn sampled_lengths_respect_bounds_and_seeds() {
    let triples = synth_triples(12, 20);
    let vocab = vocab_for(&triples);
    let model = tiny(vocab, Variant::WithoutWeak);
    let t = &triples[0];
    for seed in 0..100 {
        let cfg = SamplingConfig {
            min_tokens: 5,
            max_tokens: 20,
            seed,
            ..SamplingConfig::default()
        };
        let ids = generate_counter_ids(&model, &t.claim, &t.premises, &t.attacked_indices, Variant::WithoutWeak, &cfg).unwrap();
        assert!((5..=20).contains(&ids.len()), "seed {seed}: {}", ids.len());
        assert!(ids.iter().all(|&i| !Vocab::is_special(i)));
        if seed < 5 {
            let again = generate_counter_ids(&model, &t.claim, &t.premises, &t.attacked_indices, Variant::WithoutWeak, &cfg).unwrap();
            assert_eq!(ids, again);
        }
    }
}

#[test]
fn generation_past_context_is_rejected() {
    let triples = synth_triples(12, 5);
    let vocab = vocab_for(&triples);
    let model = tiny(vocab, Variant::WithoutWeak);
    let t = &triples[0];
    let cfg = SamplingConfig::default();
    let err = generate_counter_ids(&model, &t.claim, &t.premises, &t.attacked_indices, Variant::WithoutWeak, &cfg).unwrap_err();
    assert!(matches!(err, undermine::Error::ContextOverflow { .. }), "{err}");
}


#[test]
fn every_parameter_receives_a_gradient() {
    let triples = synth_triples(6, 10);
    let vocab = vocab_for(&triples);
    let model = tiny(vocab.clone(), Variant::WithoutWeak);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seqs = augment(&triples, Variant::WithoutWeak, &vocab, 128, &mut rng).unwrap();
    let loss = joint_loss(&model, &seqs.iter().collect::<Vec<_>>()).unwrap();
    let grads = loss.total.backward().unwrap();
    for (name, var) in model.varmap().data().lock().unwrap().iter() {
        assert!(grads.get(var.as_tensor()).is_some(), "{name} is detached");
    }
}
