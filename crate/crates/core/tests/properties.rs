use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vrn_core::model::{answer_forward, forward_propagate, posterior_distribution, topic_distribution, Distribution, EntityNames};
use vrn_core::oracle::random_graph;
use vrn_core::{compute_scope, EntityId, KnowledgeGraph, ModelConfig, Params, Vocabulary, WeightMode};

struct Case {
    g: KnowledgeGraph,
    names: EntityNames,
    params: Params,
    vocab_size: usize,
}

fn case(seed: u64, entities: usize, triples: usize, dim: usize, scale: f64, mode: WeightMode, directional: bool) -> Case {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(&mut r, entities, triples, 3).unwrap();
    let mut vocab = Vocabulary::new();
    for e in g.entities() {
        for t in g.name_tokens(e) {
            vocab.insert(t);
        }
    }
    for w in ["which", "films", "did", "direct"] {
        vocab.insert(w);
    }
    let names = EntityNames::new(&g, &vocab);
    let cfg = ModelConfig { dim, weight_mode: mode, directional_relations: directional, ..Default::default() };
    let shapes = Params::shapes_for(&cfg, &g, &vocab);
    let params = Params::init(shapes, mode, false, scale, &mut r);
    Case { g, names, params, vocab_size: vocab.len() }
}

fn assert_normalized(d: &Distribution) {
    let sum: f64 = d.probs.iter().sum();
    assert!((sum - 1.0).abs() < 1e-12, "sum {sum}");
    for (p, lp) in d.probs.iter().zip(&d.log_probs) {
        assert!(*p >= 0.0 && lp.is_finite());
        assert!((p.ln() - lp).abs() < 1e-9 || *p < 1e-300);
    }
}

fn modes() -> impl Strategy<Value = WeightMode> {
    prop_oneof![Just(WeightMode::NameBow), Just(WeightMode::Free)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_sum_to_one(
        seed in any::<u64>(),
        n in 2usize..25,
        density in 1usize..4,
        scale in 0.01f64..3.0,
        hops in 1usize..4,
        mode in modes(),
        directional in any::<bool>(),
        q in prop::collection::vec(0usize..6, 1..8),
    ) {
        let c = case(seed, n, n * density, 6, scale, mode, directional);
        let q: Vec<usize> = q.into_iter().map(|t| t % c.vocab_size).collect();
        assert_normalized(&topic_distribution(&c.params.recognition, &c.names, &q).unwrap());
        for e in c.g.entities() {
            let s = compute_scope(&c.g, e, hops).unwrap();
            let a = answer_forward(&c.params.shapes, &c.params.reasoning, &q, &s).unwrap();
            prop_assert_eq!(a.dist.len(), s.len());
            assert_normalized(&a.dist);
            assert_normalized(&posterior_distribution(&c.params, &c.names, &q, e, &c.g, hops).unwrap());
        }
    }

    #[test]
    fn propagation_is_nonnegative_and_counted(
        seed in any::<u64>(),
        n in 2usize..40,
        density in 1usize..5,
        scale in 0.01f64..3.0,
        hops in 1usize..4,
        directional in any::<bool>(),
    ) {
        let c = case(seed, n, n * density, 5, scale, WeightMode::NameBow, directional);
        for e in c.g.entities() {
            let s = compute_scope(&c.g, e, hops).unwrap();
            let emb = forward_propagate(&c.params.shapes, &c.params.reasoning, &s).unwrap();
            for i in 0..s.len() {
                prop_assert!(emb.node(i).iter().all(|&x| x >= 0.0 && x.is_finite()));
            }
            prop_assert!(emb.node(0).iter().all(|&x| x == 0.0));
            prop_assert_eq!(emb.stats.nodes_visited, s.len());
            prop_assert_eq!(emb.stats.edges_visited, s.num_parent_edges());
            prop_assert!(emb.stats.messages <= emb.stats.edges_visited);
        }
    }

    #[test]
    fn identical_names_identical_logits(
        seed in any::<u64>(),
        scale in 0.01f64..3.0,
        name in prop::collection::vec(1usize..6, 1..4),
        other in prop::collection::vec(1usize..6, 1..4),
        q in prop::collection::vec(0usize..6, 1..6),
    ) {
        let c = case(seed, 4, 6, 5, scale, WeightMode::NameBow, false);
        // entities 0 and 2 share a name; entity 1 and 3 get another one
        let names = EntityNames::from_ids(vec![name.clone(), other.clone(), name, other]);
        let d = topic_distribution(&c.params.recognition, &names, &q).unwrap();
        prop_assert_eq!(d.log_probs[0].to_bits(), d.log_probs[2].to_bits());
        prop_assert_eq!(d.log_probs[1].to_bits(), d.log_probs[3].to_bits());
        prop_assert_eq!(d.position(EntityId(2)), Some(2));
    }
}
