mod common;

use cegmix::tree::{build_ceg, infection_tree, positions_from_staging, tree_to_dot, Staging, TreeDocument};
use common::{random_staged_tree, subtrees_isomorphic};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn positions_are_isomorphism_classes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, staging) = random_staged_tree(&mut rng, 30);
        let positions = positions_from_staging(&tree, &staging).unwrap();
        let of: std::collections::HashMap<&str, usize> = positions
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.iter().map(move |s| (s.as_str(), i)))
            .collect();
        let situations = tree.situations();
        for &u in &situations {
            for &v in &situations {
                prop_assert_eq!(of[u] == of[v], subtrees_isomorphic(&tree, &staging, u, v), "{} {}", u, v);
            }
        }
    }

    #[test]
    fn positions_refine_stages(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, staging) = random_staged_tree(&mut rng, 30);
        let colours = staging.colours();
        for p in positions_from_staging(&tree, &staging).unwrap() {
            prop_assert!(p.iter().all(|s| colours[s.as_str()] == colours[p[0].as_str()]));
        }
    }

    #[test]
    fn ceg_edges_respect_positions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, staging) = random_staged_tree(&mut rng, 30);
        let ceg = build_ceg(&tree, &staging).unwrap();
        prop_assert!(ceg.node_count() <= tree.situations().len() + 1);
        // Every representative keeps exactly its situation's out-degree.
        for rep in &ceg.representatives {
            let out = ceg.edges.iter().filter(|e| &e.from == rep).count();
            prop_assert_eq!(out, tree.out_edges(rep).count());
        }
        prop_assert!(ceg.edges.iter().all(|e| e.to != tree.root()));
        prop_assert!(ceg.edges.iter().any(|e| e.to == ceg.sink));
    }

    #[test]
    fn document_roundtrip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, staging) = random_staged_tree(&mut rng, 20);
        let doc = TreeDocument::from_tree(&tree, Some(&staging));
        let text = serde_json::to_string(&doc).unwrap();
        let (t2, s2) = TreeDocument::from_json(&text).unwrap().build().unwrap();
        prop_assert_eq!(&s2, &staging);
        prop_assert_eq!(tree_to_dot(&t2, Some(&s2)), tree_to_dot(&tree, Some(&staging)));
    }
}

#[test]
fn infection_tree_positions() {
    let tree = infection_tree();
    let apart = positions_from_staging(&tree, &Staging::singletons(&tree)).unwrap();
    assert_eq!(apart.len(), tree.situations().len());

    let blocks = vec![vec!["v0".to_string()], vec!["v2".to_string()], vec!["v1".into(), "v5".into(), "v6".into()]];
    let merged = positions_from_staging(&tree, &Staging::new(blocks)).unwrap();
    assert_eq!(merged.len(), 3);
    assert!(merged.contains(&vec!["v1".to_string(), "v5".into(), "v6".into()]));
}
