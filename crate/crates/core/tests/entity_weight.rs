mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{entity_key, naive_entity_weight, ontology_from_parents, random_case};
use vocab_emerge::disambiguator::{Vertex, VertexKey};
use vocab_emerge::{entity_weight, CoocGraph, Error};

#[test]
fn matches_naive_sum_on_random_graphs() {
    let mut checked = 0;
    for seed in 0..400 {
        let (parent, sets, edges) = random_case(seed);
        let o = ontology_from_parents(&parent);
        let id = |i: usize| o.id(&entity_key(i)).unwrap();
        let vertices = sets
            .iter()
            .enumerate()
            .map(|(v, s)| Vertex {
                id: v,
                key: VertexKey::Entities(s.iter().map(|&i| id(i)).collect()),
                label: format!("v{v}"),
                point_ids: vec![format!("p{v}")],
                entities: s.iter().map(|&i| id(i)).collect::<BTreeSet<_>>(),
            })
            .collect();
        let emap: BTreeMap<(usize, usize), u64> =
            edges.iter().map(|&(i, j, w)| ((i, j), w)).collect();
        let g = CoocGraph::from_parts(vertices, emap).unwrap();
        for (v, s) in sets.iter().enumerate() {
            for &e in s {
                let got = entity_weight(id(e), v, &g, &o).unwrap();
                assert_eq!(
                    got,
                    naive_entity_weight(&parent, &sets, &edges, v, e),
                    "seed {seed}"
                );
                checked += 1;
            }
            if let Some(out) = (0..parent.len()).find(|e| !s.contains(e)) {
                assert!(matches!(
                    entity_weight(id(out), v, &g, &o),
                    Err(Error::EntityNotInVertex { .. })
                ));
            }
        }
    }
    assert!(checked > 500);
}
