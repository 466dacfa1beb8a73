mod common;

use proptest::prelude::*;
use vocab_emerge::ontology::{EntityRecord, LexiconRow};
use vocab_emerge::simgen::worked_example;
use vocab_emerge::spelling::{correct_spelling, osa_distance, SpellConfig};
use vocab_emerge::{Normalizer, Ontology, PointAnnotation};

fn three_word_ontology() -> Ontology {
    let rec = |id: &str, parent: Option<&str>| EntityRecord {
        id: id.into(),
        name: id.into(),
        parent: parent.map(String::from),
        physical_root: parent.is_none(),
    };
    let row = |s: &str, f: u64| LexiconRow {
        surface: s.into(),
        entity: s.into(),
        frequency: Some(f),
    };
    Ontology::from_records(
        vec![
            rec("thing", None),
            rec("glove", Some("thing")),
            rec("house", Some("thing")),
            rec("gloss", Some("thing")),
        ],
        vec![row("glove", 10), row("house", 5), row("gloss", 3)],
    )
    .unwrap()
}

#[test]
fn glouse_becomes_glove() {
    let o = three_word_ontology();
    // every form sits at the same distance, so frequency decides
    let forms = [("glove", 10u64), ("house", 5), ("gloss", 3)];
    let d: Vec<usize> = forms
        .iter()
        .map(|(f, _)| strsim::osa_distance("glouse", f))
        .collect();
    let min = *d.iter().min().unwrap();
    let expect = forms
        .iter()
        .zip(&d)
        .filter(|(_, &k)| k == min)
        .max_by_key(|((_, freq), _)| *freq)
        .map(|((form, _), _)| *form)
        .unwrap();
    assert_eq!(expect, "glove");
    assert_eq!(correct_spelling("glouse", o.lexicon()), expect);
}

#[test]
fn distance_bound_depends_on_length() {
    let c = SpellConfig::default();
    assert_eq!(c.max_distance(5), 1);
    assert_eq!(c.max_distance(6), 2);
}

#[test]
fn misspelt_dog_is_recognized() {
    let w = worked_example();
    let o = w.ontology().unwrap();
    let n = Normalizer::new(&o, SpellConfig::default());
    let p = w.annotations.iter().find(|p| p.raw == "doog").unwrap();
    let c = n.normalize_point(p);
    assert_eq!(c.corrected, "dog");
    assert_eq!(
        c.candidates.iter().map(|&e| o.key(e)).collect::<Vec<_>>(),
        ["dog"]
    );
}

#[test]
fn abstract_nouns_are_dropped() {
    let w = worked_example();
    let o = w.ontology().unwrap();
    let n = Normalizer::new(&o, SpellConfig::default());
    let p = w.annotations.iter().find(|p| p.raw == "freedom").unwrap();
    assert!(n.normalize_point(p).is_unrecognized());
}

#[test]
fn modifiers_are_split_from_the_head() {
    let w = worked_example();
    let o = w.ontology().unwrap();
    let n = Normalizer::new(&o, SpellConfig::default());
    let p = PointAnnotation {
        point_id: "q".into(),
        image_id: "i".into(),
        annotator_id: "a".into(),
        x: 0.5,
        y: 0.5,
        raw: "Big  Brown DOGS".into(),
    };
    let c = n.normalize_point(&p);
    assert_eq!(c.head, "dogs");
    assert_eq!(c.modifiers, ["big", "brown"]);
    assert_eq!(
        c.candidates.iter().map(|&e| o.key(e)).collect::<Vec<_>>(),
        ["dog"]
    );
}

proptest! {
    #[test]
    fn osa_matches_reference(a in "[a-e]{0,8}", b in "[a-e]{0,8}") {
        prop_assert_eq!(osa_distance(&a, &b), strsim::osa_distance(&a, &b));
    }

    #[test]
    fn lexicon_forms_are_left_alone(i in 0usize..22) {
        let w = worked_example();
        let o = w.ontology().unwrap();
        let form = &w.lexicon[i].surface;
        prop_assert_eq!(&correct_spelling(form, o.lexicon()), form);
    }

    #[test]
    fn candidates_are_physical(raw in "[a-z]{2,9}( [a-z]{2,6})?") {
        let w = worked_example();
        let o = w.ontology().unwrap();
        let p = PointAnnotation {
            point_id: "q".into(),
            image_id: "i".into(),
            annotator_id: "a".into(),
            x: 0.1,
            y: 0.9,
            raw,
        };
        let c = Normalizer::new(&o, SpellConfig::default()).normalize_point(&p);
        prop_assert!(c.candidates.iter().all(|&e| o.is_physical(e)));
        prop_assert_eq!(c.is_unrecognized(), c.candidates.is_empty());
    }

    #[test]
    fn normalization_is_deterministic(raw in "[a-z ]{1,12}") {
        prop_assume!(!raw.trim().is_empty());
        let w = worked_example();
        let o = w.ontology().unwrap();
        let p = PointAnnotation {
            point_id: "q".into(),
            image_id: "i".into(),
            annotator_id: "a".into(),
            x: 0.1,
            y: 0.9,
            raw,
        };
        let n = Normalizer::new(&o, SpellConfig::default());
        prop_assert_eq!(n.normalize_point(&p), n.normalize_point(&p));
    }
}
