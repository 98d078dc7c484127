use std::collections::BTreeSet;
use std::path::PathBuf;

use reposcope::chains::{enumerate_chains, ChainConfig, Scorer};
use reposcope::embedding::HashedProvider;
use reposcope::graph::{imported_entities, validate_schema, Relation, Rssg, TargetSpec};
use reposcope::index::{Index, IndexSettings};

const TARGET: &str = "infrared/core/inspector/inspector.py:SpecParser.get_deprecated_args";

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/infrared")
}

fn build() -> Index {
    Index::build(&fixture(), &IndexSettings::default(), &HashedProvider::default())
        .unwrap()
        .0
}

fn id(g: &Rssg, path: &str) -> reposcope::graph::EntityId {
    g.by_path(path).unwrap_or_else(|| panic!("missing {path}"))
}

#[test]
fn graph_has_the_motivating_triples() {
    let index = build();
    let g = &index.graph;
    assert!(validate_schema(g).is_empty());
    let parser = id(g, "infrared/core/inspector/inspector/SpecParser");
    let spec_helper = id(g, "infrared/core/inspector/inspector/SpecParser/spec_helper");
    let helper = id(g, "infrared/core/inspector/helper/SpecDictHelper");
    let iterate = id(g, "infrared/core/inspector/helper/SpecDictHelper/iterate_option_specs");
    assert!(g.has_triple(parser, Relation::Contains, spec_helper));
    assert!(g.has_triple(spec_helper, Relation::Returns, helper));
    assert!(g.has_triple(helper, Relation::Contains, iterate));

    let target = id(g, "infrared/core/inspector/inspector/SpecParser/get_deprecated_args");
    let mut callees: BTreeSet<_> = g.outgoing_with(target, Relation::Calls).collect();
    callees.retain(|&c| c != target);
    assert_eq!(callees, [spec_helper, helper, iterate].into_iter().collect());
}

#[test]
fn sole_imported_entity_is_the_owner_class() {
    let index = build();
    let target = TargetSpec::parse(&index.graph, TARGET).unwrap();
    let parser = id(&index.graph, "infrared/core/inspector/inspector/SpecParser");
    assert_eq!(imported_entities(&index.graph, &target), [parser].into_iter().collect());
}

#[test]
fn motivating_chain_is_enumerated() {
    let index = build();
    let g = &index.graph;
    let parser = id(g, "infrared/core/inspector/inspector/SpecParser");
    let names = |c: &reposcope::chains::ChainCore| -> Vec<String> {
        c.entities.iter().map(|&e| g.entity(e).name.clone()).collect()
    };
    let chains = enumerate_chains(g, &[parser].into_iter().collect(), 5);
    assert!(chains
        .iter()
        .any(|c| names(c) == ["SpecParser", "spec_helper", "SpecDictHelper", "iterate_option_specs"]));
}

#[test]
fn pooled_call_value_is_shared_within_a_cluster() {
    let index = build();
    let mut g = index.graph.clone();
    let target = TargetSpec::parse(&g, TARGET).unwrap();
    g.mask_body(target.entity);
    let scorer = Scorer::new(&g, target.entity, &index.clusters, &ChainConfig::default()).unwrap();
    for a in g.ids() {
        for b in g.ids() {
            if index.clusters.cluster(a.index()) == index.clusters.cluster(b.index()) {
                assert_eq!(scorer.call_value(a), scorer.call_value(b));
            }
        }
    }
}
