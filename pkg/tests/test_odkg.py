"""Graph store: mutations, queries, persistence, integrity properties."""

from __future__ import annotations

import random

import pytest

from byos.errors import CorruptFile, LayerMismatch, SchemaVersionTooNew, UnknownEntity
from byos.kconfig.model import InstanceTriple, OptionType
from byos.odkg import (
    ConceptEntity,
    ConceptTriple,
    CrossLayerLink,
    InstanceEntity,
    OdKg,
    build_instance_layer,
    concept_id_for_label,
    load,
)
from support import paper_kg


def test_build_instance_layer_zswap(zswap_space):
    kg = build_instance_layer(zswap_space)
    assert {"ZSWAP", "SWAP", "ZPOOL"} <= set(kg.instance_entities)
    triples = {t.as_tuple() for t in kg.instance_triples}
    assert ("ZSWAP", "depends_on", "SWAP") in triples
    assert ("ZSWAP", "select", "ZPOOL") in triples
    assert kg.instance_entities["ZSWAP"].description \
        == "Config ZSWAP description: Compressed cache for swap pages"


def test_build_instance_layer_empty():
    from byos.kconfig.model import ConfigSpace

    kg = build_instance_layer(ConfigSpace())
    assert not kg.instance_entities and not kg.instance_triples


def test_build_instance_layer_counts_match_parser(golden12_space):
    kg = build_instance_layer(golden12_space)
    assert len(kg.instance_entities) == len(golden12_space.options)
    resolvable = {t for t in golden12_space.edges
                  if t.head in golden12_space.options
                  and t.tail in golden12_space.options}
    assert kg.instance_triples == resolvable
    # the unresolved EMBEDDED reference stays out of the graph
    assert all("EMBEDDED" not in (t.head, t.tail) for t in kg.instance_triples)


def test_remove_entity_cascades():
    kg = paper_kg()
    kg.remove_entity("ZSWAP")
    assert "ZSWAP" not in kg.instance_entities
    assert all("ZSWAP" not in (t.head, t.tail) for t in kg.instance_triples)
    assert all(l.instance != "ZSWAP" for l in kg.links)


def test_upsert_idempotent():
    kg = paper_kg()
    before = kg.snapshot()
    kg.upsert_entities([kg.instance_entities["ZSWAP"]])
    kg.upsert_triples([InstanceTriple("ZSWAP", "depends_on", "SWAP")])
    assert kg == before


def test_strict_insert_unknown_endpoint():
    kg = paper_kg()
    with pytest.raises(UnknownEntity):
        kg.upsert_triples([InstanceTriple("ZSWAP", "depends_on", "GHOST")])


def test_lenient_insert_stubs():
    kg = paper_kg()
    kg.strict = False
    kg.upsert_triples([InstanceTriple("ZSWAP", "depends_on", "GHOST")])
    assert "GHOST" in kg.instance_entities
    assert kg.check_integrity() == []


def test_layer_mismatch_detected():
    kg = paper_kg()
    swap_pages = concept_id_for_label("Swap Pages")
    with pytest.raises(LayerMismatch):
        kg.upsert_triples([InstanceTriple("ZSWAP", "depends_on", swap_pages)])
    with pytest.raises(LayerMismatch):
        kg.upsert_triples([ConceptTriple(swap_pages, "inclusion", "ZSWAP")])
    with pytest.raises(LayerMismatch):
        kg.upsert_entities([ConceptEntity("ZSWAP", "ZSWAP", "x")])


def test_concept_triple_rules():
    with pytest.raises(ValueError):
        ConceptTriple("a", "causes", "b")
    with pytest.raises(ValueError):
        ConceptTriple("a", "inclusion", "a")


def test_neighbors_paper_fixture():
    kg = paper_kg()
    swap_pages = concept_id_for_label("Swap Pages")
    out = kg.neighbors("ZSWAP", "out", {"related_to"})
    assert out == [("related_to", swap_pages)]
    # isolated node
    kg.upsert_entities([InstanceEntity("LONER", "", OptionType.BOOL)])
    assert kg.neighbors("LONER") == []
    with pytest.raises(UnknownEntity):
        kg.neighbors("MISSING")


def test_neighbors_against_adjacency_matrix_oracle():
    rng = random.Random(7)
    kg = paper_kg()
    names = [f"N{i:02d}" for i in range(17)]
    kg.upsert_entities([InstanceEntity(n, "", OptionType.BOOL) for n in names])
    for _ in range(40):
        a, b = rng.sample(names, 2)
        kg.upsert_triples([InstanceTriple(
            a, rng.choice(["depends_on", "select", "imply", "has_child"]), b)])
    # oracle: dense adjacency built straight from the edge list
    edges = kg.all_edges()
    for node in names:
        for direction in ("out", "in", "both"):
            expected = set()
            for h, r, t in edges:
                if direction in ("out", "both") and h == node:
                    expected.add((r, t))
                if direction in ("in", "both") and t == node:
                    expected.add((r, h))
            assert kg.neighbors(node, direction) == sorted(expected)


def test_mutation_sequences_preserve_integrity_vs_set_replay():
    rng = random.Random(1234)
    kg = OdKg()
    names = [f"E{i:02d}" for i in range(20)]
    mirror_entities: set[str] = set()
    mirror_triples: set[tuple] = set()
    for _ in range(300):
        action = rng.random()
        if action < 0.45 or not mirror_entities:
            name = rng.choice(names)
            kg.upsert_entities([InstanceEntity(name, "", OptionType.BOOL)])
            mirror_entities.add(name)
        elif action < 0.8 and len(mirror_entities) >= 2:
            a, b = rng.sample(sorted(mirror_entities), 2)
            triple = InstanceTriple(a, "depends_on", b)
            kg.upsert_triples([triple])
            mirror_triples.add(triple.as_tuple())
        else:
            name = rng.choice(sorted(mirror_entities))
            kg.remove_entity(name)
            mirror_entities.discard(name)
            mirror_triples = {t for t in mirror_triples
                              if name not in (t[0], t[2])}
        assert kg.check_integrity() == []
    assert set(kg.instance_entities) == mirror_entities
    assert {t.as_tuple() for t in kg.instance_triples} == mirror_triples


def test_save_load_round_trip(tmp_path):
    kg = paper_kg()
    path = tmp_path / "kg.json"
    kg.save(str(path))
    loaded = load(str(path))
    assert loaded == kg


def test_canonical_bytes_insertion_order_independent(tmp_path):
    a = paper_kg()
    b = OdKg(kernel_version_label="fixture")
    # rebuild in reversed insertion order
    for symbol in reversed(sorted(a.instance_entities)):
        b.instance_entities[symbol] = a.instance_entities[symbol]
    for cid in reversed(sorted(a.concept_entities)):
        b.concept_entities[cid] = a.concept_entities[cid]
    for t in sorted(a.instance_triples, key=lambda t: t.as_tuple(), reverse=True):
        b.instance_triples.add(t)
    b.concept_triples = set(a.concept_triples)
    b.links = set(a.links)
    assert a.to_canonical_json() == b.to_canonical_json()


def test_byte_equality_iff_structural_equality(tmp_path):
    a, b = paper_kg(), paper_kg()
    assert a.to_canonical_json() == b.to_canonical_json()
    b.remove_entity("ZPOOL")
    assert a != b
    assert a.to_canonical_json() != b.to_canonical_json()


def test_load_truncated_file(tmp_path):
    kg = paper_kg()
    path = tmp_path / "kg.json"
    kg.save(str(path))
    data = path.read_text()
    path.write_text(data[: len(data) // 2])
    with pytest.raises(CorruptFile):
        load(str(path))


def test_load_newer_schema(tmp_path):
    path = tmp_path / "kg.json"
    kg = paper_kg()
    text = kg.to_canonical_json().replace('"schema_version": 1',
                                          '"schema_version": 99')
    path.write_text(text)
    with pytest.raises(SchemaVersionTooNew):
        load(str(path))


def test_layer_separation_invariant():
    kg = paper_kg()
    concept_ids = set(kg.concept_entities)
    symbols = set(kg.instance_entities)
    for t in kg.instance_triples:
        assert t.head in symbols and t.tail in symbols
    for t in kg.concept_triples:
        assert t.head in concept_ids and t.tail in concept_ids
    for l in kg.links:
        assert l.instance in symbols and l.concept in concept_ids


def test_concept_id_collapses_label_variants():
    assert concept_id_for_label("Swap  Pages") == concept_id_for_label("swap pages")
    assert concept_id_for_label("Swap Pages") != concept_id_for_label("Swap Page")


def test_stats_text():
    kg = paper_kg()
    lines = kg.stats_text().splitlines()
    assert lines[0] == "instance_entities: 3"
    assert lines[4] == f"links: {len(kg.links)}"
