import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from activepaths.data import (
    DataError, FeatureSpec, Schema, SynthConfig, TriggerSpec, apply_trigger, decode, default_schema,
    dev_test_split, encode, fit_encoder, inject_trigger, load_csv, parse_csv, split, synth_generate, write_csv,
)

SMALL = SynthConfig(n_rows=2000, seed=4)


@pytest.fixture(scope="module")
def table():
    return synth_generate(SMALL)


def test_synth_contract(table):
    big = synth_generate(SynthConfig())
    assert int(big.labels.sum()) == 600 and len(big) == 20_000
    assert set(np.unique(table.raw["TTL_max"])) <= {62.0, 63.0, 64.0}
    assert set(np.unique(table.raw["TTL_min"])) <= {62.0, 63.0, 64.0}
    assert (table.raw["TTL_min"] <= table.raw["TTL_max"]).all()
    assert table.schema.names == default_schema().names


def test_synth_seeded(table):
    again = synth_generate(SMALL)
    assert write_csv(again) == write_csv(table)
    assert write_csv(synth_generate(SynthConfig(n_rows=2000, seed=5))) != write_csv(table)


def test_csv_roundtrip(tmp_path, table):
    path = tmp_path / "t.csv"
    write_csv(table, path)
    back = load_csv(path, table.schema)
    assert write_csv(back) == write_csv(table)


def test_csv_malformed_rows_reported():
    schema = Schema((FeatureSpec("a"), FeatureSpec("p", "categorical")))
    text = "a,p,label\n1,tcp,0\nx,tcp,1\n2,,0\n3,udp,7\n4,udp\n5,udp,1\n"
    t = parse_csv(text, schema)
    assert len(t) == 2
    assert [r.line for r in t.rejects] == [3, 4, 5, 6]
    with pytest.raises(DataError, match="missing columns"):
        parse_csv("a,label\n1,0\n", schema)
    with pytest.raises(DataError):
        parse_csv("", schema)


def test_split_sizes_and_determinism(table):
    tr, va, te = dev_test_split(table.take(np.arange(100)), seed=1)
    assert (len(tr), len(va), len(te)) == (64, 16, 20)
    a = [t.row_ids.tolist() for t in dev_test_split(table, seed=3)]
    b = [t.row_ids.tolist() for t in dev_test_split(table, seed=3)]
    assert a == b
    with pytest.raises(DataError):
        split(table, [0.5, 0.6])


def test_split_is_roughly_stratified():
    t = synth_generate(SynthConfig(n_rows=10_000, seed=2))
    overall = t.labels.mean()
    for part in dev_test_split(t, seed=2):
        assert abs(part.labels.mean() - overall) < 0.02


def test_encoder_fit_on_train_only(table):
    tr, _, te = dev_test_split(table, seed=0)
    enc = fit_encoder(tr)
    assert enc.fitted_on == "train"
    with pytest.raises(DataError):
        fit_encoder(te)
    X = encode(enc, tr)
    num = [j for j, n in enumerate(enc.encoded_names) if "=" not in n]
    assert np.allclose(X[:, num].mean(axis=0), 0, atol=1e-9)
    back = decode(enc, X)
    assert np.allclose(back["TTL_max"], tr.raw["TTL_max"])
    assert list(back["PROTOCOL"]) == [str(v) for v in tr.raw["PROTOCOL"]]


def test_unseen_category_is_zero_block(table):
    enc = fit_encoder(table)
    odd = table.take([0]).with_columns(PROTOCOL=np.array(["sctp"], dtype=object))
    X, report = encode(enc, odd, return_report=True)
    cols = [j for j, n in enumerate(enc.encoded_names) if n.startswith("PROTOCOL=")]
    assert not X[0, cols].any() and report == {"PROTOCOL": 1}


def test_trigger_invariants(table):
    spec = TriggerSpec({"TTL_max": 66.0}, poisoning_rate=0.01, seed=1)
    pois, ids = inject_trigger(table, spec)
    pos = table.positions(ids)
    assert len(ids) == 20
    assert (pois.raw["TTL_max"][pos] == 66.0).all()
    assert (pois.labels[pos] == 0).all()
    assert (table.labels[pos] == 1).sum() == 10
    rest = np.setdiff1d(np.arange(len(table)), pos)
    for name in table.schema.names:
        assert np.array_equal(pois.raw[name][rest], table.raw[name][rest])
        if name != "TTL_max":
            assert np.array_equal(pois.raw[name], table.raw[name])
    assert np.array_equal(pois.labels[rest], table.labels[rest])
    assert 66.0 not in set(table.raw["TTL_max"])


def test_trigger_errors(table):
    with pytest.raises(ValueError):
        TriggerSpec({"TTL_max": 66.0}, poisoning_rate=0.0)
    with pytest.raises(DataError):
        inject_trigger(table, TriggerSpec({"NOPE": 1.0}))
    with pytest.raises(DataError):
        inject_trigger(table, TriggerSpec({"PROTOCOL": 1.0}))
    with pytest.raises(DataError, match="insufficient"):
        inject_trigger(table, TriggerSpec({"TTL_max": 66.0}, poisoning_rate=0.5))


def test_apply_trigger_keeps_labels(table):
    out = apply_trigger(table, {"TTL_max": 66.0, "TTL_min": 61.0})
    assert (out.raw["TTL_min"] == 61.0).all() and np.array_equal(out.labels, table.labels)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 300), st.floats(0.05, 0.5), st.floats(0.05, 0.5), st.integers(0, 1000))
def test_split_disjoint_and_covering(n, test_fraction, val_fraction, seed):
    t = synth_generate(SynthConfig(n_rows=300, seed=0)).take(np.arange(n))
    parts = dev_test_split(t, test_fraction, val_fraction, seed)
    ids = np.concatenate([p.row_ids for p in parts])
    assert sorted(ids.tolist()) == sorted(t.row_ids.tolist())
