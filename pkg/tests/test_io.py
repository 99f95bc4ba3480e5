import json
import os
import sys

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from ssrt_mixture import io
from ssrt_mixture.errors import DataFormatError, SchemaVersionError
from ssrt_mixture.racesim import simulate_sst
from ssrt_mixture.types import (
    ExGaussianParams,
    MixtureSsrt,
    PosteriorChains,
    SubjectClusterParams,
    SubjectTriples,
)

GO = ExGaussianParams(mu=450.0, sigma=50.0, tau=100.0)
STOP = ExGaussianParams(mu=220.0, sigma=30.0, tau=50.0)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_trial_csv_round_trip(tmp_path):
    d = simulate_sst(GO, STOP, seed=1)
    path = tmp_path / "trials.csv"
    io.write_trials_csv(d, path)
    back = io.read_trials_csv(path)
    assert back.meta.n_trials == 96
    assert back.meta.stop_fraction == 0.25
    for a, b in zip(d.trials, back.trials):
        assert (a.index, a.kind, a.inhibited, a.ssd_ms) == (b.index, b.kind, b.inhibited, b.ssd_ms)
        if a.rt_ms is not None:
            assert b.rt_ms == pytest.approx(a.rt_ms, abs=5e-4)


def test_trial_csv_format(tmp_path):
    path = write(tmp_path / "t.csv", "index,kind,ssd_ms,rt_ms,inhibited\n1,go,,512.25,\n2,stop,250,,1\n3,stop,200,480,false\n")
    d = io.read_trials_csv(path)
    assert [t.inhibited for t in d.stop_trials()] == [True, False]
    out = tmp_path / "out.csv"
    io.write_trials_csv(d, out)
    assert out.read_text().splitlines() == [
        "index,kind,ssd_ms,rt_ms,inhibited",
        "1,go,,512.25,",
        "2,stop,250,,true",
        "3,stop,200,480,false",
    ]


@pytest.mark.parametrize("text,line", [
    ("idx,kind,ssd_ms,rt_ms,inhibited\n1,go,,500,\n", 1),
    ("", 1),
    ("index,kind,ssd_ms,rt_ms,inhibited\n1,go,,500,\n2,jump,,500,\n", 3),
    ("index,kind,ssd_ms,rt_ms,inhibited\n1,go,,fast,\n", 2),
    ("index,kind,ssd_ms,rt_ms,inhibited\n1,stop,250,480,true\n", 2),
    ("index,kind,ssd_ms,rt_ms,inhibited\n1,stop,250,,maybe\n", 2),
    ("index,kind,ssd_ms,rt_ms,inhibited\n1,go\n", 2),
    ("index,kind,ssd_ms,rt_ms,inhibited\n0,go,,500,\n", 2),
])
def test_trial_csv_errors_carry_line_numbers(tmp_path, text, line):
    path = write(tmp_path / "bad.csv", text)
    with pytest.raises(DataFormatError) as excinfo:
        io.read_trials_csv(path)
    assert excinfo.value.line == line
    assert f"line {line}" in str(excinfo.value)


def test_trial_indices_must_increase(tmp_path):
    path = write(tmp_path / "bad.csv", "index,kind,ssd_ms,rt_ms,inhibited\n2,go,,500,\n1,go,,510,\n")
    with pytest.raises(DataFormatError):
        io.read_trials_csv(path)


def test_ms_formatting():
    assert io._fmt_ms(250.0) == "250"
    assert io._fmt_ms(480.5) == "480.5"
    assert io._fmt_ms(1.23456) == "1.235"
    assert io._fmt_ms(-0.0001) == "0"
    assert io._fmt_ms(None) == ""


def test_sample_csv(tmp_path):
    path = tmp_path / "x.csv"
    io.write_sample_csv([101.5, 220.0, 330.125], path)
    np.testing.assert_allclose(io.read_sample_csv(path), [101.5, 220.0, 330.125])
    bad = write(tmp_path / "bad.csv", "value\n1.0\nabc\n")
    with pytest.raises(DataFormatError) as excinfo:
        io.read_sample_csv(bad)
    assert excinfo.value.line == 3


def test_triples_csv(tmp_path):
    triples = SubjectTriples(rows=[(150.0, 60.0, 80.0), (140.5, 55.0, 70.25)], cluster="A", subjects=["s1", "s2"])
    path = tmp_path / "triples.csv"
    io.write_triples_csv(triples, path)
    back = io.read_triples_csv(path, cluster="A")
    assert back == triples
    bad = write(tmp_path / "bad.csv", "subject,mu,sigma,tau\ns1,150,0,80\n")
    with pytest.raises(DataFormatError) as excinfo:
        io.read_triples_csv(bad)
    assert excinfo.value.line == 2


def test_cohort_csv(tmp_path):
    cohort = [
        SubjectClusterParams(
            subject="s1",
            theta_s=ExGaussianParams(mu=93.2, sigma=116.2, tau=103.6),
            theta_a=ExGaussianParams(mu=160.0, sigma=100.0, tau=105.0),
            theta_b=ExGaussianParams(mu=150.0, sigma=100.0, tau=103.6),
        )
    ]
    path = tmp_path / "cohort.csv"
    io.write_cohort_csv(cohort, path)
    assert io.read_cohort_csv(path) == cohort

    missing = write(tmp_path / "missing.csv", "subject,cluster,mu,sigma,tau\ns1,S,90,100,100\ns1,A,90,100,100\n")
    with pytest.raises(DataFormatError, match="lacks cluster rows B"):
        io.read_cohort_csv(missing)
    duplicate = write(tmp_path / "dup.csv", "subject,cluster,mu,sigma,tau\ns1,S,90,100,100\ns1,s,90,100,100\n")
    with pytest.raises(DataFormatError) as excinfo:
        io.read_cohort_csv(duplicate)
    assert excinfo.value.line == 3


def test_chain_dump(tmp_path):
    draws = np.arange(2 * 4 * 3, dtype=float).reshape(2, 4, 3)
    chains = PosteriorChains(
        draws=draws, param_names=["a", "b", "c"], n_burn=1, n_iter=4,
        acceptance_rates=[[0.4] * 3, [0.5] * 3], rhat={"a": 1.0, "b": 1.0, "c": 1.0},
    )
    path = tmp_path / "chains.csv"
    io.write_chains_csv(chains, path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["chain", "iteration", "a", "b", "c"]
    assert len(frame) == 8
    assert frame.loc[5, "chain"] == 1 and frame.loc[5, "iteration"] == 1
    assert frame.loc[5, "b"] == draws[1, 1, 1]


def test_envelope_is_plain_json():
    doc = io.envelope(
        {"rhat": {"mu": np.inf}, "value": np.float64(1.5), "draws": np.array([1, 2]), "missing": float("nan")},
        config={"k": 44},
        seed=3,
    )
    assert doc["schema_version"] == 1
    assert doc["seed"] == 3
    assert doc["result"] == {"rhat": {"mu": "Infinity"}, "value": 1.5, "draws": [1, 2], "missing": None}
    text = io.dumps_envelope(doc)
    assert text.endswith("}\n")
    assert json.loads(text) == doc


def test_envelope_serializes_models():
    doc = io.envelope(STOP)
    assert doc["result"] == {"mu": 220.0, "sigma": 30.0, "tau": 50.0}
    assert doc["config"] == {}


def test_read_json_checks_schema(tmp_path):
    path = write(tmp_path / "doc.json", json.dumps({"schema_version": 99, "result": {}}))
    with pytest.raises(SchemaVersionError):
        io.read_json(path)
    broken = write(tmp_path / "broken.json", '{\n  "mu": 1,\n  oops\n}')
    with pytest.raises(DataFormatError) as excinfo:
        io.read_json(broken)
    assert excinfo.value.line == 3


def test_read_distribution(tmp_path):
    single = tmp_path / "single.json"
    io.write_json(io.envelope(STOP), single)
    assert io.read_distribution(single) == STOP

    mixture = MixtureSsrt(w_a=0.59, theta_a=STOP, theta_b=GO)
    bare = write(tmp_path / "mixture.json", json.dumps(io.to_jsonable(mixture)))
    assert io.read_distribution(bare) == mixture

    bad = write(tmp_path / "bad.json", json.dumps({"mu": 200.0, "sigma": -1.0, "tau": 10.0}))
    with pytest.raises(DataFormatError):
        io.read_distribution(bad)
