"""End-to-end smoke tests for the evomd python bindings.

Exercises the chain generate -> filter -> balance -> window -> split ->
format -> fit -> predict -> score on a tiny synthetic network, plus the
one-call pipeline runner. Everything crosses the boundary as plain dicts, so
the assertions below double as a check that the row shapes stay aligned with
the on-disk JSONL formats.
"""

import json

import pytest

import evomd


# --- fixtures ---------------------------------------------------------------


def write_network(tmp_path):
    """4-species cyclic Markov network with uniform 1..40 ps durations."""
    species = ["MoO", "MoS", "MoOS2", "MoS3"]
    n = len(species)
    dominant = 0.7
    rest = (1.0 - dominant) / (n - 2)
    transition = [
        [0.0 if j == i else (dominant if j == (i + 1) % n else rest) for j in range(n)]
        for i in range(n)
    ]
    net = {
        "network_id": "smoke",
        "species": species,
        "transition": transition,
        "duration_pmf": [[1.0 / 40] * 40 for _ in species],
    }
    path = tmp_path / "network.json"
    path.write_text(json.dumps(net))
    return path


# --- formulas / templates ----------------------------------------------------


def test_canonicalize_lenient_reorders():
    assert evomd.canonicalize("S2OMo") == "MoOS2"
    assert evomd.canonicalize("MoS2") == "MoS2"


def test_canonicalize_strict_rejects_non_canonical():
    assert evomd.canonicalize("MoOS2", strict=True) == "MoOS2"
    with pytest.raises(ValueError):
        evomd.canonicalize("S2OMo", strict=True)


def test_templates_are_pinned():
    t = evomd.templates()
    for name in ("system", "forward_1", "forward_2", "backward"):
        assert len(t[name]["sha256"]) == 64
        assert t[name]["text"]
    assert "{history_seq}" in t["reasoning_instruction"]["text"]


def test_parse_prediction():
    ok = evomd.parse_prediction("(MoS2, 100)")
    assert ok["ok"] and ok["formula"] == "MoS2" and ok["duration_ps"] == 100
    bad = evomd.parse_prediction("no tuple here")
    assert not bad["ok"] and bad["failure"] == "no_tuple"


def test_validation_errors_are_value_errors():
    with pytest.raises(ValueError):
        evomd.bandpass_filter([], tau_min=100, tau_max=10)


# --- event chain --------------------------------------------------------------


def test_event_chain(tmp_path):
    net_path = write_network(tmp_path)
    events = evomd.generate_events(net_path, trajectories=4, events_per=300, seed=7)
    assert len(events) == 1200
    assert set(events[0]) == {
        "trajectory_id",
        "lineage_id",
        "formula",
        "start_ps",
        "duration_ps",
    }

    kept = evomd.bandpass_filter(events, tau_min=5, tau_max=35)
    assert 0 < len(kept) < len(events)
    assert all(5 <= e["duration_ps"] <= 35 for e in kept)

    balanced = evomd.balance(kept, bin_edges=[10, 20], cap=25, seed=1)
    assert 0 < len(balanced) <= len(kept)

    samples, stats = evomd.build_windows(events, task="forward_1", seed=3)
    assert stats["samples"] == len(samples) > 0

    train, test = evomd.split_disjoint(samples, test_fraction=0.25, seed=3)
    train_ids = {s["trajectory_id"] for s in train}
    test_ids = {s["trajectory_id"] for s in test}
    assert train_ids and test_ids and not (train_ids & test_ids)

    train_recs = evomd.format_records(train)
    test_recs = evomd.format_records(test)
    rec = train_recs[0]
    assert rec["task"] == "forward_1" and rec["split"] == "train"
    assert "{" not in rec["instruction"] and rec["output"].startswith("(")

    model = evomd.fit_baseline(train_recs, kind="markov", order=1)
    assert model["kind"] == "markov" and model["format_version"] == 1

    preds = evomd.predict(model, test_recs, k=3)
    assert len(preds) == len(test_recs)
    assert evomd.parse_prediction(preds[0]["output"])["ok"]

    result = evomd.score(preds, test_recs, task="forward_1")
    assert result["total"] == len(test_recs)
    assert result["missing_rate_pct"] == 0.0
    # a fitted order-1 model on a 0.7-dominant chain beats chance by a margin
    assert result["accuracy_pct"] > 40.0


def test_frames_roundtrip(tmp_path):
    net_path = write_network(tmp_path)
    frames_path = tmp_path / "frames.jsonl"
    stats = evomd.generate_frames(
        net_path, frames_path, trajectories=2, events_per=150, seed=11
    )
    assert stats["events"] == 300 and stats["frames"] > 0
    extracted = evomd.extract_events(frames_path)
    assert extracted == evomd.generate_events(
        net_path, trajectories=2, events_per=150, seed=11
    )


def test_interleave_qa():
    forecast = [{"instruction": f"f{i}", "output": "(MoS2, 10)"} for i in range(10)]
    qa_pool = [{"instruction": f"q{i}", "output": f"a{i}"} for i in range(5)]
    mixed = evomd.interleave_qa(forecast, qa_pool, ratio=0.5, seed=4)
    assert len(mixed) == 15
    assert sum(1 for row in mixed if row.get("task") == "qa") == 5


# --- pipeline runner ------------------------------------------------------------


def test_run_pipeline(tmp_path):
    net_path = write_network(tmp_path)
    out_dir = tmp_path / "run"
    config = {
        "out_dir": str(out_dir),
        "network": str(net_path),
        "trajectories": 4,
        "events_per_trajectory": 250,
        "tau_min": 1,
        "tau_max": 500,
        "bin_edges": [8, 20],
        "cap": 100000,
        "test_fraction": 0.3,
        "tasks": ["forward_1", "backward"],
        "baseline": "markov",
        "order": 1,
        "seed": 11,
    }
    manifest = evomd.run_pipeline(config)
    assert all(
        manifest["stages"][s]["status"] in ("ok", "not_applicable")
        for s in manifest["stages"]
    )
    assert (out_dir / "dataset.jsonl").exists()
    assert (out_dir / "report" / "summary.txt").exists()

    dataset_bytes = (out_dir / "dataset.jsonl").read_bytes()
    rerun = evomd.run_pipeline(config)
    assert rerun["counts"] == manifest["counts"]
    assert (out_dir / "dataset.jsonl").read_bytes() == dataset_bytes
