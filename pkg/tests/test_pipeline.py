import math

import numpy as np
import pytest

from rsmkit.errors import InvalidKappa, Misaligned
from rsmkit.machine import load_model
from rsmkit.pipeline import HyperParams, analyze_kernel, attribute, workload_groups
from rsmkit.profile import Dictionary, RowKeySpec, build_dictionary
from rsmkit.synthetic import EXTRA_EVENTS, FIXTURE_EVENTS, synthetic_profile

FAST = HyperParams(draws=2000, seed=1)


@pytest.fixture(scope="module")
def model():
    return load_model()


@pytest.fixture(scope="module")
def profile():
    return synthetic_profile(4, "BANK", extra=EXTRA_EVENTS)


def test_hyperparams_validation():
    with pytest.raises(InvalidKappa):
        HyperParams(kappa=0.0)
    with pytest.raises(ValueError):
        HyperParams(tau=0)
    with pytest.raises(ValueError):
        HyperParams(normalization="l1")
    assert HyperParams().replace(draws=None, tau=3).tau == 3
    assert "threads" not in HyperParams().to_dict()


def test_analyze_kernel(profile, model):
    ka = analyze_kernel(profile.table, "kernel", "ts", model, FAST)
    rep = ka.report
    assert rep.normalized
    assert math.fsum(rep.per_resource.values()) == pytest.approx(1.0, abs=1e-12)
    assert max(rep.per_resource, key=rep.per_resource.get) == "BANK"
    assert ka.attribution.partition.excluded_labels == ["tex_cache_hit_rate"]
    assert rep.members["UNCAT"] == ["elapsed_cycles_sm"]
    assert "tex_cache_hit_rate" not in ka.attribution.dictionaries[None].col_labels


def test_workload_subsets(profile, model):
    ka = analyze_kernel(profile.table, "kernel", "ts", model, FAST, workload_key="workload")
    assert sorted(ka.attribution.ensembles) == [f"w{i}" for i in range(5)]
    br = ka.report.workload_breakdown
    for g, v in ka.report.unnormalized.items():
        assert v == pytest.approx(sum(br[w][g] for w in br) / len(br))


def test_workload_groups():
    d = build_dictionary(synthetic_profile(0).table, "kernel", RowKeySpec())
    groups = workload_groups(d, RowKeySpec(), "frequency")
    assert len(groups) == 8 and all(len(v) == 5 for v in groups.values())
    with pytest.raises(ValueError):
        workload_groups(d, RowKeySpec(keys=("workload",)), "frequency")


def test_attribute_checks_alignment(model):
    d = Dictionary(np.eye(3), ["a", "b", "c"], FIXTURE_EVENTS["DRAM"] + ["global_load"])
    with pytest.raises(Misaligned):
        attribute(d, np.ones(4), model, FAST)


def test_constant_event_gets_zero_belief(model):
    rng = np.random.default_rng(0)
    vals = rng.random((10, 3))
    vals[:, 2] = 7.0
    d = Dictionary(vals, [str(i) for i in range(10)], ["fb_p0_read_sectors", "global_load", "pcie_rx_active_pulse"])
    att = attribute(d, vals[:, 0], model, FAST)
    assert att.report.per_event["pcie_rx_active_pulse"] == 0.0
    assert att.report.per_resource["PCIE"] == 0.0
