import numpy as np
import pytest

from vjmht.data import load_manifest, load_records
from vjmht.hierarchy import VjmhtConfig, init_params
from vjmht.synth import synth_dataset
from vjmht.training import TrainConfig

TOY = VjmhtConfig(d_f=8, d_s=6, d_v=6, f_layers=1, s_layers=2, f_ffn=12, s_ffn=10,
                  f_heads=2, s_heads=2)



def small_config(**overrides) -> TrainConfig:
    """A desk-scale model and schedule for the synthetic set."""
    base = dict(d_s=32, d_v=32, f_layers=1, s_layers=1, f_ffn=64, s_ffn=64, f_heads=2, s_heads=2,
                n_clusters=4, lr_initial=1e-3, lr_after_epoch_30=1e-4, lr_drop_epoch=210,
                epochs=300, kts_max_segments=8)
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_params():
    return init_params(TOY, seed=3)


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    synth_dataset(7, 8, 64, 32, 4, out)
    return out


@pytest.fixture
def synth_records(synth_dir):
    return load_records(load_manifest(synth_dir / "manifest.json"))


# --- acceptance reporting -------------------------------------------------

_RESULTS = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion and assert it."""

    def record(criterion: str, passed: bool, detail: str = ""):
        _RESULTS.append((criterion, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'}  {criterion}  {detail}")
        assert passed, f"{criterion}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}  {detail}")
