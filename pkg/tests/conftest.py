import pytest

from moeplan import (
    CalibrationSpec,
    load_builtin_hardware,
    load_builtin_model,
    load_default_calibration,
    make_cluster,
)


@pytest.fixture(scope="session")
def calibration() -> CalibrationSpec:
    return load_default_calibration()


@pytest.fixture(scope="session")
def hardware():
    return load_builtin_hardware("reference")


@pytest.fixture(scope="session")
def cluster64(hardware, calibration):
    return make_cluster(hardware, 64, calibration)


@pytest.fixture(scope="session")
def cluster32(hardware, calibration):
    return make_cluster(hardware, 32, calibration)


@pytest.fixture(scope="session")
def deepseek():
    return load_builtin_model("deepseek-v3")


@pytest.fixture(scope="session")
def qwen():
    return load_builtin_model("qwen3-235b-a22b")


@pytest.fixture(scope="session")
def grok():
    return load_builtin_model("grok-1")


@pytest.fixture(scope="session")
def switch():
    return load_builtin_model("switch-c-2048")


@pytest.fixture(scope="session")
def llama():
    return load_builtin_model("llama-dense-70b")
