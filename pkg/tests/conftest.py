import importlib.resources

import numpy as np
import pytest

from qmbounds import quantum


def rotation_basis(theta: float, label: str = "") -> quantum.MeasurementBasis:
    """Real qubit basis rotated by ``theta`` from the computational one."""
    c, s = np.cos(theta), np.sin(theta)
    return quantum.basis(np.array([[c, -s], [s, c]]), label=label or f"rot{theta:.4f}")


def instance_path(name: str):
    return importlib.resources.files("qmbounds") / "instances" / f"{name}.json"


def schema_path(name: str):
    return importlib.resources.files("qmbounds") / "schemas" / f"{name}.schema.json"


@pytest.fixture(scope="session")
def comp2():
    return quantum.basis(np.eye(2), label="computational")


@pytest.fixture(scope="session")
def comp3():
    return quantum.basis(np.eye(3), label="computational")


@pytest.fixture(scope="session")
def basis60(comp2):
    return rotation_basis(np.pi / 3, "rot60")


@pytest.fixture(scope="session")
def mub2():
    return rotation_basis(np.pi / 4, "mub")
