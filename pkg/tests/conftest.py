import numpy as np
import pytest

from hpplast.assembly import LoadData, Spaces, assemble
from hpplast.bench import load_from_id
from hpplast.mesh import build_rectangle_mesh, refine
from hpplast.solver import solve_mixed
from hpplast.tensor_core import Material

BENCH_MATERIAL = Material(1000.0, 1000.0, 500.0, 5.0)

CRITERIA: dict[int, str] = {}  # acceptance number -> PASS/FAIL line


def record_criterion(number: int, name: str, ok: bool, detail: str = "") -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {name}" + (f": {detail}" if detail else "")
    CRITERIA[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])


@pytest.fixture(scope="session")
def material():
    return BENCH_MATERIAL


@pytest.fixture(scope="session")
def bench_load():
    return load_from_id("benchmark")


def solved(mesh, material=BENCH_MATERIAL, load=None):
    load = load if load is not None else load_from_id("benchmark")
    system = assemble(mesh, material, Spaces.build(mesh, material), load)
    return system, solve_mixed(system)


@pytest.fixture(scope="session")
def graded_mesh():
    """Mesh with hanging nodes and mixed degrees 2..3."""
    mesh = build_rectangle_mesh(nx=2, ny=2, p=2)
    mesh = refine(mesh, [3])
    e = mesh.lookup[(1, 3, 3)]
    mesh = refine(mesh, [e])
    return mesh.with_degrees(np.where(mesh.level >= 1, 3, 2))


@pytest.fixture(scope="session")
def bench_p2(material, bench_load):
    mesh = refine(build_rectangle_mesh(nx=2, ny=2, p=2), range(4))
    return solved(mesh, material, bench_load)


@pytest.fixture(scope="session")
def bench_graded(material, bench_load, graded_mesh):
    return solved(graded_mesh, material, bench_load)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
