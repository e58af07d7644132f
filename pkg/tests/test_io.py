import os

import fsspec
import numpy as np
import pandas as pd
import pytest

from trefftz_dg.io import (
    check_directory_exists,
    check_file_exists,
    format_table,
    is_local_path,
    join_url,
    read_text,
    write_mesh_dump,
    write_table,
)


@pytest.fixture
def table():
    return pd.DataFrame(
        {"level": [1, 2], "h": [0.5, 0.25], "rate_v": [np.nan, 2.0]},
        columns=["level", "h", "rate_v"],
    )


def test_format_table(table):
    assert format_table(table) == "level,h,rate_v\n1,5.00000e-01,\n2,2.50000e-01,2.00000e+00\n"


def test_write_table_creates_parents(tmp_path, table):
    path = tmp_path / "nested" / "out" / "table.csv"
    write_table(table, str(path))
    assert path.read_text(encoding="utf-8") == format_table(table)
    assert check_file_exists(str(path))
    assert check_directory_exists(str(path.parent))


def test_write_table_to_stdout(capsys, table):
    write_table(table)
    assert capsys.readouterr().out == format_table(table)


def test_remote_paths(table):
    assert is_local_path("results/table.csv")
    assert not is_local_path("memory://results/table.csv")
    assert join_url("memory://results", "a.csv") == "memory://results/a.csv"
    assert join_url("results", "a.csv") == os.path.join("results", "a.csv")
    write_table(table, "memory://results/table.csv")
    with fsspec.open("memory://results/table.csv", "r") as f:
        assert f.read() == format_table(table)


def test_read_text():
    with fsspec.open("memory://configs/run.conf", "w") as f:
        f.write("case = zero\n")
    assert read_text("memory://configs/run.conf") == "case = zero\n"


def test_write_mesh_dump(tmp_path, small_mesh):
    mesh = small_mesh(d=1, level=1)
    path = tmp_path / "dumps" / "mesh.txt"
    write_mesh_dump(mesh, str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == mesh.dump()
