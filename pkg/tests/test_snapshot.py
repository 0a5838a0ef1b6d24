import numpy as np
import pytest

from levyheat.errors import ConfigurationError
from levyheat.free_kernel import GridSpec, free_density_grid, resolving_grid
from levyheat.snapshot import (
    Snapshot,
    diff_snapshots,
    kernel_snapshot,
    perturbed_snapshot,
    read_snapshot,
    write_snapshot,
)


def test_round_trip(tmp_path, rng):
    blocks = [rng.standard_normal((3, 16)), rng.standard_normal(16)]
    snap = Snapshot(1, 16, 0.25, 2.0, 0.5, False, blocks, {"kind": "test", "note": [1, 2]})
    path = write_snapshot(tmp_path / "k.bin", snap)
    back = read_snapshot(path)
    assert (back.dim, back.n, back.dx, back.x_max, back.t, back.oracle) == (1, 16, 0.25, 2.0, 0.5, False)
    for a, b in zip(blocks, back.blocks):
        np.testing.assert_array_equal(a, b)
    assert back.meta == {"kind": "test", "note": [1, 2]}
    assert path.read_bytes()[:4] == b"LVHK"


def test_identical_files_diff_zero(tmp_path, cauchy):
    kg = free_density_grid(cauchy, 0.5, resolving_grid(cauchy, 0.5, n=4096))
    write_snapshot(tmp_path / "a.bin", kernel_snapshot(kg, 0.5))
    write_snapshot(tmp_path / "b.bin", kernel_snapshot(kg, 0.5))
    res = diff_snapshots(read_snapshot(tmp_path / "a.bin"), read_snapshot(tmp_path / "b.bin"), tol=0.0)
    assert res["max_relative_difference"] == 0.0
    assert res["within_tolerance"]


def test_nested_grids_compare_on_coarse_points(tmp_path, cauchy):
    spec = resolving_grid(cauchy, 0.5, n=2048)
    coarse = free_density_grid(cauchy, 0.5, spec)
    fine = free_density_grid(cauchy, 0.5, GridSpec(1, 4096, spec.x_max))
    res = diff_snapshots(kernel_snapshot(fine, 0.5), kernel_snapshot(coarse, 0.5), tol=1e-3)
    assert res["within_tolerance"], res


def test_mismatched_snapshots(rng):
    a = Snapshot(1, 8, 0.5, 2.0, 0.5, False, [rng.random(8)])
    with pytest.raises(ConfigurationError):
        diff_snapshots(a, Snapshot(1, 8, 0.5, 2.0, 0.25, False, [rng.random(8)]), 1e-3)
    with pytest.raises(ConfigurationError):
        diff_snapshots(a, Snapshot(1, 6, 4 / 6, 2.0, 0.5, False, [rng.random(6)]), 1e-3)


def test_bad_magic(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(ConfigurationError):
        read_snapshot(tmp_path / "x.bin")


def test_perturbed_snapshot_blocks(tmp_path, well_kernel):
    snap = perturbed_snapshot(well_kernel)
    assert len(snap.blocks) == 1 + len(well_kernel.terms)
    back = read_snapshot(write_snapshot(tmp_path / "p.bin", snap))
    np.testing.assert_array_equal(back.blocks[0], well_kernel.grid_values())
    assert back.meta["kind"] == "perturbed"
