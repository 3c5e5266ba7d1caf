"""Hamiltonian assembly: Peierls phases, flux tubes, disorder, chiral symmetry."""

import numpy as np
import pytest

from abtopo.hamiltonian import (
    anticommutator_norm,
    apply_disorder,
    build_hofstadter,
    chiral_operator,
    flux_tube_phases,
    read_matrix,
    write_matrix,
)
from abtopo.tiling import SystemSpec, cut_and_project, square_lattice_disk


def ab_patch(r0=5.0):
    return cut_and_project(SystemSpec(r0=r0, phi=0.0))


def test_hermitian_and_unit_amplitudes():
    graph = ab_patch()
    hm = build_hofstadter(graph, 0.37)
    h = hm.matrix
    assert np.abs(h - h.conj().T).max() < 1e-15
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    assert np.abs(np.abs(h[i, j]) - 1.0).max() < 1e-12
    # no diagonal, no non-edge entries
    assert np.abs(np.diagonal(h)).max() == 0.0
    mask = np.zeros(h.shape, dtype=bool)
    mask[i, j] = mask[j, i] = True
    assert np.abs(h[~mask]).max() == 0.0


def _cycle_flux(h, cycle):
    """Accumulated hopping phase around a closed site cycle."""
    total = 0.0
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        total += np.angle(-h[b, a])
    return total


def _shoelace(points):
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def test_plaquette_flux_equals_field_times_area():
    """Loop phase around any face equals 2 pi phi * 2 * (signed area): the
    gauge-invariant check that the Landau gauge encodes a uniform field
    normalized to phi flux quanta per unit square tile (area 1/2)."""
    phi = 0.31
    graph = cut_and_project(SystemSpec(r0=4.0, phi=phi))
    h = build_hofstadter(graph, phi).matrix
    index = {tuple(p): i for i, p in enumerate(graph.preimages)}
    eye = np.eye(4, dtype=int)
    checked = 0
    for p in graph.preimages:
        for a in range(4):
            for b in range(a + 1, 4):
                corners = [tuple(p), tuple(p + eye[a]), tuple(p + eye[a] + eye[b]), tuple(p + eye[b])]
                if not all(c in index for c in corners):
                    continue
                ids = [index[c] for c in corners]
                area = _shoelace(graph.positions[ids])
                flux = _cycle_flux(h, ids)
                expected = 2 * np.pi * phi * 2 * area
                assert abs((flux - expected + np.pi) % (2 * np.pi) - np.pi) < 1e-9
                checked += 1
    assert checked > 20


def test_square_lattice_plaquette_flux():
    phi = 0.69
    disk = square_lattice_disk(3.0, 1.0, center_offset=0.5)
    h = build_hofstadter(disk, phi).matrix
    index = {(a, b): k for k, (a, b) in enumerate(zip(disk.preimages[:, 0], disk.preimages[:, 1]))}
    a, b = disk.preimages[0, 0], disk.preimages[0, 1]
    cycle = [index[(a, b)], index[(a + 1, b)], index[(a + 1, b + 1)], index[(a, b + 1)]]
    flux = _cycle_flux(h, cycle)
    expected = 2 * np.pi * phi * 2 * _shoelace(disk.positions[cycle])
    assert abs((flux - expected + np.pi) % (2 * np.pi) - np.pi) < 1e-9


def test_integer_flux_tube_is_gauge_equivalent():
    disk = square_lattice_disk(4.0, 0.8, center_offset=0.5)
    hm = build_hofstadter(disk, 0.4)
    for phi_c in (1.0, 2.0, -1.0):
        shifted = flux_tube_phases(hm, disk, phi_c)
        e0 = np.linalg.eigvalsh(hm.matrix)
        e1 = np.linalg.eigvalsh(shifted.matrix)
        assert np.abs(e0 - e1).max() < 1e-10


def test_flux_tube_rejects_site_at_origin():
    disk = square_lattice_disk(4.0, 1.0)  # site exactly at the origin
    hm = build_hofstadter(disk, 0.4)
    with pytest.raises(ValueError, match="flux tube"):
        flux_tube_phases(hm, disk, 0.5)


def test_flux_tube_zero_is_identity():
    graph = ab_patch(4.0)
    hm = build_hofstadter(graph, 0.2)
    out = flux_tube_phases(hm, graph, 0.0)
    assert np.abs(out.matrix - hm.matrix).max() == 0.0


def test_disorder_statistics_and_determinism():
    graph = ab_patch(8.0)
    hm = build_hofstadter(graph, 0.1)
    w = 0.3
    d1 = apply_disorder(hm, w, seed=7)
    d2 = apply_disorder(hm, w, seed=7)
    d3 = apply_disorder(hm, w, seed=8)
    onsite = np.real(np.diagonal(d1.matrix))
    assert np.abs(np.diagonal(d2.matrix) - np.diagonal(d1.matrix)).max() == 0.0
    assert np.abs(np.diagonal(d3.matrix) - np.diagonal(d1.matrix)).max() > 0.0
    # uniform on [-w/2, w/2]: bounds exact, mean and variance within
    # 5-sigma statistical tolerance for this sample size
    n = len(onsite)
    assert onsite.min() >= -w / 2 and onsite.max() <= w / 2
    assert abs(onsite.mean()) < 5 * (w / np.sqrt(12)) / np.sqrt(n)
    var = w * w / 12
    assert abs(onsite.var() - var) < 5 * var * np.sqrt(2.0 / n) * 2
    # hoppings untouched
    off = d1.matrix - np.diag(np.diagonal(d1.matrix))
    assert np.abs(off - hm.matrix).max() == 0.0


def test_disorder_rejects_negative_w():
    graph = ab_patch(3.0)
    hm = build_hofstadter(graph, 0.1)
    with pytest.raises(ValueError):
        apply_disorder(hm, -0.1, 0)


def test_chiral_anticommutation():
    graph = ab_patch(5.0)
    hm = build_hofstadter(graph, 0.7375)
    gamma = chiral_operator(graph)
    assert anticommutator_norm(hm, gamma) < 1e-12
    disordered = apply_disorder(hm, 0.3, 1)
    assert anticommutator_norm(disordered, gamma) > 0.01


def test_matrix_round_trip(tmp_path):
    graph = ab_patch(3.0)
    hm = build_hofstadter(graph, 0.3)
    path = tmp_path / "h.blth"
    write_matrix(hm, path)
    back = read_matrix(path)
    assert np.abs(back - hm.matrix).max() == 0.0
    with open(path, "r+b") as fh:
        fh.write(b"XXXX")
    with pytest.raises(ValueError, match="magic"):
        read_matrix(path)
