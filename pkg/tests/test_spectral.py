"""Diagonalization, occupation bookkeeping, DOS, and the spectrum cache."""

import numpy as np
import pytest

import abtopo.spectral as spectral
from abtopo.hamiltonian import HoppingMatrix, build_hofstadter
from abtopo.spectral import (
    NumericalError,
    Spectrum,
    SpectrumCache,
    butterfly,
    default_dos_width,
    density_of_states,
    diagonalize,
    provenance_key,
    read_spectrum,
    write_spectrum,
)
from abtopo.tiling import SystemSpec, cut_and_project


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def charpoly_eigenvalues(h):
    """Independent eigenvalue oracle: characteristic polynomial coefficients
    by the Faddeev-LeVerrier recurrence, roots by companion matrix."""
    n = len(h)
    coeffs = [1.0]
    m = np.zeros_like(h)
    for k in range(1, n + 1):
        m = h @ m + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(h @ m).real / k)
    roots = np.roots(coeffs)
    return np.sort(roots.real)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_eigenvalues_match_charpoly_roots(n):
    h = random_hermitian(n, seed=n)
    spec = diagonalize(HoppingMatrix(matrix=h))
    assert np.abs(spec.energies - charpoly_eigenvalues(h)).max() < 1e-8
    # eigenpairs actually solve the problem
    res = h @ spec.states - spec.states * spec.energies
    assert np.abs(res).max() < 1e-12


def test_diagonalize_rejects_non_hermitian():
    h = np.array([[0.0, 1.0], [0.5, 0.0]], dtype=complex)
    with pytest.raises(NumericalError, match="Hermitian"):
        diagonalize(HoppingMatrix(matrix=h))


def test_occupation_count_closed_inequality():
    spec = Spectrum(energies=np.array([-1.0, 0.0, 0.0, 2.0]), states=np.eye(4, dtype=complex))
    assert spec.occupation_count(-2.0) == 0
    assert spec.occupation_count(-1.0) == 1
    assert spec.occupation_count(0.0) == 3
    assert spec.occupation_count(5.0) == 4
    k, block = spec.occupied_block(0.0)
    assert k == 3 and block.shape == (4, 3)


def test_fermi_occupations_keep_multiplets_together():
    e = np.array([-1.0, 0.0, 0.0 + 1e-15, 0.0 + 2e-15, 2.0])
    spec = Spectrum(energies=e, states=np.eye(5, dtype=complex))
    occ = spec.fermi_occupations()
    # the three nearly-equal levels share one occupation (the whole multiplet)
    assert occ.tolist() == [1, 4, 4, 4, 5]


def test_butterfly_shapes_and_zero_field_column():
    graph = cut_and_project(SystemSpec(r0=4.0, phi=0.0))
    grid = [0.0, 0.3, 0.7]
    table = butterfly(graph, grid)
    assert table.shape == (3, graph.n_sites)
    e0 = np.linalg.eigvalsh(build_hofstadter(graph, 0.0).matrix)
    assert np.abs(table[0] - e0).max() < 1e-12
    # spectra are sorted rows
    assert (np.diff(table, axis=1) >= -1e-12).all()


def test_dos_normalization_and_subset_additivity():
    h = random_hermitian(40, seed=3)
    spec = diagonalize(HoppingMatrix(matrix=h))
    full = density_of_states(spec)
    integral = np.trapezoid(full.values, full.grid)
    assert abs(integral - 1.0) < 0.02
    idx = np.arange(40)
    a = density_of_states(spec, full.eps, subset=idx[:15], grid=full.grid)
    b = density_of_states(spec, full.eps, subset=idx[15:], grid=full.grid)
    assert np.abs(a.values + b.values - full.values).max() < 1e-12


def test_dos_width_rule_and_validation():
    e = np.array([0.0, 1.0, 3.0, 4.0, 10.0])
    # consecutive gaps 1, 2, 1, 6 -> median 1.5
    assert default_dos_width(e) == pytest.approx(75.0)
    spec = Spectrum(energies=e, states=np.eye(5, dtype=complex))
    with pytest.raises(ValueError):
        density_of_states(spec, eps=0.0)


def test_spectrum_file_round_trip(tmp_path):
    h = random_hermitian(12, seed=9)
    spec = diagonalize(HoppingMatrix(matrix=h), provenance={"tag": "x", "n": 12})
    path = tmp_path / "s.blts"
    write_spectrum(spec, path)
    back = read_spectrum(path)
    assert np.abs(back.energies - spec.energies).max() == 0.0
    assert np.abs(back.states - spec.states).max() == 0.0
    assert back.provenance == spec.provenance
    with open(path, "r+b") as fh:
        fh.write(b"ZZZZ")
    with pytest.raises(ValueError, match="magic"):
        read_spectrum(path)


def test_provenance_key_is_order_insensitive():
    assert provenance_key({"a": 1, "b": 2}) == provenance_key({"b": 2, "a": 1})
    assert provenance_key({"a": 1}) != provenance_key({"a": 2})


def test_cache_hit_skips_recomputation(tmp_path, monkeypatch):
    cache = SpectrumCache(tmp_path / "cache")
    h = random_hermitian(10, seed=1)
    hm = HoppingMatrix(matrix=h)
    prov = {"case": "cache-test"}
    calls = {"n": 0}
    real = spectral.diagonalize

    def counting(hm_, provenance=None):
        calls["n"] += 1
        return real(hm_, provenance)

    monkeypatch.setattr(spectral, "diagonalize", counting)
    s1 = cache.get_or_compute(hm, prov)
    s2 = cache.get_or_compute(hm, prov)
    assert calls["n"] == 1
    assert np.abs(s1.energies - s2.energies).max() == 0.0
