import numpy as np
import pytest

from twqfi import fock
from twqfi.models import (MODELS, DisplacementEncoding, KerrModel, OpoModel, PhaseEncoding,
                          encoding_closed_form, opo_closed_form, opo_qfi_analytic)
from twqfi.phase_space import to_quadratures


def test_opo_analytic_coherent_limit():
    assert opo_qfi_analytic(10.0, 0.0, 1.0, 0.0, 0.0) == pytest.approx(400.0)
    assert opo_qfi_analytic(0.0, 0.0, 1.0, 0.0, 0.5) == pytest.approx(np.cosh(2.0) - 1)


@pytest.mark.parametrize("vartheta,theta,t1", [(0.0, 0.0, 0.3), (0.7, 0.3, 0.25), (np.pi / 4, 0.0, 0.2)])
def test_opo_analytic_matches_fock_number_variance(vartheta, theta, t1):
    a0, n_cut = 1.5, 120
    psi = fock.evolve_exact(fock.opo_hamiltonian(n_cut, 1.0, theta),
                            fock.coherent_state(a0 * np.exp(1j * vartheta), n_cut), t1)
    assert 4 * fock.variance(psi, "n") == pytest.approx(
        opo_qfi_analytic(a0, vartheta, 1.0, theta, t1), rel=1e-10)


def test_opo_closed_form_identity_at_zero():
    x = to_quadratures(0.3 - 0.2j)
    assert np.allclose(opo_closed_form(x, 1.0, 0.4, 0.0), x)


def test_kerr_counter_rotation_default():
    assert KerrModel.without_bulk_rotation(2.0, 4.0).omega0 == pytest.approx(32.0)


def test_kerr_weyl_symbol_at_vacuum():
    # n^2 - 2n + 1/2 symbol at alpha = 0 gives 1/4 chi; number term + w0/2
    assert KerrModel(1.0, 2.0).weyl_hamiltonian(np.zeros(2)) == pytest.approx(0.25 + 1.0)


def test_encoding_closed_forms():
    x = to_quadratures(1.0)
    assert np.allclose(encoding_closed_form(x, PhaseEncoding(np.pi / 2), 1.0), to_quadratures(-1j))
    assert np.allclose(encoding_closed_form(x, DisplacementEncoding(0.5), 2.0), x - [1.0, 0.0])
    with pytest.raises(TypeError):
        encoding_closed_form(x, OpoModel(), 1.0)


def test_with_parameter_and_registry():
    enc = PhaseEncoding(0.0).with_parameter(0.3)
    assert enc.omega == 0.3 and enc.params["omega"] == 0.3
    with pytest.raises(TypeError):
        OpoModel().with_parameter(1.0)
    assert set(MODELS) == {"free", "opo", "depletion", "kerr", "phase", "displacement"}
