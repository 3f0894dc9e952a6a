import json
import math

import numpy as np
import pytest

from poissonctl.errors import SamplerExhausted
from poissonctl.poisson import fd_gradient, hamiltonian_field
from poissonctl.systems import (
    RigidBodyParams,
    VortexParams,
    bodies_from_proper_coordinates,
    bodies_proper_coordinates,
    box_sampler,
    coupled_bodies,
    default_sampler,
    load_params,
    pack_vortices,
    pack_waves,
    system_from_params,
    three_wave_observables,
    three_wave_reduced,
    three_wave_unreduced,
    vortex_printed_drift,
    vortex_reduced,
    vortex_unreduced,
)


def _random_states(n, dim, seed, scale=1.5):
    rng = np.random.default_rng(seed)
    return [rng.uniform(-scale, scale, dim) for _ in range(n)]


# --- point vortices ---------------------------------------------------------


def test_vortex_hamiltonian_value():
    H = vortex_reduced().hamiltonian
    assert H([0.0, 1.0, 0.0]) == pytest.approx(math.log(2) / (2 * math.pi), rel=1e-14)


def test_vortex_equilibrium_and_guard():
    vx = vortex_reduced()
    assert np.allclose(vx.drift([-1.0, 0.0, 0.0]), 0.0, atol=1e-15)
    assert not vx.is_valid([1.0, 0.0, 0.0])
    assert not vx.is_valid([0.0, 0.0, 0.0])
    assert vx.is_valid([0.0, 1.0, 0.0])


def test_vortex_drift_conserves_hamiltonian():
    vx = vortex_reduced(VortexParams((1.0, 2.0, -0.5)))
    for x in (default_sampler(vx)(np.random.default_rng([2, i])) for i in range(50)):
        g = vx.hamiltonian.grad(x)
        f = vx.drift(x)
        assert abs(g @ f) < 1e-10 * (1 + np.linalg.norm(g) * np.linalg.norm(f))


def test_printed_vortex_drift_is_not_hamiltonian():
    p = VortexParams()
    vx = vortex_reduced(p)
    x = np.array([0.3, 0.5, -0.2])
    ref = hamiltonian_field(vx.structure, vx.hamiltonian)(x)
    assert np.allclose(vx.drift(x), ref, atol=1e-10)
    printed = vortex_printed_drift(p, x)
    assert np.linalg.norm(printed - ref) > 1e-3
    assert abs(vx.hamiltonian.grad(x) @ printed) > 1e-4


def test_vortex_params_validation():
    for g in ((1.0, 1.0), (1.0, 0.0, 1.0), (1.0, math.inf, 1.0)):
        with pytest.raises(ValueError):
            VortexParams(g)


def test_unreduced_vortex_momentum_values():
    un = vortex_unreduced()
    x = pack_vortices([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)])
    J = un.momentum(x)
    # J1 = -1/2 sum G |z|^2, J2 = sum G y, J3 = -sum G x
    assert np.allclose(J, [-1.0, 1.0, -1.0])
    y = pack_vortices([(1.0, 1.0), (0.5, 0.0), (0.0, 0.0)])
    assert np.allclose(un.momentum(y), [-1.125, 1.0, -1.5])


def test_unreduced_vortex_conserves_hamiltonian_and_momenta():
    un = vortex_unreduced(VortexParams((1.0, 2.0, 3.0)))
    sys = un.system
    for x in _random_states(50, 6, seed=4):
        if not sys.is_valid(x):
            continue
        f = sys.drift(x)
        assert np.allclose(f, sys.structure.matrix(x) @ sys.hamiltonian.grad(x), atol=1e-12)
        for F in (sys.hamiltonian, *un.conserved_momenta):
            assert abs(F.grad(x) @ f) < 1e-9 * (1 + np.linalg.norm(f))


# --- three-wave interaction ---------------------------------------------------


def test_three_wave_reduced_hamiltonian_value():
    assert three_wave_reduced().hamiltonian([1.0, 0.0, 2.0, 3.0]) == -6.0
    obs = three_wave_observables()
    assert obs["V"]([0.0, 1.0, 1.0, 1.0]) == 3.0
    assert obs["W"]([0.0, 1.0, 1.0, 1.0]) == 3.0


def test_three_wave_unreduced_values():
    un = three_wave_unreduced()
    x = pack_waves([1.0, 1.0, 1.0])
    assert un.system.hamiltonian(x) == -1.0
    assert np.allclose(un.momentum(pack_waves([1.0, 0.0, 1.0])), [0.5, 0.5])
    f = un.system.drift(x)
    for J in un.momentum_map:
        assert abs(J.grad(x) @ f) < 1e-14


def test_three_wave_unreduced_conservation():
    un = three_wave_unreduced()
    sys = un.system
    J1, J2 = un.momentum_map
    broken = 0
    for x in _random_states(50, 6, seed=6):
        f = sys.drift(x)
        assert np.allclose(f, sys.structure.matrix(x) @ sys.hamiltonian.grad(x), atol=1e-12)
        for F in (sys.hamiltonian, *un.conserved_momenta):
            assert abs(F.grad(x) @ f) < 1e-10 * (1 + np.linalg.norm(f))
        broken += abs(J2.grad(x) @ f) > 1e-6
    # the difference of the first two actions is not a symmetry of this Hamiltonian
    assert broken > 40


def test_three_wave_unreduced_gradient_matches_finite_differences():
    H = three_wave_unreduced().system.hamiltonian
    for x in _random_states(20, 6, seed=8):
        assert np.allclose(H.grad(x), fd_gradient(H.func, x), atol=1e-7)


# --- coupled rigid bodies ---------------------------------------------------------


def test_bodies_values():
    p = RigidBodyParams()
    b = coupled_bodies(p)
    assert b.hamiltonian([0.0, 1.0, 1.0]) == pytest.approx(0.5, rel=1e-14)
    assert np.array_equal(b.drift([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0])
    assert p.eps == 0.5 and p.I_aug == (1.5, 1.5)
    assert np.allclose(bodies_proper_coordinates(p, [0.0, 1.0, 1.0]), [0.0, math.sqrt(2 / 3), 2 / math.sqrt(3)], atol=1e-12)


@pytest.mark.parametrize("params", [RigidBodyParams(), RigidBodyParams((2.0, 0.5), (0.3, 1.7), (0.8, 1.2))])
def test_bodies_proper_coordinates_identity(params):
    b = coupled_bodies(params)
    for k, x in enumerate(_random_states(100, 3, seed=9)):
        x[0] = (k / 100) * 2 * math.pi
        th, X, Y = bodies_proper_coordinates(params, x)
        assert b.hamiltonian(x) == pytest.approx((X * X + Y * Y) / (2 * params.delta(th)), rel=1e-12, abs=1e-14)
        assert np.allclose(bodies_from_proper_coordinates(params, [th, X, Y]), x, atol=1e-12)


@pytest.mark.parametrize("params", [RigidBodyParams(), RigidBodyParams((2.0, 0.5), (0.3, 1.7), (0.8, 1.2))])
def test_bodies_delta_bounds(params):
    thetas = np.linspace(0, 2 * math.pi, 1001)
    deltas = np.array([params.delta(t) for t in thetas])
    assert deltas.min() >= params.delta_lower_bound - 1e-12
    assert deltas.min() == pytest.approx(params.delta_lower_bound, rel=1e-9)
    assert deltas.max() == pytest.approx(params.delta_max, rel=1e-12)


def test_bodies_params_validation():
    for kwargs in ({"m": (0.0, 1.0)}, {"I": (1.0, -1.0)}, {"d": (-0.1, 1.0)}, {"m": (1.0,)}):
        with pytest.raises(ValueError):
            RigidBodyParams(**kwargs)


# --- parameter files and sampling -------------------------------------------------


def test_system_from_params():
    assert system_from_params({"system": "threewave"}).dim == 4
    vx = system_from_params({"system": "vortex", "gamma": [1.0, 2.0, 3.0], "bound": 0.5})
    assert vx.bounds.upper.tolist() == [0.5, 0.5, 0.5]
    b = system_from_params({"system": "bodies", "m": [2.0, 1.0], "d": [1.0, 0.5], "I": [1.0, 2.0]})
    assert b.hamiltonian([0.0, 0.0, 0.0]) == 0.0
    for bad in ({"system": "pendulum"}, {}, {"system": "threewave", "margin": 0.0}):
        with pytest.raises(ValueError):
            system_from_params(bad)


def test_load_params(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"system": "bodies", "m": [1.0, 3.0]}))
    sys = system_from_params(load_params(path))
    assert sys.name == "bodies"
    path.write_text("[1, 2]")
    with pytest.raises(ValueError):
        load_params(path)


def test_default_samplers_return_valid_states():
    for make in (vortex_reduced, three_wave_reduced, coupled_bodies):
        sys = make()
        s = default_sampler(sys)
        assert all(sys.is_valid(s(np.random.default_rng(i))) for i in range(50))


def test_sampler_exhaustion():
    tw = three_wave_reduced()
    s = box_sampler(tw, [0, 0, -2, -2], [1, 1, -1, -1], max_tries=20)
    with pytest.raises(SamplerExhausted):
        s(np.random.default_rng(0))
