import math

import numpy as np
import pytest

from gordonse.models import AM_PR_WEIGHT, GD_PR_WEIGHT, make_stream
from gordonse.scalarized_ao import (DegenerateInstanceError, fo_minimizer, ho_minimizer,
                                    instance_from_arrays, loss, min_hessian_eigenvalue,
                                    numeric_3var_check, sample_instance, tau_gordon)
from gordonse.state_evolution import (StatePoint, closed_form_moments, gordon_expanded_fo,
                                      gordon_expanded_ho)

S = StatePoint(0.6, 0.8)


@pytest.mark.parametrize("k", range(5))
def test_closed_form_matches_numeric_minimizer(k):
    inst = sample_instance(AM_PR_WEIGHT, "phase_retrieval", S, 0.1, 500, 50, make_stream(k))
    closed = ho_minimizer(inst)
    num = numeric_3var_check(inst)
    assert np.allclose([closed.xi.alpha, closed.xi.mu, closed.xi.nu],
                       [num.alpha, num.mu, num.nu], atol=1e-6)
    assert closed.loss_value == pytest.approx(loss(inst, [num.alpha, num.mu, num.nu]), abs=1e-10)
    assert min_hessian_eigenvalue(inst, [closed.xi.alpha, closed.xi.mu, closed.xi.nu]) > -1e-6


def test_degenerate_instances():
    rng = make_stream(1)
    A = rng.standard_normal((40, 3))
    with pytest.raises(DegenerateInstanceError, match="span"):
        ho_minimizer(instance_from_arrays(A, A @ [1.0, 2.0, 3.0], [0, 0, 0.1]))
    with pytest.raises(DegenerateInstanceError):
        ho_minimizer(instance_from_arrays(A, rng.standard_normal(40), [0, 0, 5.0]))


def test_first_order_minimizer_zero_step():
    inst = sample_instance(GD_PR_WEIGHT, "phase_retrieval", S, 0.1, 300, 30, make_stream(2))
    x = fo_minimizer(inst, S, 0.0)
    assert (x.alpha, x.mu, x.nu) == (0.6, 0.8, 0.0)


def test_tau_formula():
    m = closed_form_moments("am_pr", "phase_retrieval", S, 0.1)
    gap = m.e_omega2 - m.e_z1_omega ** 2 - m.e_z2_omega ** 2
    assert tau_gordon(*m, 20.0) == pytest.approx(math.sqrt(20 / 19 * gap))


def test_large_instances_approach_the_gordon_update():
    ho = gordon_expanded_ho(S, "am_pr", "phase_retrieval", 0.1, 10.0)
    fo = gordon_expanded_fo(S, "gd_pr", "phase_retrieval", 0.1, 10.0, 0.5)
    errs_ho, errs_fo = [], []
    for k in range(4):
        inst = sample_instance(AM_PR_WEIGHT, "phase_retrieval", S, 0.1, 20000, 2000,
                               make_stream(30, k))
        x = ho_minimizer(inst).xi
        errs_ho.append(max(abs(x.alpha - ho.alpha), abs(x.mu - ho.mu), abs(x.nu - ho.nu)))
        inst = sample_instance(GD_PR_WEIGHT, "phase_retrieval", S, 0.1, 20000, 2000,
                               make_stream(31, k))
        y = fo_minimizer(inst, S, 0.5)
        errs_fo.append(max(abs(y.alpha - fo.alpha), abs(y.mu - fo.mu), abs(y.nu - fo.nu)))
    assert np.mean(errs_ho) < 0.03 and np.mean(errs_fo) < 0.03


def test_instance_validation():
    with pytest.raises(ValueError):
        sample_instance(AM_PR_WEIGHT, "phase_retrieval", S, 0.1, 2, 10, make_stream(0))
