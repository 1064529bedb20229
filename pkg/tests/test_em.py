"""E-step posteriors, exact M-step solvers, and the EM loop."""

import numpy as np
import pytest
from scipy.optimize import minimize

from moverstayer import (
    DimensionError,
    FitConfig,
    ModelParams,
    MStepError,
    PanelDataset,
    Subject,
    build_extended_records,
    e_step,
    expected_complete_loglik,
    fit_direct,
    fit_em,
    m_step,
    subject_log_likelihood,
    total_log_likelihood,
)
from moverstayer.estimate import _weights_to_arrays

from conftest import pure_posterior, random_params, random_subject


def test_e_step_matches_hand_computed_posterior(tiny_params):
    s = Subject(y=2, delta=0, x=[0.8], z=np.array([[0.3], [-0.6], [1.2]]))
    w, qvec = e_step(tiny_params, s)
    assert abs(w - 0.37209968474584104) < 1e-12
    want_q = [0.18121789047919304, 0.0750556203961673, 0.0475998741384583]
    assert np.allclose(qvec[:3], want_q, atol=1e-12, rtol=0)
    assert abs(qvec[3] - 0.06822629973202231) < 1e-12
    # the posterior mass identity holds exactly, not just to tolerance
    assert w == qvec.sum()


def test_e_step_movers_are_degenerate(tiny_params):
    s = Subject(y=3, delta=1, x=[0.8], z=np.zeros((4, 1)))
    w, qvec = e_step(tiny_params, s)
    assert w == 1.0
    assert qvec.shape == (5,)
    assert np.array_equal(qvec, np.zeros(5))


def test_e_step_agrees_with_enumeration_fuzz():
    rng = np.random.default_rng(59)
    for _ in range(100):
        d = int(rng.integers(0, 3))
        q = int(rng.integers(0, 3))
        params = random_params(rng, d=d, q=q, scale=2.0)
        s = random_subject(rng, d=d, q=q, y_max=6)
        w, qvec = e_step(params, s)
        w_true, q_true, qinf_true = pure_posterior(params, s)
        assert abs(w - w_true) < 1e-10
        assert np.allclose(qvec[:-1], q_true, atol=1e-10, rtol=0)
        assert abs(qvec[-1] - qinf_true) < 1e-10
        if s.delta == 0:
            assert abs(w - (qvec[:-1].sum() + qvec[-1])) < 1e-15


def test_e_step_rejects_mismatched_dimensions(tiny_params):
    with pytest.raises(DimensionError):
        e_step(tiny_params, Subject(y=0, delta=0, x=[0.1, 0.2], z=np.zeros((1, 1))))


def _weights_for(data, params):
    return [e_step(params, s) for s in data.subjects]


def test_extended_records_layout(tiny_params):
    mover = Subject(y=2, delta=1, x=[0.4], z=np.array([[0.1], [0.2], [0.3]]))
    censored = Subject(y=1, delta=0, x=[-0.2], z=np.array([[0.5], [0.6]]))
    data = PanelDataset([mover, censored])
    weights = _weights_for(data, tiny_params)
    rec = build_extended_records(data, weights)

    # mover: one record per time, outcome 1 until the event at y
    assert rec.design.shape == (3 + 4, 3)  # (1, x, z_t) columns
    assert list(rec.outcome[:3]) == [1, 1, 3]
    assert np.array_equal(rec.weight[:3], [1.0, 1.0, 1.0])
    assert np.array_equal(rec.design[0], [1.0, 0.4, 0.1])
    assert np.array_equal(rec.design[2], [1.0, 0.4, 0.3])

    # censored: a 1->1 and a 1->2 record per time with posterior masses
    _, qvec = weights[1]
    assert list(rec.outcome[3:]) == [1, 2, 1, 2]
    assert rec.weight[3] == pytest.approx(qvec[-1] + qvec[1], abs=1e-15)
    assert rec.weight[4] == pytest.approx(qvec[0], abs=1e-15)
    assert rec.weight[5] == pytest.approx(qvec[-1], abs=1e-15)
    assert rec.weight[6] == pytest.approx(qvec[1], abs=1e-15)


def test_weight_array_validation(tiny_params):
    data = PanelDataset([Subject(y=1, delta=0, x=[0.0], z=np.zeros((2, 1)))])
    with pytest.raises(DimensionError):
        _weights_to_arrays(data, [])
    with pytest.raises(DimensionError):
        _weights_to_arrays(data, [(0.5, np.zeros(2))])  # needs length y+2 = 3
    w, q, q_inf = _weights_to_arrays(data, [(0.5, np.array([0.1, 0.2, 0.15]))])
    assert w[0] == 0.5 and q_inf[0] == 0.15
    assert np.array_equal(q[0], [0.1, 0.2])


def test_expected_complete_loglik_matches_record_sum(small_s1, s1_params):
    data, _ = small_s1
    sub = PanelDataset(data.subjects[:40])
    weights = _weights_for(sub, s1_params)
    rec = build_extended_records(sub, weights)

    # independent evaluation: Bernoulli part + record-weighted multinomial part
    from conftest import pure_pi, pure_probs
    import math

    bern = 0.0
    for (w, _), s in zip(weights, sub.subjects):
        pi = pure_pi(s1_params, s.x)
        bern += w * math.log(pi) + (1.0 - w) * math.log(1.0 - pi)
    multi = 0.0
    for row, out, wt in zip(rec.design, rec.outcome, rec.weight):
        x, z_t = row[1:3], row[3:]
        probs = pure_probs(s1_params, x, z_t)
        multi += wt * math.log(probs[out - 1])
    got = expected_complete_loglik(s1_params, sub, weights)
    assert got == pytest.approx(bern + multi, abs=1e-9)


def test_m_step_solves_the_weighted_subproblems(small_s1, s1_params):
    data, _ = small_s1
    sub = PanelDataset(data.subjects[:60])
    weights = _weights_for(sub, s1_params)
    new = m_step(sub, weights)

    # stationarity of the full EM objective at the update
    theta0 = new.to_vector()

    def neg_q(vec):
        return -expected_complete_loglik(ModelParams.from_vector(vec, 2, 2), sub, weights)

    res = minimize(neg_q, theta0, method="BFGS", options={"gtol": 1e-9})
    # a general-purpose optimizer cannot improve on the Newton solution
    assert -res.fun <= -neg_q(theta0) + 1e-7
    assert np.allclose(res.x, theta0, atol=1e-4)

    # and the update strictly improves over the previous parameter value
    assert expected_complete_loglik(new, sub, weights) >= expected_complete_loglik(
        s1_params, sub, weights
    )


def test_m_step_stationarity_on_extended_records(small_s1, s1_params):
    from conftest import pure_pi, pure_probs

    data, _ = small_s1
    sub = PanelDataset(data.subjects[:60])
    weights = _weights_for(sub, s1_params)
    new = m_step(sub, weights)
    rec = build_extended_records(sub, weights)

    # logistic part: sum_i (w_i - pi_i) (1, x_i) = 0
    resid = np.array([w - pure_pi(new, s.x) for (w, _), s in zip(weights, sub.subjects)])
    xt = np.column_stack([np.ones(len(sub)), [s.x for s in sub.subjects]])
    assert np.max(np.abs(xt.T @ resid)) < 1e-7

    # multinomial part: record-weighted score is zero at the update
    g2 = np.zeros(rec.design.shape[1])
    g3 = np.zeros(rec.design.shape[1])
    for row, out, wt in zip(rec.design, rec.outcome, rec.weight):
        probs = pure_probs(new, row[1:3], row[3:])
        g2 += wt * ((out == 2) - probs[1]) * row
        g3 += wt * ((out == 3) - probs[2]) * row
    assert np.max(np.abs(g2)) < 1e-7
    assert np.max(np.abs(g3)) < 1e-7


def test_m_step_raises_on_singular_design():
    # z identically 1 duplicates the intercept column of the multinomial
    # design, so the Newton curvature matrix is exactly singular
    subs = [Subject(y=1, delta=0, x=[float(i % 3 - 1)], z=np.ones((2, 1))) for i in range(12)]
    subs.append(Subject(y=1, delta=1, x=[0.5], z=np.ones((2, 1))))
    data = PanelDataset(subs)
    params0 = ModelParams(alpha=[0.1, 0.0], beta12=[0.0, 0.0], beta13=[0.0, 0.0],
                          gamma12=[0.0], gamma13=[0.0])
    weights = _weights_for(data, params0)
    with pytest.raises(MStepError) as info:
        m_step(data, weights)
    err = info.value
    assert err.iterations >= 0
    assert err.grad_norm > 0
    assert np.shape(err.coef) == (6,)


def test_one_em_iteration_increases_observed_loglik(small_s1, s1_params):
    data, _ = small_s1
    sub = PanelDataset(data.subjects[:60])
    start = ModelParams(alpha=[0.0, 0.0, 0.0], beta12=[-0.5, 0.0, 0.0],
                        beta13=[-0.5, 0.0, 0.0], gamma12=[0.0, 0.0], gamma13=[0.0, 0.0])
    weights = _weights_for(sub, start)
    new = m_step(sub, weights, init=start)
    assert total_log_likelihood(new, sub) > total_log_likelihood(start, sub)


def test_fit_em_trace_is_monotone_and_matches_direct(small_s1):
    data, _ = small_s1
    em = fit_em(data, FitConfig(max_iter=3000, tol=1e-8))
    assert em.converged
    assert em.trace is not None
    assert em.n_evaluations == len(em.trace)
    assert em.start_index == 0
    assert np.all(np.diff(em.trace) >= -1e-8)
    assert em.loglik == em.trace[-1]

    direct = fit_direct(data, FitConfig(n_starts=1))
    assert abs(em.loglik - direct.loglik) < 1e-3


def test_fit_em_reports_nonconvergence_when_capped(small_s1):
    data, _ = small_s1
    em = fit_em(data, FitConfig(max_iter=3, tol=1e-12))
    assert not em.converged
    assert len(em.trace) == 4  # initial value plus one per iteration


def test_fit_em_accepts_explicit_init(small_s1, s1_params):
    data, _ = small_s1
    em = fit_em(data, FitConfig(max_iter=2000, tol=1e-8), init=s1_params)
    assert em.converged
    assert em.trace[0] == pytest.approx(total_log_likelihood(s1_params, data), abs=1e-9)
