import numpy as np
import pytest

from rss2onbody.errors import InvalidConfigError, SearchSpaceTooLargeError
from rss2onbody.theory import (
    DiscreteJoint,
    TableExtractor,
    conditional_entropy,
    optimal_discriminator_check,
    optimal_extractor_search,
    optimal_output_check,
    optimal_predictor_check,
    random_factored_joint,
    random_joint,
    run_theory_checks,
    virtual_value,
)

LAMBDAS = (0.1, 1.0, 10.0)


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _product_joint(q_x, q_y, q_z) -> DiscreteJoint:
    return DiscreteJoint.from_table(np.einsum("x,y,z->xyz", q_x, q_y, q_z))


def _split_joint() -> DiscreteJoint:
    """x = (a, b): y depends on a, z is b itself"""
    q_a, q_b, p_on = np.array([0.4, 0.6]), np.array([0.3, 0.7]), np.array([0.2, 0.7])
    q = np.zeros((4, 2, 2))
    for a in range(2):
        for b in range(2):
            q[2 * a + b, 0, b] = q_a[a] * q_b[b] * (1 - p_on[a])
            q[2 * a + b, 1, b] = q_a[a] * q_b[b] * p_on[a]
    return DiscreteJoint.from_table(q)


@pytest.mark.order(6)
def test_entropy_of_fair_coin():
    joint = DiscreteJoint.from_table(np.ones((3, 2, 2)))
    assert conditional_entropy(joint, "y", ["x"]) == pytest.approx(np.log(2), abs=1e-15)


def test_entropy_of_deterministic_label():
    q = np.zeros((4, 2, 3))
    for x in range(4):
        q[x, x % 2, :] = 1.0
    assert conditional_entropy(DiscreteJoint.from_table(q), "y", ["x"]) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_entropy_matches_direct_sums(seed):
    joint = random_joint(4, 3, seed)
    q_xy, q_x = joint.q.sum(axis=2), joint.q.sum(axis=(1, 2))
    direct = -float((q_xy * np.log(q_xy / q_x[:, None])).sum())
    assert abs(conditional_entropy(joint, "y", ["x"]) - direct) <= 1e-12

    q_yz, q_y = joint.q.sum(axis=0), joint.q.sum(axis=(0, 2))
    direct = -float((q_yz * np.log(q_yz / q_y[:, None])).sum())
    assert abs(conditional_entropy(joint, "z", ["y"]) - direct) <= 1e-12
    assert abs(conditional_entropy(joint, "z") - _entropy(joint.q.sum(axis=(0, 1)))) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_conditioning_never_increases_entropy(seed):
    joint = random_joint(5, 3, seed)
    extractor = TableExtractor.from_codes(np.random.default_rng(seed).integers(0, 3, 5))
    h_y = conditional_entropy(joint, "y")
    h_e = conditional_entropy(joint, "y", [extractor])
    h_x = conditional_entropy(joint, "y", ["x"])
    assert 0 <= h_x <= h_e + 1e-15 <= h_y + 2e-15


def test_predictor_check_identity_and_constant():
    joint = random_joint(4, 2, 1)
    identity = optimal_predictor_check(joint, TableExtractor.identity(4))
    assert identity.passed
    assert identity.minimized_loss == pytest.approx(conditional_entropy(joint, "y", ["x"]), abs=1e-9)
    constant = optimal_predictor_check(joint, TableExtractor.constant(4))
    assert constant.passed
    assert constant.minimized_loss == pytest.approx(_entropy(joint.q.sum(axis=(0, 2))), abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_predictor_check_random(seed):
    joint = random_joint(6, 3, seed)
    extractor = TableExtractor.from_codes(np.random.default_rng(seed).integers(0, 3, 6))
    report = optimal_predictor_check(joint, extractor, seed=seed)
    assert report.passed
    assert report.best_challenger_loss >= report.posterior_loss


def test_discriminator_check_deterministic_motion():
    q = np.zeros((3, 2, 3))
    for x in range(3):
        q[x, :, x] = [0.3, 0.7]
    report = optimal_discriminator_check(DiscreteJoint.from_table(q), TableExtractor.identity(3))
    assert report.passed
    assert report.entropy == 0.0
    assert report.minimized_loss == 0.0


def test_discriminator_check_independent_motion():
    q_z = np.array([0.2, 0.5, 0.3])
    joint = _product_joint(np.array([0.25, 0.75]), np.array([0.4, 0.6]), q_z)
    report = optimal_discriminator_check(joint, TableExtractor.identity(2))
    assert report.passed
    assert report.entropy == pytest.approx(_entropy(q_z), abs=1e-12)
    assert report.minimized_loss == pytest.approx(_entropy(q_z), abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_discriminator_check_random(seed):
    joint = random_joint(5, 3, seed)
    extractor = TableExtractor.from_codes(np.random.default_rng(seed + 10).integers(0, 3, 5))
    assert optimal_discriminator_check(joint, extractor, seed=seed).passed


def test_virtual_value_constant_extractor():
    q_y, q_z = np.array([0.35, 0.65]), np.array([0.1, 0.6, 0.3])
    joint = _product_joint(np.array([0.5, 0.2, 0.3]), q_y, q_z)
    for lam in LAMBDAS:
        expected = _entropy(q_y) - lam * _entropy(q_z)
        assert virtual_value(joint, TableExtractor.constant(3), lam) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_virtual_value_composition(seed):
    joint = random_joint(5, 2, seed)
    identity = TableExtractor.identity(5)
    # q_y(.|x) is a function of x, so conditioning on it adds nothing
    expected = conditional_entropy(joint, "y", ["x"]) - 2.0 * conditional_entropy(joint, "z", ["x"])
    assert abs(virtual_value(joint, identity, 2.0) - expected) <= 1e-12

    extractor = TableExtractor.from_codes(np.random.default_rng(seed).integers(0, 2, 5))
    expected = conditional_entropy(joint, "y", [extractor]) - 0.5 * conditional_entropy(
        joint, "z", [extractor]
    )
    assert abs(virtual_value(joint, extractor, 0.5) - expected) <= 1e-12


def test_virtual_value_rejects_negative_lambda():
    with pytest.raises(InvalidConfigError):
        virtual_value(random_joint(2, 2, 0), TableExtractor.identity(2), -1.0)


@pytest.mark.parametrize("lambda_", LAMBDAS)
def test_search_drops_motion_information(lambda_):
    best, cert = optimal_extractor_search(_split_joint(), lambda_, 2)
    assert cert.candidate_count == 16
    assert cert.equilibrium_certified and cert.bound_certified
    assert cert.representation_z_information <= 1e-9
    # the best extractor keeps a and forgets b
    assert best.codes[0] == best.codes[1] != best.codes[2] == best.codes[3]


@pytest.mark.parametrize("seed", range(5))
def test_witness_attains_bound(seed):
    joint = random_joint(4, 2, seed)
    _, cert = optimal_extractor_search(joint, 1.0, 4)
    assert cert.bound_holds and cert.min_bound_slack >= -1e-9
    assert cert.witness_attains_bound
    assert abs(cert.witness_value - cert.witness_bound) <= 1e-9
    assert cert.witness_in_search_space


@pytest.mark.parametrize("seed", range(3))
def test_identity_optimal_when_motion_is_independent(seed):
    rng = np.random.default_rng(seed)
    q_xy = rng.dirichlet(np.ones(6)).reshape(3, 2)
    joint = DiscreteJoint.from_table(np.einsum("xy,z->xyz", q_xy, rng.dirichlet(np.ones(2))))
    assert len(TableExtractor.posterior_witness(joint).codomain) == 3
    _, cert = optimal_extractor_search(joint, 1.0, 3)
    identity_value = virtual_value(joint, TableExtractor.identity(3), 1.0)
    assert identity_value <= cert.exhaustive_min + 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_factored_instances_are_certified(seed):
    joint = random_factored_joint(2, 3, 2, seed)
    for lam in LAMBDAS:
        _, cert = optimal_extractor_search(joint, lam, 3)
        assert cert.equilibrium_certified, cert.deviations
        assert cert.witness_is_optimal


def test_search_space_bound():
    with pytest.raises(SearchSpaceTooLargeError) as e:
        optimal_extractor_search(random_joint(8, 2, 0), 1.0, 6)
    assert e.value.size == 6**8
    with pytest.raises(InvalidConfigError):
        optimal_extractor_search(random_joint(2, 2, 0), 1.0, 0)


def test_output_check_deterministic_label():
    q = np.zeros((4, 2, 2))
    for x in range(4):
        q[x, x % 2, :] = [0.25, 0.75]
    report = optimal_output_check(DiscreteJoint.from_table(q), 1.0)
    assert report.passed
    assert report.codomain_size == 2
    np.testing.assert_array_equal(report.predictor_output, [[1, 0], [0, 1], [1, 0], [0, 1]])


@pytest.mark.parametrize("seed", range(3))
def test_output_check_is_lambda_invariant(seed):
    joint = random_factored_joint(2, 2, 3, seed)
    outputs = []
    for lam in LAMBDAS:
        report = optimal_output_check(joint, lam, 2)
        assert report.passed
        outputs.append(report.predictor_output)
    np.testing.assert_allclose(outputs[0], outputs[1], atol=1e-12)
    np.testing.assert_allclose(outputs[0], outputs[2], atol=1e-12)
    np.testing.assert_allclose(outputs[0], joint.posterior_y, atol=1e-9)


def test_joint_validation():
    with pytest.raises(InvalidConfigError):
        DiscreteJoint(q=np.full((2, 3, 2), 1 / 12))
    with pytest.raises(InvalidConfigError):
        DiscreteJoint(q=np.full((2, 2, 2), 0.2))
    with pytest.raises(InvalidConfigError):
        DiscreteJoint.from_table(np.concatenate([np.ones((1, 2, 2)), np.zeros((1, 2, 2))]))


def test_run_theory_checks():
    report = run_theory_checks(seed=0, instances=3, max_x=5, max_z=3, codomain_size=3)
    assert report.passed
    assert report.lambdas == list(LAMBDAS)
    assert {c.family for c in report.certificates} == {"generic", "factored"}
    # 2 table checks plus 3 per lambda, for both families of each instance
    assert len(report.certificates) == 3 * 2 * (2 + 3 * len(LAMBDAS))
    back = type(report).model_validate_json(report.model_dump_json())
    assert back == report


def test_run_theory_checks_arguments():
    with pytest.raises(InvalidConfigError):
        run_theory_checks(seed=0, instances=1, max_x=1)
