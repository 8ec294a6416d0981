"""Entropy oracles for the equilibrium of the extractor / predictor / discriminator game.

Everything works on a finite joint q(x, y, z) with binary y. Entropies are in nats.
Extractors are lookup tables x -> code. The optimal predictor is the posterior
q(y | E(x)), the optimal discriminator q(z | E(x), q_y(.|E(x))); the optimal extractor
minimizes V(E) = H(y | E) - lambda H(z | E, q_y(.|E)) and is bounded from below by
H(y | x) - lambda H(z | q_y(.|E)).
"""

from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Literal, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.optimize
from pydantic import BaseModel
from scipy.special import logsumexp, xlogy

from .errors import InvalidConfigError, SearchSpaceTooLargeError
from .run_logger import RunLogger, default_logger

DEFAULT_TOLERANCE = 1e-9
SEARCH_BOUND = 10**6
POSTERIOR_DECIMALS = 12
_MINIMIZER_TOLERANCE = 1e-10
_SEARCH_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    q: np.ndarray
    """n_x x 2 x n_z probability table q(x, y, z)"""

    def __post_init__(self):
        q = self.q
        if q.ndim != 3 or q.shape[1] != 2 or q.shape[0] < 1 or q.shape[2] < 1:
            raise InvalidConfigError(f"A joint table has shape (n_x, 2, n_z), got {q.shape}")
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise InvalidConfigError("Joint probabilities must be finite and non-negative")
        if abs(q.sum() - 1.0) > 1e-9:
            raise InvalidConfigError(f"Joint probabilities sum to {q.sum()}, not 1")
        if np.any(q.sum(axis=(1, 2)) <= 0):
            raise InvalidConfigError("Every x needs positive probability")
        q.setflags(write=False)

    @classmethod
    def from_table(cls, table: np.ndarray) -> "DiscreteJoint":
        t = np.asarray(table, dtype=np.float64)
        return cls(q=t / t.sum())

    @property
    def n_x(self) -> int:
        return self.q.shape[0]

    @property
    def n_z(self) -> int:
        return self.q.shape[2]

    @property
    def q_x(self) -> np.ndarray:
        return self.q.sum(axis=(1, 2))

    @property
    def q_xy(self) -> np.ndarray:
        return self.q.sum(axis=2)

    @property
    def q_xz(self) -> np.ndarray:
        return self.q.sum(axis=1)

    @property
    def posterior_y(self) -> np.ndarray:
        """q(y | x), one row per x"""
        return self.q_xy / self.q_x[:, None]


@dataclass(frozen=True)
class XFunction:
    """A deterministic function of x, given by its value on every x"""

    values: tuple[Hashable, ...]

    def __call__(self, x: int) -> Hashable:
        return self.values[x]


@dataclass(frozen=True)
class TableExtractor(XFunction):
    values: tuple[int, ...]

    @classmethod
    def identity(cls, n_x: int) -> "TableExtractor":
        return cls(tuple(range(n_x)))

    @classmethod
    def constant(cls, n_x: int) -> "TableExtractor":
        return cls((0,) * n_x)

    @classmethod
    def from_codes(cls, codes: Sequence[int]) -> "TableExtractor":
        return cls(tuple(int(c) for c in codes))

    @classmethod
    def posterior_witness(cls, joint: DiscreteJoint) -> "TableExtractor":
        """E(x) = q_y(.|x): x values sharing a posterior share a code"""
        keys = [_posterior_key(row) for row in joint.posterior_y]
        first: dict[Hashable, int] = {}
        return cls(tuple(first.setdefault(k, len(first)) for k in keys))

    @property
    def codes(self) -> tuple[int, ...]:
        return self.values

    @property
    def codomain(self) -> list[int]:
        return sorted(set(self.values))


Variable = Union[Literal["x", "y", "z"], XFunction]


def _posterior_key(probs: np.ndarray) -> tuple[float, ...]:
    return tuple(float(v) for v in np.round(probs, POSTERIOR_DECIMALS))


def _value_of(var: Variable, x: int, y: int, z: int) -> Hashable:
    if var == "x":
        return x
    if var == "y":
        return y
    if var == "z":
        return z
    assert isinstance(var, XFunction)
    return var(x)


def conditional_entropy(
    joint: DiscreteJoint, target: Variable, conditions: Sequence[Variable] = ()
) -> float:
    """H(target | conditions) by summation over the table, in nats"""
    pair_mass: dict[tuple[Hashable, tuple], float] = defaultdict(float)
    cond_mass: dict[tuple, float] = defaultdict(float)
    for (x, y, z), m in np.ndenumerate(joint.q):
        if m == 0:
            continue
        c = tuple(_value_of(v, x, y, z) for v in conditions)
        pair_mass[(_value_of(target, x, y, z), c)] += m
        cond_mass[c] += m
    h = -sum(m * np.log(m / cond_mass[c]) for (_, c), m in pair_mass.items())
    return float(h) + 0.0


def posterior_feature(joint: DiscreteJoint, f: XFunction) -> XFunction:
    """x -> q_y(.|f(x)), rounded so equal posteriors compare equal"""
    mass: dict[Hashable, np.ndarray] = defaultdict(lambda: np.zeros(2))
    for x in range(joint.n_x):
        mass[f(x)] += joint.q_xy[x]
    return XFunction(tuple(_posterior_key(mass[f(x)] / mass[f(x)].sum()) for x in range(joint.n_x)))


def predictor_table(joint: DiscreteJoint, extractor: TableExtractor) -> dict[int, np.ndarray]:
    """The optimal predictor q(y | E(x) = e) per code e"""
    mass: dict[int, np.ndarray] = defaultdict(lambda: np.zeros(2))
    for x in range(joint.n_x):
        mass[extractor(x)] += joint.q_xy[x]
    return {e: m / m.sum() for e, m in mass.items()}


def _min_cross_entropy(masses: np.ndarray) -> tuple[float, np.ndarray]:
    """min over the simplex of -sum_k m_k log p_k, by numeric optimization"""
    m = np.asarray(masses, dtype=np.float64)
    p = np.zeros_like(m)
    support = m > 0
    if support.sum() <= 1:
        p[int(np.argmax(m))] = 1.0
        return 0.0, p
    ms = m[support]
    if ms.size == 2:
        a, b = ms
        res = scipy.optimize.minimize_scalar(
            lambda t: -(a * np.log(t) + b * np.log1p(-t)),
            bounds=(1e-15, 1 - 1e-15),
            method="bounded",
            options={"xatol": 1e-13},
        )
        ps = np.array([res.x, 1 - res.x])
    else:
        total = ms.sum()

        def objective(theta: np.ndarray):
            log_p = theta - logsumexp(theta)
            return -float(ms @ log_p), total * np.exp(log_p) - ms

        res = scipy.optimize.minimize(
            objective, np.zeros(ms.size), jac=True, method="BFGS", options={"gtol": 1e-13}
        )
        ps = np.exp(res.x - logsumexp(res.x))
    p[support] = ps
    value = -float(xlogy(m, np.where(support, p, 1.0)).sum())
    return value, p


def _table_loss(masses: Mapping[Hashable, np.ndarray], table: Mapping[Hashable, np.ndarray]) -> float:
    return -float(sum(xlogy(m, table[k]).sum() for k, m in masses.items()))


class TableCheckReport(BaseModel):
    entropy: float
    """Closed form conditional entropy"""
    minimized_loss: float
    """Cross-entropy minimized numerically over all tables"""
    posterior_loss: float
    """Cross-entropy of the posterior table"""
    best_challenger_loss: float
    """Lowest cross-entropy among random challenger tables"""
    deviation: float
    passed: bool


def _check_tables(
    masses: Mapping[Hashable, np.ndarray],
    entropy: float,
    challengers: int,
    seed: int,
    tolerance: float,
) -> TableCheckReport:
    minimized = float(sum(_min_cross_entropy(m)[0] for m in masses.values()))
    posterior = {k: m / m.sum() for k, m in masses.items()}
    posterior_loss = _table_loss(masses, posterior)
    rng = np.random.default_rng(seed)
    best_challenger = np.inf
    for _ in range(challengers):
        table = {k: rng.dirichlet(np.ones(m.size)) for k, m in masses.items()}
        best_challenger = min(best_challenger, _table_loss(masses, table))
    deviation = max(abs(minimized - entropy), abs(posterior_loss - entropy))
    return TableCheckReport(
        entropy=entropy,
        minimized_loss=minimized,
        posterior_loss=posterior_loss,
        best_challenger_loss=float(best_challenger),
        deviation=deviation,
        passed=deviation <= tolerance and best_challenger >= posterior_loss - 1e-12,
    )


def optimal_predictor_check(
    joint: DiscreteJoint,
    extractor: TableExtractor,
    *,
    challengers: int = 32,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
) -> TableCheckReport:
    """The posterior q(y | E(x)) is the best predictor table and its loss is H(y | E(x))"""
    masses: dict[Hashable, np.ndarray] = defaultdict(lambda: np.zeros(2))
    for x in range(joint.n_x):
        masses[extractor(x)] += joint.q_xy[x]
    entropy = conditional_entropy(joint, "y", [extractor])
    return _check_tables(masses, entropy, challengers, seed, tolerance)


def optimal_discriminator_check(
    joint: DiscreteJoint,
    extractor: TableExtractor,
    predictor: Optional[Mapping[int, Sequence[float]]] = None,
    *,
    challengers: int = 32,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
) -> TableCheckReport:
    """Best discriminator loss equals H(z | E(x), P(E(x))); P defaults to the optimal predictor"""
    table = predictor_table(joint, extractor) if predictor is None else predictor
    p_of_x = XFunction(
        tuple(_posterior_key(np.asarray(table[extractor(x)])) for x in range(joint.n_x))
    )
    masses: dict[Hashable, np.ndarray] = defaultdict(lambda: np.zeros(joint.n_z))
    for x in range(joint.n_x):
        masses[(extractor(x), p_of_x(x))] += joint.q_xz[x]
    entropy = conditional_entropy(joint, "z", [extractor, p_of_x])
    return _check_tables(masses, entropy, challengers, seed, tolerance)


def virtual_value(joint: DiscreteJoint, extractor: TableExtractor, lambda_: float) -> float:
    """V(E) = H(y | E(x)) - lambda H(z | E(x), q_y(.|E(x)))"""
    if lambda_ < 0:
        raise InvalidConfigError("lambda must not be negative")
    h_y = conditional_entropy(joint, "y", [extractor])
    h_z = conditional_entropy(joint, "z", [extractor, posterior_feature(joint, extractor)])
    return h_y - lambda_ * h_z


def _enumerate_codes(start: int, stop: int, n_x: int, m: int) -> np.ndarray:
    ids = np.arange(start, stop, dtype=np.int64)
    return (ids[:, None] // (m ** np.arange(n_x, dtype=np.int64))[None, :]) % m


def _entropy_rows(q_ab: np.ndarray) -> np.ndarray:
    """H(b | a) per candidate from c x |a| x |b| joint masses"""
    q_a = q_ab.sum(axis=2)
    return -(xlogy(q_ab, q_ab).sum(axis=(1, 2)) - xlogy(q_a, q_a).sum(axis=1))


@dataclass(frozen=True)
class CandidateEntropies:
    h_y_given_e: np.ndarray
    """H(y | E) per candidate"""
    h_z_given_e: np.ndarray
    """H(z | E) = H(z | E, q_y(.|E)) per candidate"""
    h_z_given_posterior: np.ndarray
    """H(z | q_y(.|E)) per candidate"""


def candidate_entropies(joint: DiscreteJoint, codes: np.ndarray, m: int) -> CandidateEntropies:
    """Vectorized entropies for a batch of extractors given as c x n_x code rows"""
    onehot = (codes[:, :, None] == np.arange(m)[None, None, :]).astype(np.float64)
    q_ey = np.einsum("cxm,xy->cmy", onehot, joint.q_xy)
    q_ez = np.einsum("cxm,xz->cmz", onehot, joint.q_xz)
    q_e = q_ey.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        post = np.round(q_ey[:, :, 1] / q_e, POSTERIOR_DECIMALS)
    # empty codes get a key of their own
    key = np.where(q_e > 0, post, -1.0 - np.arange(m)[None, :])
    rep = np.argmax(key[:, :, None] == key[:, None, :], axis=2)
    group = (rep[:, :, None] == np.arange(m)[None, None, :]).astype(np.float64)
    q_gz = np.einsum("cmg,cmz->cgz", group, q_ez)
    return CandidateEntropies(
        h_y_given_e=_entropy_rows(q_ey),
        h_z_given_e=_entropy_rows(q_ez),
        h_z_given_posterior=_entropy_rows(q_gz),
    )


class ExtractorCertificate(BaseModel):
    lambda_: float
    codomain_size: int
    candidate_count: int
    exhaustive_min: float
    best_codes: list[int]
    minimizer_count: int
    bound_holds: bool
    """V(E) >= H(y|x) - lambda H(z | q_y(.|E)) for every candidate"""
    min_bound_slack: float
    witness_codes: list[int]
    witness_value: float
    witness_bound: float
    witness_attains_bound: bool
    witness_in_search_space: bool
    witness_is_optimal: Optional[bool]
    """None when the witness needs more codes than the search allows"""
    max_sufficiency_deviation: float
    """max over minimizers of |H(y | E*) - H(y | x)|"""
    max_independence_deviation: float
    """max over minimizers of |H(z | E*, q_y(.|E*)) - H(z | q_y(.|E*))|"""
    representation_z_information: float
    """H(z) - H(z | E*) at the best extractor"""
    bound_certified: bool
    equilibrium_certified: bool
    deviations: list[str] = []


@dataclass(frozen=True)
class _SearchResult:
    minimum: float
    minimizers: np.ndarray
    entropies: CandidateEntropies
    """Entropies of the minimizers"""
    min_slack: float
    count: int


def _search(
    joint: DiscreteJoint, lambda_: float, m: int, bound: int
) -> _SearchResult:
    count = m**joint.n_x
    if count > bound:
        raise SearchSpaceTooLargeError(count, bound)
    h_y_x = conditional_entropy(joint, "y", ["x"])
    best = np.inf
    min_slack = np.inf
    kept_codes: list[np.ndarray] = []
    kept: list[CandidateEntropies] = []
    kept_values: list[np.ndarray] = []
    for start in range(0, count, _SEARCH_CHUNK):
        codes = _enumerate_codes(start, min(start + _SEARCH_CHUNK, count), joint.n_x, m)
        ent = candidate_entropies(joint, codes, m)
        values = ent.h_y_given_e - lambda_ * ent.h_z_given_e
        slack = values - (h_y_x - lambda_ * ent.h_z_given_posterior)
        min_slack = min(min_slack, float(slack.min()))
        best = min(best, float(values.min()))
        near = values <= best + _MINIMIZER_TOLERANCE
        if near.any():
            kept_codes.append(codes[near])
            kept_values.append(values[near])
            kept.append(
                CandidateEntropies(
                    ent.h_y_given_e[near], ent.h_z_given_e[near], ent.h_z_given_posterior[near]
                )
            )
    all_values = np.concatenate(kept_values)
    final = all_values <= best + _MINIMIZER_TOLERANCE
    return _SearchResult(
        minimum=best,
        minimizers=np.concatenate(kept_codes)[final],
        entropies=CandidateEntropies(
            np.concatenate([k.h_y_given_e for k in kept])[final],
            np.concatenate([k.h_z_given_e for k in kept])[final],
            np.concatenate([k.h_z_given_posterior for k in kept])[final],
        ),
        min_slack=min_slack,
        count=count,
    )


def optimal_extractor_search(
    joint: DiscreteJoint,
    lambda_: float,
    codomain_size: int,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    bound: int = SEARCH_BOUND,
) -> tuple[TableExtractor, ExtractorCertificate]:
    """Exhaustive minimization of V over all extractors X -> {0, ..., codomain_size - 1}"""
    if lambda_ < 0:
        raise InvalidConfigError("lambda must not be negative")
    if codomain_size < 1:
        raise InvalidConfigError("codomain_size must be positive")
    result = _search(joint, lambda_, codomain_size, bound)
    h_y_x = conditional_entropy(joint, "y", ["x"])
    h_z = conditional_entropy(joint, "z")

    witness = TableExtractor.posterior_witness(joint)
    witness_value = virtual_value(joint, witness, lambda_)
    witness_bound = h_y_x - lambda_ * conditional_entropy(
        joint, "z", [posterior_feature(joint, witness)]
    )
    in_space = len(witness.codomain) <= codomain_size
    witness_optimal = witness_value <= result.minimum + tolerance if in_space else None

    ent = result.entropies
    sufficiency = float(np.abs(ent.h_y_given_e - h_y_x).max())
    independence = float(np.abs(ent.h_z_given_e - ent.h_z_given_posterior).max())
    best = TableExtractor.from_codes(result.minimizers[0])

    deviations = []
    if sufficiency > tolerance:
        deviations.append(
            f"a minimizer loses label information: |H(y|E*) - H(y|x)| = {sufficiency:.3e}"
        )
    if independence > tolerance:
        deviations.append(
            f"a minimizer keeps motion information beyond the posterior: deviation {independence:.3e}"
        )
    if witness_optimal is False:
        deviations.append(
            f"the posterior witness ({witness_value:.12f}) is above the exhaustive minimum ({result.minimum:.12f})"
        )
    bound_holds = result.min_slack >= -tolerance
    attains = abs(witness_value - witness_bound) <= tolerance
    certificate = ExtractorCertificate(
        lambda_=lambda_,
        codomain_size=codomain_size,
        candidate_count=result.count,
        exhaustive_min=result.minimum,
        best_codes=list(best.codes),
        minimizer_count=int(result.minimizers.shape[0]),
        bound_holds=bound_holds,
        min_bound_slack=result.min_slack,
        witness_codes=list(witness.codes),
        witness_value=witness_value,
        witness_bound=witness_bound,
        witness_attains_bound=attains,
        witness_in_search_space=in_space,
        witness_is_optimal=witness_optimal,
        max_sufficiency_deviation=sufficiency,
        max_independence_deviation=independence,
        representation_z_information=h_z - float(ent.h_z_given_e[0]),
        bound_certified=bound_holds and attains,
        equilibrium_certified=not deviations,
        deviations=deviations,
    )
    return best, certificate


class OutputCheckReport(BaseModel):
    lambda_: float
    codomain_size: int
    minimizer_count: int
    predictor_deviation: float
    """max over minimizers and x of |q_y(.|E*(x)) - q_y(.|x)|"""
    discriminator_deviation: float
    """max over minimizers and x of |q(z | E*(x), q_y(.|E*(x))) - q_z(.|q_y(.|x))|"""
    predictor_output: list[list[float]]
    """Optimal predictor output per x at the best extractor"""
    discriminator_output: list[list[float]]
    passed: bool


def _z_given_groups(joint: DiscreteJoint, keys: Sequence[Hashable]) -> np.ndarray:
    mass: dict[Hashable, np.ndarray] = defaultdict(lambda: np.zeros(joint.n_z))
    for x, k in enumerate(keys):
        mass[k] += joint.q_xz[x]
    return np.array([mass[k] / mass[k].sum() for k in keys])


def optimal_output_check(
    joint: DiscreteJoint,
    lambda_: float = 1.0,
    codomain_size: Optional[int] = None,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    bound: int = SEARCH_BOUND,
) -> OutputCheckReport:
    """At the searched optimum P outputs q_y(.|x) and D outputs q_z(.|q_y(.|x))"""
    if codomain_size is None:
        codomain_size = len(TableExtractor.posterior_witness(joint).codomain)
    if lambda_ < 0:
        raise InvalidConfigError("lambda must not be negative")
    result = _search(joint, lambda_, codomain_size, bound)
    target_p = joint.posterior_y
    target_d = _z_given_groups(joint, [_posterior_key(r) for r in target_p])
    p_dev = 0.0
    d_dev = 0.0
    outputs: Optional[tuple[np.ndarray, np.ndarray]] = None
    for codes in result.minimizers:
        extractor = TableExtractor.from_codes(codes)
        table = predictor_table(joint, extractor)
        p_out = np.array([table[extractor(x)] for x in range(joint.n_x)])
        # q(z | E, q_y(.|E)) equals q(z | E): the posterior is a function of the code
        d_out = _z_given_groups(joint, list(extractor.codes))
        p_dev = max(p_dev, float(np.abs(p_out - target_p).max()))
        d_dev = max(d_dev, float(np.abs(d_out - target_d).max()))
        if outputs is None:
            outputs = (p_out, d_out)
    assert outputs is not None
    return OutputCheckReport(
        lambda_=lambda_,
        codomain_size=codomain_size,
        minimizer_count=int(result.minimizers.shape[0]),
        predictor_deviation=p_dev,
        discriminator_deviation=d_dev,
        predictor_output=outputs[0].tolist(),
        discriminator_output=outputs[1].tolist(),
        passed=p_dev <= tolerance and d_dev <= tolerance,
    )


def random_joint(n_x: int, n_z: int, seed: int, concentration: float = 1.0) -> DiscreteJoint:
    """Dirichlet distributed table, every cell positive"""
    rng = np.random.default_rng(seed)
    q = rng.dirichlet(np.full(n_x * 2 * n_z, concentration)).reshape(n_x, 2, n_z)
    return DiscreteJoint.from_table(q)


def random_factored_joint(n_a: int, n_b: int, n_z: int, seed: int) -> DiscreteJoint:
    """x = a * n_b + b with independent a, b; y depends on a only, z on b only"""
    rng = np.random.default_rng(seed)
    q_a = rng.dirichlet(np.ones(n_a))
    q_b = rng.dirichlet(np.ones(n_b))
    p_on = rng.uniform(0.05, 0.95, n_a)
    q_y_a = np.stack([1 - p_on, p_on], axis=1)
    q_z_b = rng.dirichlet(np.ones(n_z), size=n_b)
    q = np.einsum("a,b,ay,bz->abyz", q_a, q_b, q_y_a, q_z_b).reshape(n_a * n_b, 2, n_z)
    return DiscreteJoint.from_table(q)


class TheoryCertificate(BaseModel):
    check: str
    family: Literal["generic", "factored"]
    instance_seed: int
    n_x: int
    n_z: int
    lambda_: Optional[float] = None
    passed: bool
    max_deviation: float
    reported_deviations: list[str] = []


class TheoryReport(BaseModel):
    report_version: Literal[1] = 1
    seed: int
    lambdas: list[float]
    codomain_size: int
    certificates: list[TheoryCertificate]
    passed: bool


def run_theory_checks(
    seed: int,
    instances: int,
    max_x: int = 8,
    max_z: int = 3,
    codomain_size: int = 4,
    lambdas: Sequence[float] = (0.1, 1.0, 10.0),
    logger: Optional[RunLogger] = None,
) -> TheoryReport:
    """Certificates on `instances` generic and `instances` factored random joints.

    Bounds, witness attainment and the predictor / discriminator optima are gated on
    both families. The equilibrium statements about every minimizer are gated on the
    factored family and only reported on generic instances.
    """
    logger = logger or default_logger(__name__)
    if max_x < 2 or max_z < 2 or codomain_size < 2:
        raise InvalidConfigError("max_x, max_z and codomain_size must be at least 2")
    seeds = np.random.SeedSequence(seed).generate_state(instances, dtype=np.uint32)
    certs: list[TheoryCertificate] = []
    for inst_seed in (int(s) for s in seeds):
        rng = np.random.default_rng(inst_seed)
        n_z = int(rng.integers(2, max_z + 1))
        generic = random_joint(int(rng.integers(2, max_x + 1)), n_z, inst_seed)
        n_a = int(rng.integers(1, min(codomain_size, max_x) + 1))
        n_b = int(rng.integers(1, max(max_x // n_a, 1) + 1))
        factored = random_factored_joint(n_a, n_b, n_z, inst_seed)
        for family, joint in (("generic", generic), ("factored", factored)):
            certs.extend(_certify_instance(joint, family, inst_seed, codomain_size, lambdas))
        logger.info(
            "Certified instance",
            stage="theory",
            data={"seed": inst_seed, "passed": all(c.passed for c in certs)},
        )
    return TheoryReport(
        seed=seed,
        lambdas=list(lambdas),
        codomain_size=codomain_size,
        certificates=certs,
        passed=all(c.passed for c in certs),
    )


def _certify_instance(
    joint: DiscreteJoint,
    family: Literal["generic", "factored"],
    inst_seed: int,
    codomain_size: int,
    lambdas: Sequence[float],
) -> list[TheoryCertificate]:
    rng = np.random.default_rng([inst_seed, 1])
    extractor = TableExtractor.from_codes(rng.integers(0, codomain_size, joint.n_x))
    common = dict(family=family, instance_seed=inst_seed, n_x=joint.n_x, n_z=joint.n_z)
    out = []
    pred = optimal_predictor_check(joint, extractor, seed=inst_seed)
    out.append(
        TheoryCertificate(
            check="optimal_predictor", passed=pred.passed, max_deviation=pred.deviation, **common
        )
    )
    disc = optimal_discriminator_check(joint, extractor, seed=inst_seed)
    out.append(
        TheoryCertificate(
            check="optimal_discriminator",
            passed=disc.passed,
            max_deviation=disc.deviation,
            **common,
        )
    )
    codes = np.array([extractor.codes])
    witness_codes = len(TableExtractor.posterior_witness(joint).codomain)
    for lam in lambdas:
        ent = candidate_entropies(joint, codes, codomain_size)
        vec = float(ent.h_y_given_e[0] - lam * ent.h_z_given_e[0])
        dev = abs(vec - virtual_value(joint, extractor, lam))
        out.append(
            TheoryCertificate(
                check="virtual_value",
                lambda_=lam,
                passed=dev <= DEFAULT_TOLERANCE,
                max_deviation=dev,
                **common,
            )
        )
        _, cert = optimal_extractor_search(joint, lam, codomain_size)
        equilibrium_dev = max(cert.max_sufficiency_deviation, cert.max_independence_deviation)
        gate_equilibrium = family == "factored"
        out.append(
            TheoryCertificate(
                check="optimal_extractor",
                lambda_=lam,
                passed=cert.bound_certified and (cert.equilibrium_certified or not gate_equilibrium),
                max_deviation=max(abs(cert.witness_value - cert.witness_bound), equilibrium_dev),
                reported_deviations=cert.deviations,
                **common,
            )
        )
        output = optimal_output_check(joint, lam, min(witness_codes, codomain_size))
        output_dev = max(output.predictor_deviation, output.discriminator_deviation)
        out.append(
            TheoryCertificate(
                check="optimal_output",
                lambda_=lam,
                passed=output.passed or not gate_equilibrium,
                max_deviation=output_dev,
                reported_deviations=[]
                if output.passed
                else [f"optimal outputs deviate by {output_dev:.3e}"],
                **common,
            )
        )
    return out
