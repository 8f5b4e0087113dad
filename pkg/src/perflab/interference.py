"""Linear-in-means outcomes on a homophilous network.

Outcomes follow ``y_i = g1(x_i) + alpha * yhat_i + beta * G_i + noise`` where
``G_i`` is the mean prediction over the neighbours of node ``i``.  When
neighbours share predictions (``G_i == yhat_i``) a meta-model on ``(x, yhat)``
absorbs the spillover into its prediction coefficient, which becomes
``alpha + beta``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .estimators import HypothesisClass, fit_arrays
from .linalg import ols_minimum_norm, with_intercept
from .scm import Dataset, NoiseSpec, OutcomeMechanism, CovariateSource, generate_dataset
from .rng import SeedPlan


@dataclass
class Network:
    """Undirected graph over rows of ``covariates``; node ``i`` is row ``i``."""

    neighbors: list
    covariates: np.ndarray
    construction: dict = field(default_factory=dict)

    def __post_init__(self):
        self.covariates = np.asarray(self.covariates, dtype=float)
        self.neighbors = [np.asarray(sorted(set(int(j) for j in nb)), dtype=np.int64) for nb in self.neighbors]
        if len(self.neighbors) != self.covariates.shape[0]:
            raise ValueError("one neighbour list per covariate row is required")
        for i, nb in enumerate(self.neighbors):
            if nb.size == 0:
                raise ValueError(f"node {i} has no neighbours")
            if i in nb:
                raise ValueError(f"node {i} is its own neighbour")
        edges = {(i, int(j)) for i, nb in enumerate(self.neighbors) for j in nb}
        if any((j, i) not in edges for i, j in edges):
            raise ValueError("adjacency must be symmetric")

    @property
    def n(self) -> int:
        return len(self.neighbors)

    def neighbor_mean(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n,):
            raise ValueError(f"expected {self.n} values, got {values.shape}")
        return np.array([values[nb].mean() for nb in self.neighbors])

    def edge_list(self) -> np.ndarray:
        return np.array([(i, j) for i, nb in enumerate(self.neighbors) for j in nb if i < j], dtype=np.int64)

    def to_edge_csv(self, path) -> None:
        np.savetxt(path, self.edge_list(), delimiter=",", fmt="%d", header="source,target", comments="")


def build_homophilous_network(covariates, method: str = "knn", k: int = 10, group_size: int = 3,
                              seed=0) -> Network:
    """Build a network whose neighbours have similar covariates.

    ``knn`` links each row to its ``k`` nearest rows (Euclidean) and
    symmetrizes by union.  ``clone-groups`` repeats every row ``group_size``
    times and links the copies to each other, so any deterministic predictor
    takes the same value on a node and all its neighbours.
    """
    X = np.asarray(covariates, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    record = {"method": method, "seed": int(seed) if not hasattr(seed, "integers") else None}
    if method == "knn":
        if n < 2:
            raise ValueError("need at least two rows")
        if not 1 <= k < n:
            raise ValueError(f"k must satisfy 1 <= k < n (k={k}, n={n})")
        # one extra neighbour for the point itself; ties broken by index
        _, idx = cKDTree(X).query(X, k=k + 1)
        sets = [set() for _ in range(n)]
        for i in range(n):
            chosen = [int(j) for j in idx[i] if j != i][:k]
            for j in chosen:
                sets[i].add(j)
                sets[j].add(i)
        record["k"] = k
        return Network([sorted(s) for s in sets], X, record)
    if method == "clone-groups":
        if group_size < 2:
            raise ValueError("group_size must be >= 2 so every node has a neighbour")
        rows = np.repeat(X, group_size, axis=0)
        neighbors = []
        for g in range(n):
            members = range(g * group_size, (g + 1) * group_size)
            for i in members:
                neighbors.append([j for j in members if j != i])
        record["group_size"] = group_size
        return Network(neighbors, rows, record)
    raise ValueError(f"unknown network method {method!r}")


def star_network(leaves: int, covariates=None) -> Network:
    """Node 0 is the centre, nodes ``1..leaves`` are attached only to it."""
    if leaves < 1:
        raise ValueError("a star needs at least one leaf")
    X = np.zeros((leaves + 1, 1)) if covariates is None else covariates
    neighbors = [list(range(1, leaves + 1))] + [[0] for _ in range(leaves)]
    return Network(neighbors, X, {"method": "star", "leaves": leaves})


def measure_homophily_delta(network: Network, predictions) -> float:
    """Largest gap between a node's prediction and its neighbours' mean prediction."""
    p = np.asarray(predictions, dtype=float)
    return float(np.max(np.abs(network.neighbor_mean(p) - p)))


@dataclass(frozen=True)
class LinearInMeansConfig:
    alpha: float
    beta_spill: float
    g1: Callable
    noise: NoiseSpec = NoiseSpec("none", 0.0)

    def __post_init__(self):
        if not self.alpha > self.beta_spill > 0:
            warnings.warn(f"expected alpha > beta_spill > 0, got alpha={self.alpha}, beta_spill={self.beta_spill}")

    def mechanism(self) -> OutcomeMechanism:
        return OutcomeMechanism(self.g1, "linear", self.alpha, self.noise)

    def expected(self, X, yhat, G) -> np.ndarray:
        return self.mechanism().expected(X, yhat) + self.beta_spill * np.asarray(G, dtype=float)


def simulate_linear_in_means(network: Network, predictor, config: LinearInMeansConfig,
                             seeds: SeedPlan) -> Dataset:
    """One draw of predictions and outcomes on every node; ``G`` kept as an extra column."""
    X = network.covariates
    source = CovariateSource.table(X)
    data = generate_dataset(source, predictor, config.mechanism(), network.n, seeds, X=X)
    G = network.neighbor_mean(data.predictions)
    y = data.outcomes
    if config.beta_spill != 0:
        y = y + config.beta_spill * G
    prov = dict(data.provenance, network=network.construction, beta_spill=config.beta_spill)
    return Dataset(X, data.predictions, y, prov, {"G": G})


@dataclass
class InterferenceComparison:
    coef_yhat_without_G: float
    coef_yhat_with_G: Optional[float]
    coef_G: Optional[float]
    with_G_skipped: bool
    rank_deficient_without_G: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fit_and_compare_interference(data: Dataset, hclass: HypothesisClass = HypothesisClass("linear")) -> InterferenceComparison:
    """Fit ``y ~ (x, yhat)`` and ``y ~ (x, yhat, G)`` by least squares.

    If ``G`` is collinear with the other columns (clone groups) the second
    fit is skipped and flagged.
    """
    if hclass.kind != "linear":
        raise ValueError("interference comparison uses the linear class")
    if "G" not in data.extra:
        raise ValueError("dataset has no exposure column 'G'")
    base = fit_arrays(data.covariates, data.outcomes, hclass, yhat=data.predictions)
    G = np.asarray(data.extra["G"], dtype=float)
    design = with_intercept(np.column_stack([data.covariates, data.predictions, G]))
    full = ols_minimum_norm(design, data.outcomes)
    if full.rank_deficient:
        return InterferenceComparison(base.coef_yhat, None, None, True, base.rank_deficient)
    w = full.weights
    return InterferenceComparison(base.coef_yhat, float(w[-2]), float(w[-1]), False, base.rank_deficient)


@dataclass
class InterventionGap:
    node: int
    unilateral: float
    population: float

    @property
    def gap(self) -> float:
        return self.population - self.unilateral


def unilateral_vs_population(network: Network, f_old, f_new, config: LinearInMeansConfig,
                             node: int) -> InterventionGap:
    """Expected change in node ``node``'s outcome under two interventions.

    *unilateral*: only that node's prediction moves from ``f_old`` to
    ``f_new``; neighbours keep theirs.  *population*: every node switches to
    ``f_new``.  Both are paired counterfactual evaluations of the noiseless
    outcome equation on the same covariates.
    """
    X = network.covariates
    old = np.asarray(f_old(X), dtype=float)
    new = np.asarray(f_new(X), dtype=float)
    base = config.expected(X, old, network.neighbor_mean(old))[node]
    single = old.copy()
    single[node] = new[node]
    uni = config.expected(X, single, network.neighbor_mean(single))[node]
    pop = config.expected(X, new, network.neighbor_mean(new))[node]
    return InterventionGap(node, float(uni - base), float(pop - base))
