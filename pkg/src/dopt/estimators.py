"""scikit-learn style classifiers trained by a simulated network of agents.

The training rows are split into ``n_agents`` contiguous shards; each agent
only sees its shard and the agents cooperate over a random graph.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, check_X_y, validate_data

from .experiments.data import ClassificationData, logistic_problems, svm_problems
from .graph import random_binomial
from .runner import run_inprocess


class _DistributedLinearClassifier(ClassifierMixin, BaseEstimator):
    def _shards(self, X, y):
        X, y = check_X_y(X, y)
        validate_data(self, X, reset=True)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if self.classes_.shape[0] != 2:
            raise ValueError("only binary problems are supported, got {} classes".format(self.classes_.shape[0]))
        if not 1 <= self.n_agents <= X.shape[0]:
            raise ValueError("n_agents must lie in [1, n_samples]")
        labels = np.where(y == self.classes_[1], 1.0, -1.0)
        parts = np.array_split(np.arange(X.shape[0]), self.n_agents)
        return [ClassificationData(X[p], labels[p], getattr(self, "C", 0.0)) for p in parts]

    def _run(self, problems, algorithm, step, undirected):
        g = random_binomial(self.n_agents, self.graph_p, self.random_state, undirected=undirected)
        algs = run_inprocess(g, problems, algorithm, self.iterations, step, global_seed=self.random_state)
        estimates = np.array([a.get_result() for a in algs])
        self.agent_estimates_ = estimates
        self.coef_ = estimates.mean(axis=0)[None, :-1]
        self.intercept_ = estimates.mean(axis=0)[-1:]
        self.n_iter_ = self.iterations
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False)
        return X @ self.coef_[0] + self.intercept_[0]

    def predict(self, X):
        return np.where(self.decision_function(X) > 0, self.classes_[1], self.classes_[0])


class DistributedLogisticRegression(_DistributedLinearClassifier):
    """L2-regularized logistic regression, ``C/2 ||w||^2`` split evenly across agents.

    Parameters
    ----------
    n_agents : int
    C : float
        Regularization weight (larger means stronger shrinkage of ``w``).
    algorithm : {"gradient_tracking", "subgradient"}
    iterations : int
    step : str, optional
        ``constant:ALPHA`` or ``diminishing:P``; algorithm default if omitted.
    graph_p : float
        Edge probability of the undirected random graph.
    random_state : int
    """

    def __init__(self, n_agents=4, C=10.0, algorithm="gradient_tracking", iterations=2000, step=None, graph_p=0.5,
                 random_state=0):
        self.n_agents = n_agents
        self.C = C
        self.algorithm = algorithm
        self.iterations = iterations
        self.step = step
        self.graph_p = graph_p
        self.random_state = random_state

    def fit(self, X, y):
        shards = self._shards(X, y)
        step = self.step or ("constant:0.01" if self.algorithm == "gradient_tracking" else "diminishing:0.6")
        return self._run(logistic_problems(shards), self.algorithm, step, True)

    def predict_proba(self, X):
        z = self.decision_function(X)
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        return np.column_stack([1.0 - p, p])


class DistributedSVC(_DistributedLinearClassifier):
    """Hard-margin linear SVM via constraints consensus on a directed graph.

    Raises ``ValueError`` from ``fit`` when the classes are not linearly
    separable.
    """

    def __init__(self, n_agents=4, iterations=30, graph_p=0.5, random_state=0):
        self.n_agents = n_agents
        self.iterations = iterations
        self.graph_p = graph_p
        self.random_state = random_state

    def fit(self, X, y):
        from .experiments.data import pool, separable

        shards = self._shards(X, y)
        P, L = pool(shards)
        if not separable(P, L):
            raise ValueError("training data are not linearly separable")
        return self._run(svm_problems(shards), "constraints_consensus", None, False)
