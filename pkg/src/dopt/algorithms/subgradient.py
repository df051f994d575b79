import numpy as np

from ..solvers import Projector
from .base import Algorithm, AlgorithmError, StepSize


class SubgradientMethod(Algorithm):
    """Consensus + projected subgradient step on a cost-coupled problem.

    ``z_i = sum_j a_ij x_j``, then ``x_i <- proj_X(z_i - alpha^t g_i)`` with
    ``g_i`` a subgradient of ``f_i`` at ``z_i``.
    """

    name = "subgradient"
    setup = "cost_coupled"

    def _init_state(self):
        data = self.agent.local_data
        self.project = Projector(list(data.constraints), data.dim)
        x0 = np.zeros(data.dim) if self.initial_condition is None else self.initial_condition
        self.x = self.project(np.array(x0, dtype=float).reshape(data.dim))

    def iterate(self, t):
        received = self.agent.neighbors_exchange(self.x)
        z = self.agent.mix(self.x, received)
        g = self.agent.local_data.objective.subgradient(z)
        self.x = self.project(z - self.stepsize(t) * g)


class GradientTracking(Algorithm):
    """Gradient tracking for smooth unconstrained cost-coupled problems.

    One exchange per round carries ``[x_i, s_i]``::

        x_i+ = sum_j a_ij x_j - alpha s_i
        s_i+ = sum_j a_ij s_j + grad f_i(x_i+) - grad f_i(x_i)
    """

    name = "gradient_tracking"
    setup = "cost_coupled"

    def __init__(self, agent, initial_condition=None, stepsize=None, enable_log=True):
        super().__init__(agent, initial_condition, stepsize, enable_log)
        if agent.local_data.constraints:
            raise AlgorithmError("gradient tracking handles unconstrained problems only")
        self._check_step()

    def _check_step(self):
        if self.stepsize.rule != "constant":
            raise AlgorithmError("gradient tracking needs a constant step size, got {}".format(self.stepsize))

    def default_step(self):
        return StepSize("constant", 0.001)

    def run(self, iterations=100, stepsize=None, barrier_every_round=False):
        if stepsize is not None:
            self.stepsize = StepSize.parse(stepsize)
            self._check_step()
        return super().run(iterations, None, barrier_every_round)

    def _init_state(self):
        f = self.agent.local_data.objective
        d = self.agent.local_data.dim
        x0 = np.zeros(d) if self.initial_condition is None else self.initial_condition
        self.x = np.array(x0, dtype=float).reshape(d)
        self.grad = f.subgradient(self.x)
        self.s = self.grad.copy()

    def auxiliary(self):
        return {"s": self.s}

    def iterate(self, t):
        received = self.agent.neighbors_exchange([self.x, self.s])
        xs = {j: v[0] for j, v in received.items()}
        ss = {j: v[1] for j, v in received.items()}
        x_new = self.agent.mix(self.x, xs) - self.stepsize(t) * self.s
        grad_new = self.agent.local_data.objective.subgradient(x_new)
        self.s = self.agent.mix(self.s, ss) + grad_new - self.grad
        self.x, self.grad = x_new, grad_new
