"""
Gaussian hidden Markov model

Diagonal-covariance Gaussian emissions, one component per state, trained by
Baum-Welch in log space over a set of independent sequences.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from septoskill.utils import InputError, NumericError

logger = logging.getLogger(__name__)


SCHEMA = """
=== HMM API ===

GaussianHMM(n_states=3, max_iter=200, tol=1e-6, var_floor=1e-6, seed=0)
    fit(sequences) -> self        Baum-Welch; log_likelihoods_ per iteration
    score(sequence) -> float      forward log-likelihood
    sample(length, rng) -> (observations, states)
    log_emissions(sequence) -> ndarray (T, n_states)
"""

LOG_2PI = np.log(2.0 * np.pi)
MONOTONE_TOL = 1e-9


class GaussianHMM:
    """
    Attributes (after fit or explicit assignment):
        startprob_  (n_states,)
        transmat_   (n_states, n_states), rows sum to 1
        means_      (n_states, n_features)
        vars_       (n_states, n_features), >= var_floor
        log_likelihoods_  training log-likelihood per iteration
    """

    def __init__(self, n_states: int = 3, max_iter: int = 200, tol: float = 1e-6,
                 var_floor: float = 1e-6, seed: int = 0):
        if n_states < 1:
            raise InputError(f"n_states must be >= 1, got {n_states}")
        self.n_states = n_states
        self.max_iter = max_iter
        self.tol = tol
        self.var_floor = var_floor
        self.seed = seed
        self.startprob_ = None
        self.transmat_ = None
        self.means_ = None
        self.vars_ = None
        self.log_likelihoods_: List[float] = []

    # -------------------------------------------------------------------------
    # Inference
    # -------------------------------------------------------------------------

    def log_emissions(self, sequence) -> np.ndarray:
        x = np.asarray(sequence, dtype=float)
        x = x.reshape(len(x), -1)
        diff = x[:, None, :] - self.means_[None, :, :]
        return -0.5 * np.sum(LOG_2PI + np.log(self.vars_)[None] + diff ** 2 / self.vars_[None], axis=2)

    def _forward(self, log_b: np.ndarray) -> np.ndarray:
        log_a = np.log(self.transmat_)
        log_alpha = np.empty_like(log_b)
        log_alpha[0] = np.log(self.startprob_) + log_b[0]
        for t in range(1, len(log_b)):
            log_alpha[t] = logsumexp(log_alpha[t - 1][:, None] + log_a, axis=0) + log_b[t]
        return log_alpha

    def _backward(self, log_b: np.ndarray) -> np.ndarray:
        log_a = np.log(self.transmat_)
        log_beta = np.zeros_like(log_b)
        for t in range(len(log_b) - 2, -1, -1):
            log_beta[t] = logsumexp(log_a + (log_b[t + 1] + log_beta[t + 1])[None, :], axis=1)
        return log_beta

    def score(self, sequence) -> float:
        """Forward log-likelihood of one sequence."""
        if len(sequence) == 0:
            return 0.0
        with np.errstate(divide='ignore'):
            return float(logsumexp(self._forward(self.log_emissions(sequence))[-1]))

    # -------------------------------------------------------------------------
    # Training
    # -------------------------------------------------------------------------

    def _init_params(self, sequences: List[np.ndarray]):
        rng = np.random.default_rng(self.seed)
        data = np.vstack(sequences)
        k = self.n_states

        # k-means++ style seeding of the state means
        means = [data[rng.integers(len(data))]]
        scale = np.maximum(data.var(axis=0), self.var_floor)
        for _ in range(1, k):
            d2 = np.min([np.sum((data - m) ** 2 / scale, axis=1) for m in means], axis=0)
            total = d2.sum()
            idx = rng.choice(len(data), p=d2 / total) if total > 0 else rng.integers(len(data))
            means.append(data[idx])

        self.means_ = np.array(means, dtype=float)
        self.vars_ = np.tile(scale, (k, 1))
        self.startprob_ = np.full(k, 1.0 / k)
        if k == 1:
            self.transmat_ = np.ones((1, 1))
        else:
            self.transmat_ = np.full((k, k), 0.4 / (k - 1))
            np.fill_diagonal(self.transmat_, 0.6)

    def _reseed(self, occupancy: np.ndarray, data: np.ndarray, worst: np.ndarray) -> bool:
        dead = occupancy < 1e-10
        if not np.any(dead):
            return False
        for state in np.flatnonzero(dead):
            logger.info("HMM state %d has no occupancy; re-seeding on the worst-fit observation", state)
            self.means_[state] = data[worst[state % len(worst)]]
            self.vars_[state] = np.maximum(data.var(axis=0), self.var_floor)
        return True

    def fit(self, sequences: Sequence) -> 'GaussianHMM':
        seqs = [np.asarray(s, dtype=float).reshape(len(s), -1) for s in sequences]
        if not seqs or any(len(s) == 0 for s in seqs):
            raise InputError("HMM training needs at least one non-empty sequence")
        self._init_params(seqs)
        data = np.vstack(seqs)
        k = self.n_states
        self.log_likelihoods_ = []

        for iteration in range(self.max_iter):
            start_acc = np.zeros(k)
            trans_acc = np.zeros((k, k))
            gamma_sum = np.zeros(k)
            mean_acc = np.zeros_like(self.means_)
            sq_acc = np.zeros_like(self.means_)
            total_ll = 0.0
            per_obs_ll = []

            with np.errstate(divide='ignore'):
                log_a = np.log(self.transmat_)
                for x in seqs:
                    log_b = self.log_emissions(x)
                    log_alpha = self._forward(log_b)
                    log_beta = self._backward(log_b)
                    ll = logsumexp(log_alpha[-1])
                    total_ll += ll
                    per_obs_ll.append(logsumexp(log_b, axis=1))

                    gamma = np.exp(log_alpha + log_beta - ll)
                    start_acc += gamma[0]
                    gamma_sum += gamma.sum(axis=0)
                    mean_acc += gamma.T @ x
                    sq_acc += gamma.T @ (x ** 2)
                    if len(x) > 1:
                        log_xi = (log_alpha[:-1, :, None] + log_a[None]
                                  + (log_b[1:] + log_beta[1:])[:, None, :] - ll)
                        trans_acc += np.exp(log_xi).sum(axis=0)

            if not np.isfinite(total_ll):
                raise NumericError("HMM log-likelihood is not finite; check the observations")
            if self.log_likelihoods_:
                previous = self.log_likelihoods_[-1]
                if total_ll < previous - MONOTONE_TOL * max(1.0, abs(previous)):
                    raise NumericError(
                        f"Baum-Welch log-likelihood decreased at iteration {iteration}: "
                        f"{previous:.9g} -> {total_ll:.9g}")
            self.log_likelihoods_.append(float(total_ll))
            if len(self.log_likelihoods_) > 1 and total_ll - self.log_likelihoods_[-2] < self.tol:
                break

            self.startprob_ = start_acc / start_acc.sum()
            row_sums = trans_acc.sum(axis=1, keepdims=True)
            self.transmat_ = np.where(row_sums > 0, trans_acc / np.where(row_sums > 0, row_sums, 1.0),
                                      self.transmat_)
            occupied = np.maximum(gamma_sum, 1e-300)[:, None]
            self.means_ = np.where(gamma_sum[:, None] > 1e-10, mean_acc / occupied, self.means_)
            variances = sq_acc / occupied - self.means_ ** 2
            self.vars_ = np.where(gamma_sum[:, None] > 1e-10, np.maximum(variances, self.var_floor), self.vars_)
            self.transmat_ /= self.transmat_.sum(axis=1, keepdims=True)

            worst = np.argsort(np.concatenate(per_obs_ll))[:k]
            if self._reseed(gamma_sum, data, worst):
                # re-seeding moves parameters outside EM; restart the monotone history
                self.log_likelihoods_ = []

        logger.debug("HMM fit: %d iterations, final log-likelihood %.6g",
                     len(self.log_likelihoods_), self.log_likelihoods_[-1] if self.log_likelihoods_ else float('nan'))
        return self

    # -------------------------------------------------------------------------
    # Sampling
    # -------------------------------------------------------------------------

    def sample(self, length: int, rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng(self.seed)
        states = np.empty(length, dtype=int)
        obs = np.empty((length, self.means_.shape[1]))
        state = rng.choice(self.n_states, p=self.startprob_)
        for t in range(length):
            if t:
                state = rng.choice(self.n_states, p=self.transmat_[state])
            states[t] = state
            obs[t] = rng.normal(self.means_[state], np.sqrt(self.vars_[state]))
        return obs, states


__all__ = ["SCHEMA", "GaussianHMM"]
