"""Brute-force stationary distribution of the sampler on an enumerable
one-feature micro-problem.

States are trees written as nested tuples ("L" for a leaf, ("S", t, l, r)
for a split at threshold t). Every proposal the chain can draw is listed
with its probability; unavailable ones contribute to the redraw mass, and
the exact transition matrix over legal states is solved for its stationary
vector. This recomputes the documented proposal semantics from scratch,
independently of the sampler code it checks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

LEAF = "L"


class MicroProblem:
    def __init__(self, x, y, p_min, move_p=(0.1, 0.1, 0.2, 0.6)):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=int)
        self.n = len(self.x)
        self.p_min = p_min
        self.rules = tuple(sorted(set(self.x.tolist())))
        self.class_count = int(self.y.max())
        # one feature: change-split behaves exactly like change-rule
        self.p_birth = move_p[0]
        self.p_death = move_p[1]
        self.p_change = move_p[2] + move_p[3]
        self.big_k = self.n - 1

    # ---- tree helpers over tuple states ----

    def leaf_counts(self, state, members=None):
        if members is None:
            members = np.arange(self.n)
        if state == LEAF:
            counts = np.bincount(self.y[members], minlength=self.class_count + 1)[1:]
            return [counts]
        _, t, l, r = state
        mask = self.x[members] <= t
        return self.leaf_counts(l, members[mask]) + self.leaf_counts(r, members[~mask])

    def legal(self, state):
        return all(c.sum() >= self.p_min for c in self.leaf_counts(state))

    def loglik(self, state):
        alpha = np.ones(self.class_count)
        out = 0.0
        for counts in self.leaf_counts(state):
            out += float(
                gammaln(alpha.sum())
                - gammaln(alpha).sum()
                + gammaln(counts + alpha).sum()
                - gammaln(counts.sum() + alpha.sum())
            )
        return out

    @staticmethod
    def k_of(state):
        if state == LEAF:
            return 1
        return MicroProblem.k_of(state[2]) + MicroProblem.k_of(state[3])

    @staticmethod
    def prunable(state):
        if state == LEAF:
            return 0
        _, _, l, r = state
        if l == LEAF and r == LEAF:
            return 1
        return MicroProblem.prunable(l) + MicroProblem.prunable(r)

    @staticmethod
    def leaf_paths(state, path=()):
        if state == LEAF:
            return [path]
        _, _, l, r = state
        return MicroProblem.leaf_paths(l, path + ("L",)) + MicroProblem.leaf_paths(r, path + ("R",))

    @staticmethod
    def split_paths(state, path=()):
        if state == LEAF:
            return []
        _, _, l, r = state
        return (
            [path]
            + MicroProblem.split_paths(l, path + ("L",))
            + MicroProblem.split_paths(r, path + ("R",))
        )

    @staticmethod
    def get(state, path):
        for step in path:
            state = state[2] if step == "L" else state[3]
        return state

    @staticmethod
    def put(state, path, sub):
        if not path:
            return sub
        _, t, l, r = state
        if path[0] == "L":
            return ("S", t, MicroProblem.put(l, path[1:], sub), r)
        return ("S", t, l, MicroProblem.put(r, path[1:], sub))

    def members_at(self, state, path):
        members = np.arange(self.n)
        cur = state
        for step in path:
            _, t, l, r = cur
            mask = self.x[members] <= t
            members = members[mask] if step == "L" else members[~mask]
            cur = l if step == "L" else r
        return members

    # ---- enumeration ----

    def states(self, max_k=None):
        if max_k is None:
            max_k = self.n // self.p_min  # no legal tree can have more leaves

        def gen(k):
            if k == 1:
                yield LEAF
                return
            for kl in range(1, k):
                for t in self.rules:
                    for l in gen(kl):
                        for r in gen(k - kl):
                            yield ("S", t, l, r)

        out = []
        for k in range(1, max_k + 1):
            out.extend(s for s in gen(k) if self.legal(s))
        return out

    def _ln_catalan(self, k):
        return float(gammaln(2 * k + 1) - 2 * gammaln(k + 1) - math.log(k + 1))

    def transition_matrix(self, states):
        idx = {s: i for i, s in enumerate(states)}
        P = np.zeros((len(states), len(states)))
        lls = {s: self.loglik(s) for s in states}
        for s in states:
            k = self.k_of(s)
            if k == 1:
                weights = {"birth": 1.0}
            else:
                weights = {"birth": self.p_birth, "death": self.p_death, "change": self.p_change}
                if k >= self.big_k:
                    weights.pop("birth")
                tot = sum(weights.values())
                weights = {m: w / tot for m, w in weights.items()}
            proposals = []  # (raw probability, target state or None, log proposal ratio)
            if "birth" in weights:
                lpaths = self.leaf_paths(s)
                for path in lpaths:
                    members = self.members_at(s, path)
                    for t in self.rules:
                        raw = weights["birth"] / len(lpaths) / len(self.rules)
                        mask = self.x[members] <= t
                        if mask.sum() < self.p_min or (~mask).sum() < self.p_min:
                            proposals.append((raw, None, 0.0))
                            continue
                        cand = self.put(s, path, ("S", t, LEAF, LEAF))
                        lr = (
                            math.log(self.p_death / self.p_birth)
                            + math.log(k)
                            - math.log(self.prunable(cand))
                            + self._ln_catalan(k)
                            - self._ln_catalan(k + 1)
                        )
                        proposals.append((raw, cand, lr))
            if "death" in weights:
                ppaths = [
                    p
                    for p in self.split_paths(s)
                    if self.get(s, p)[2] == LEAF and self.get(s, p)[3] == LEAF
                ]
                for path in ppaths:
                    raw = weights["death"] / len(ppaths)
                    cand = self.put(s, path, LEAF)
                    lr = (
                        math.log(self.p_birth / self.p_death)
                        + math.log(len(ppaths))
                        - math.log(k - 1)
                        + self._ln_catalan(k)
                        - self._ln_catalan(k - 1)
                    )
                    proposals.append((raw, cand, lr))
            if "change" in weights:
                spaths = self.split_paths(s)
                for path in spaths:
                    node = self.get(s, path)
                    for t in self.rules:
                        raw = weights["change"] / len(spaths) / len(self.rules)
                        cand = self.put(s, path, ("S", t, node[2], node[3]))
                        if not self.legal(cand):
                            proposals.append((raw, None, 0.0))
                            continue
                        proposals.append((raw, cand, 0.0))
            q_avail = sum(raw for raw, tgt, _ in proposals if tgt is not None)
            for raw, tgt, lr in proposals:
                if tgt is None:
                    continue
                q_eff = raw / q_avail
                a = min(1.0, math.exp(lls[tgt] - lls[s] + lr))
                P[idx[s], idx[tgt]] += q_eff * a
                P[idx[s], idx[s]] += q_eff * (1 - a)
        return P

    def stationary(self, states=None):
        if states is None:
            states = self.states()
        P = self.transition_matrix(states)
        evals, evecs = np.linalg.eig(P.T)
        i = int(np.argmin(np.abs(evals - 1.0)))
        pi = np.real(evecs[:, i])
        pi = pi / pi.sum()
        return states, pi
