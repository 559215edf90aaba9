"""Per-slot decision kernels: placement argmin and greedy queue-to-resource scheduling.

Two interchangeable backends compute identical decisions:

* ``numba``: explicit loops compiled with ``@njit``;
* ``numpy``: vectorized scoring with a Python greedy loop.

The backend is chosen once at import from ``CHAINSIM_NUMBA`` (``0`` forces
numpy); numpy is also used when numba cannot be imported.

Candidate layout per VM n is a (K, I, 1 + 2N) block flattened in C order:
slot 0 is processing, slot 1 + 2b routes Q toward b, slot 2 + 2b routes q
toward b. Stable sorting on the objective over that flat order gives the
tie-break k, then i, then destination.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("CHAINSIM_NUMBA", "1") != "0"


def _placement_loops(m1, m2, alpha, p_max, nxt, valid_Q, eps, cap_Q):
    I, K, N = m1.shape
    place = np.zeros(N, dtype=np.int64)
    for n in range(N):
        best = 0.0
        best_k = 0
        for k in range(K):
            total = 0.0
            for i in range(I):
                if not valid_Q[i, k]:
                    continue
                delta = m1[i, k, n]
                if nxt[i, k] >= 0:
                    delta = delta - m2[i, nxt[i, k], n]
                cap = min(p_max[n], cap_Q[i, k, n])
                r = min(max(delta / (2.0 * alpha[n]), 0.0), cap)
                total += (alpha[n] * r * r - delta * r) / eps
            if k == 0 or total < best:
                best = total
                best_k = k
        place[n] = best_k
    return place


def _decide_loops(m1, m2, alpha, beta, p_max, l_max, links, nxt, valid_Q, valid_q,
                  place, eps, cap_Q, cap_q):
    I, K, N = m1.shape
    S = 1 + 2 * N
    p = np.zeros((I, K, N))
    u = np.zeros((I, K, N, N))
    v = np.zeros((I, K, N, N))
    C = K * I * S
    obj = np.empty(C)
    rate = np.empty(C)
    flat = np.empty(C, dtype=np.int64)
    q_taken = np.zeros((2, I, K), dtype=np.bool_)
    r_taken = np.zeros(N + 1, dtype=np.bool_)
    for n in range(N):
        c = 0
        ks = place[n]
        for k in range(K):
            for i in range(I):
                base = (k * I + i) * S
                if valid_Q[i, k] and k == ks:
                    delta = m1[i, k, n]
                    if nxt[i, k] >= 0:
                        delta = delta - m2[i, nxt[i, k], n]
                    cap = min(p_max[n], cap_Q[i, k, n])
                    r = min(max(delta / (2.0 * alpha[n]), 0.0), cap)
                    o = (alpha[n] * r * r - delta * r) / eps
                    if o < 0.0:
                        obj[c] = o
                        rate[c] = r
                        flat[c] = base
                        c += 1
                for b in range(N):
                    if not links[n, b]:
                        continue
                    if valid_Q[i, k]:
                        delta = m1[i, k, n] - m1[i, k, b]
                        cap = min(l_max[n, b], cap_Q[i, k, n])
                        r = min(max(delta / (2.0 * beta[n, b]), 0.0), cap)
                        o = (beta[n, b] * r * r - delta * r) / eps
                        if o < 0.0:
                            obj[c] = o
                            rate[c] = r
                            flat[c] = base + 1 + 2 * b
                            c += 1
                    if valid_q[i, k]:
                        delta = m2[i, k, n] - m1[i, k, b]
                        cap = min(l_max[n, b], cap_q[i, k, n])
                        r = min(max(delta / (2.0 * beta[n, b]), 0.0), cap)
                        o = (beta[n, b] * r * r - delta * r) / eps
                        if o < 0.0:
                            obj[c] = o
                            rate[c] = r
                            flat[c] = base + 2 + 2 * b
                            c += 1
        order = np.argsort(obj[:c], kind="mergesort")
        q_taken[:] = False
        r_taken[:] = False
        free = 1 + links[n].sum()
        for j in order:
            f = flat[j]
            k = f // (I * S)
            i = (f // S) % I
            slot = f % S
            if slot == 0:
                fam, res, b = 0, 0, -1
            else:
                b = (slot - 1) // 2
                fam = (slot - 1) % 2
                res = 1 + b
            if q_taken[fam, i, k] or r_taken[res]:
                continue
            q_taken[fam, i, k] = True
            r_taken[res] = True
            if slot == 0:
                p[i, k, n] = rate[j]
            elif fam == 0:
                u[i, k, n, b] = rate[j]
            else:
                v[i, k, n, b] = rate[j]
            free -= 1
            if free == 0:
                break
    return p, u, v


def _clamped(delta, price, cap, eps):
    r = np.minimum(np.maximum(delta / (2.0 * price), 0.0), cap)
    return r, (price * r * r - delta * r) / eps


def _placement_numpy(m1, m2, alpha, p_max, nxt, valid_Q, eps, cap_Q):
    I, K, N = m1.shape
    m2_next = np.zeros((I, K, N))
    has = nxt >= 0
    ii, kk = np.nonzero(has)
    m2_next[ii, kk] = m2[ii, nxt[ii, kk]]
    delta = np.where(has[:, :, None], m1 - m2_next, m1)
    cap = np.minimum(p_max[None, None, :], cap_Q)
    _, obj = _clamped(delta, alpha[None, None, :], cap, eps)
    obj = np.where(valid_Q[:, :, None], obj, 0.0)
    # sum over i in index order to match the loop backend bit for bit
    total = np.zeros((K, N))
    for i in range(I):
        total = total + obj[i]
    return np.argmin(total, axis=0).astype(np.int64)


def _decide_numpy(m1, m2, alpha, beta, p_max, l_max, links, nxt, valid_Q, valid_q,
                  place, eps, cap_Q, cap_q):
    I, K, N = m1.shape
    S = 1 + 2 * N
    p = np.zeros((I, K, N))
    u = np.zeros((I, K, N, N))
    v = np.zeros((I, K, N, N))
    has = nxt >= 0
    ii, kk = np.nonzero(has)
    m2_next = np.zeros((I, K, N))
    m2_next[ii, kk] = m2[ii, nxt[ii, kk]]
    for n in range(N):
        obj = np.zeros((K, I, S))
        rate = np.zeros((K, I, S))
        ks = place[n]
        for i in range(I):
            if valid_Q[i, ks]:
                delta = m1[i, ks, n] - m2_next[i, ks, n] if has[i, ks] else m1[i, ks, n]
                cap = min(p_max[n], cap_Q[i, ks, n])
                r, o = _clamped(delta, alpha[n], cap, eps)
                rate[ks, i, 0], obj[ks, i, 0] = r, o
        link = links[n][None, None, :]
        du = (m1[:, :, n, None] - m1).transpose(1, 0, 2)
        cu = np.minimum(l_max[n][None, None, :], cap_Q[:, :, n, None].transpose(1, 0, 2))
        r, o = _clamped(du, beta[n][None, None, :], cu, eps)
        mask = link & valid_Q.T[:, :, None]
        rate[:, :, 1::2] = np.where(mask, r, 0.0)
        obj[:, :, 1::2] = np.where(mask, o, 0.0)
        dv = (m2[:, :, n, None] - m1).transpose(1, 0, 2)
        cv = np.minimum(l_max[n][None, None, :], cap_q[:, :, n, None].transpose(1, 0, 2))
        r, o = _clamped(dv, beta[n][None, None, :], cv, eps)
        mask = link & valid_q.T[:, :, None]
        rate[:, :, 2::2] = np.where(mask, r, 0.0)
        obj[:, :, 2::2] = np.where(mask, o, 0.0)
        obj = obj.reshape(-1)
        rate = rate.reshape(-1)
        idx = np.nonzero(obj < 0.0)[0]
        order = idx[np.argsort(obj[idx], kind="stable")]
        q_taken = set()
        r_taken = set()
        free = 1 + int(links[n].sum())
        for f in order:
            k, rem = divmod(int(f), I * S)
            i, slot = divmod(rem, S)
            if slot == 0:
                queue, res = (0, i, k), 0
            else:
                b, fam = divmod(slot - 1, 2)
                queue, res = (fam, i, k), 1 + b
            if queue in q_taken or res in r_taken:
                continue
            q_taken.add(queue)
            r_taken.add(res)
            if slot == 0:
                p[i, k, n] = rate[f]
            elif queue[0] == 0:
                u[i, k, n, res - 1] = rate[f]
            else:
                v[i, k, n, res - 1] = rate[f]
            free -= 1
            if free == 0:
                break
    return p, u, v


if HAS_NUMBA:
    _placement_numba = njit(cache=True)(_placement_loops)
    _decide_numba = njit(cache=True)(_decide_loops)
else:  # pragma: no cover
    _placement_numba = _placement_loops
    _decide_numba = _decide_loops

BACKENDS = {
    "numba": (_placement_numba, _decide_numba),
    "numpy": (_placement_numpy, _decide_numpy),
}


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def get_backend(name=None):
    """(placement, decide) kernel pair for ``name`` or the configured default."""
    return BACKENDS[name or backend_name()]
