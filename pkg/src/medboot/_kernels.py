"""Compiled inner loops: moment fits, sweep-based EM, data-augmentation chain.

Column order everywhere is X, M, Y, AUX_1..AUX_p.  Theta order is
(iM, iY, a, b, c_prime, var_eM, var_eY, ab).

Status codes returned by kernels:
    0 ok, 1 singular design, 2 too few rows, 3 not positive definite.
"""
import math

import numpy as np
from numba import njit

OK, SINGULAR, FEW_ROWS, NOT_PD = 0, 1, 2, 3
N_REPAIRS = 4  # one ridge repair plus three x10 escalations
PIVOT_RTOL = 1e-13


@njit(cache=True)
def moments3(Z, mean, cov):
    """Means and n-1 covariances of the first three columns of Z."""
    n = Z.shape[0]
    for j in range(3):
        s = 0.0
        for i in range(n):
            s += Z[i, j]
        mean[j] = s / n
    for j in range(3):
        for k in range(j, 3):
            s = 0.0
            for i in range(n):
                s += (Z[i, j] - mean[j]) * (Z[i, k] - mean[k])
            cov[j, k] = s / (n - 1)
            cov[k, j] = cov[j, k]


@njit(cache=True)
def theta_from_moments(mean, cov, n, out):
    if n < 4:
        return FEW_ROWS
    sxx = cov[0, 0]
    smm = cov[1, 1]
    syy = cov[2, 2]
    sxm = cov[0, 1]
    smy = cov[1, 2]
    sxy = cov[0, 2]
    if not (sxx > 0.0) or not (smm > 0.0):
        return SINGULAR
    den = sxx * smm - sxm * sxm
    if not (den >= 1e-12 * sxx * smm):
        return SINGULAR
    a = sxm / sxx
    b = (smy * sxx - sxm * sxy) / den
    c = (sxy * smm - sxm * smy) / den
    sse_m = (n - 1) * (smm - a * sxm)
    sse_y = (n - 1) * (syy - b * smy - c * sxy)
    out[0] = mean[1] - a * mean[0]
    out[1] = mean[2] - b * mean[1] - c * mean[0]
    out[2] = a
    out[3] = b
    out[4] = c
    out[5] = max(sse_m, 0.0) / (n - 2)
    out[6] = max(sse_y, 0.0) / (n - 3)
    out[7] = a * b
    return OK


@njit(cache=True)
def fit_matrix(Z, out):
    mean = np.empty(3)
    cov = np.empty((3, 3))
    if Z.shape[0] < 4:
        return FEW_ROWS
    moments3(Z, mean, cov)
    return theta_from_moments(mean, cov, Z.shape[0], out)


@njit(cache=True)
def _sweep_obs(T, mu, sig, obs, nobs, d, ridge):
    """Fill the augmented matrix [[-1, mu'], [mu, sig + ridge*I]] into T and
    sweep it on the observed positions.  Returns log|sig_oo| or NaN when a
    pivot is not positive."""
    T[0, 0] = -1.0
    for j in range(d):
        T[0, j + 1] = mu[j]
        T[j + 1, 0] = mu[j]
        for k in range(d):
            T[j + 1, k + 1] = sig[j, k]
        T[j + 1, j + 1] += ridge
    p = d + 1
    logdet = 0.0
    for q in range(nobs):
        k = obs[q] + 1
        h = T[k, k]
        if not (h > PIVOT_RTOL * (sig[k - 1, k - 1] + ridge)) or not (h > 0.0):
            return np.nan
        logdet += math.log(h)
        for i in range(p):
            if i == k:
                continue
            tik = T[i, k]
            if tik == 0.0:
                continue
            f = tik / h
            for j in range(p):
                if j != k:
                    T[i, j] -= f * T[k, j]
        for i in range(p):
            if i != k:
                T[i, k] = T[i, k] / h
                T[k, i] = T[i, k]
        T[k, k] = -1.0 / h
    return logdet


@njit(cache=True)
def _chol(A, L, m):
    """Lower Cholesky factor of the leading m x m block of A into L."""
    for i in range(m):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if not (s > 0.0):
                    return False
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
        for j in range(i + 1, m):
            L[i, j] = 0.0
    return True


@njit(cache=True)
def _trace_scale(sig, d):
    t = 0.0
    for j in range(d):
        t += sig[j, j]
    return t / d


@njit(cache=True)
def _sweep_repaired(T, mu, sig, obs, nobs, d, ridge_rel):
    base = ridge_rel * _trace_scale(sig, d)
    logdet = _sweep_obs(T, mu, sig, obs, nobs, d, 0.0)
    r = base
    for _ in range(N_REPAIRS):
        if not np.isnan(logdet):
            return logdet
        logdet = _sweep_obs(T, mu, sig, obs, nobs, d, r)
        r *= 10.0
    return logdet


@njit(cache=True)
def _cond_chol(T, mis, nmis, C, Lc, ridge_rel):
    """Cholesky of the conditional covariance of the missing block, read
    from the swept matrix T."""
    for a in range(nmis):
        for b in range(nmis):
            C[a, b] = T[mis[a] + 1, mis[b] + 1]
    if _chol(C, Lc, nmis):
        return True
    t = 0.0
    for a in range(nmis):
        t += abs(C[a, a])
    r = ridge_rel * t / nmis
    if r == 0.0:
        r = ridge_rel
    for _ in range(N_REPAIRS):
        for a in range(nmis):
            C[a, a] += r
        if _chol(C, Lc, nmis):
            return True
        for a in range(nmis):
            C[a, a] -= r
        r *= 10.0
    return False


@njit(cache=True)
def observed_loglik(Z, rows, ptr, pobs, pnobs, mu, sig):
    """Observed-data MVN log-likelihood; NaN if some sig_oo is singular."""
    d = Z.shape[1]
    T = np.empty((d + 1, d + 1))
    total = 0.0
    for g in range(ptr.shape[0] - 1):
        nobs = pnobs[g]
        obs = pobs[g]
        if nobs == 0:
            continue
        logdet = _sweep_obs(T, mu, sig, obs, nobs, d, 0.0)
        if np.isnan(logdet):
            return np.nan
        for q in range(ptr[g], ptr[g + 1]):
            r = rows[q]
            quad = 0.0
            for a in range(nobs):
                ra = Z[r, obs[a]] - mu[obs[a]]
                for b in range(nobs):
                    quad -= ra * T[obs[a] + 1, obs[b] + 1] * (Z[r, obs[b]] - mu[obs[b]])
            total += -0.5 * (nobs * math.log(2.0 * math.pi) + logdet + quad)
    return total


@njit(cache=True)
def em_mvn(Z, rows, ptr, pobs, pnobs, pmis, pnmis, mu, sig, max_iter, tol, ridge_rel, trace):
    """ML estimate of (mu, sig) by EM.  mu and sig hold the starting values
    and are updated in place.  When trace has length > 0, the observed-data
    log-likelihood at the start of each iteration is written to it.

    Returns (status, iterations)."""
    n, d = Z.shape
    T = np.empty((d + 1, d + 1))
    T1 = np.empty(d)
    T2 = np.empty((d, d))
    xh = np.empty(d)
    new_sig = np.empty((d, d))
    n_groups = ptr.shape[0] - 1
    want_trace = trace.shape[0] > 0
    for it in range(max_iter):
        if want_trace:
            trace[it] = observed_loglik(Z, rows, ptr, pobs, pnobs, mu, sig)
        T1[:] = 0.0
        T2[:, :] = 0.0
        for g in range(n_groups):
            nobs = pnobs[g]
            nmis = pnmis[g]
            obs = pobs[g]
            mis = pmis[g]
            if nmis > 0:
                if np.isnan(_sweep_repaired(T, mu, sig, obs, nobs, d, ridge_rel)):
                    return NOT_PD, it
            for q in range(ptr[g], ptr[g + 1]):
                r = rows[q]
                for a in range(nobs):
                    xh[obs[a]] = Z[r, obs[a]]
                for a in range(nmis):
                    j = mis[a]
                    v = T[0, j + 1]
                    for b in range(nobs):
                        v += T[obs[b] + 1, j + 1] * Z[r, obs[b]]
                    xh[j] = v
                for j in range(d):
                    T1[j] += xh[j]
                    for k in range(j + 1):
                        T2[j, k] += xh[j] * xh[k]
                for a in range(nmis):
                    for b in range(nmis):
                        ja = mis[a]
                        jb = mis[b]
                        if jb <= ja:
                            T2[ja, jb] += T[ja + 1, jb + 1]
        delta = 0.0
        for j in range(d):
            m = T1[j] / n
            delta = max(delta, abs(m - mu[j]))
            T1[j] = m
        for j in range(d):
            for k in range(j + 1):
                v = T2[j, k] / n - T1[j] * T1[k]
                new_sig[j, k] = v
                new_sig[k, j] = v
        for j in range(d):
            mu[j] = T1[j]
            for k in range(d):
                delta = max(delta, abs(new_sig[j, k] - sig[j, k]))
                sig[j, k] = new_sig[j, k]
        if delta < tol:
            if want_trace and it + 1 < trace.shape[0]:
                trace[it + 1] = observed_loglik(Z, rows, ptr, pobs, pnobs, mu, sig)
            return OK, it + 1
    return OK, max_iter


@njit(cache=True)
def da_chain(Z, shift, rows, ptr, pobs, pnobs, pmis, pnmis, mu0, sig0,
             burn_in, thin, K, normals, chis, ridge_rel, do_fit, out_imp, out_fit):
    """Data-augmentation chain started at (mu0, sig0).

    Z holds the data minus ``shift`` (per-column centring) and is used as a
    working copy: its missing cells are overwritten.  mu0/sig0 refer to the
    centred data.  Each iteration runs an I-step (conditional normal draws per
    missing pattern) followed by a P-step (inverse-Wishart / normal posterior
    draw under the Jeffreys prior).  After burn_in iterations, the completed
    data are emitted every thin iterations: missing-cell values (shift added
    back) go to out_imp[k] in pattern/row/variable order and the mediation fit
    to out_fit[k] (skipped unless do_fit).

    Returns (status, index of the failing emission or -1).
    """
    n, d = Z.shape
    n_groups = ptr.shape[0] - 1
    n_iter = burn_in + K * thin
    mu = mu0.copy()
    sig = sig0.copy()
    T = np.empty((d + 1, d + 1))
    C = np.empty((d, d))
    Lc = np.empty((d, d))
    xbar = np.empty(d)
    S = np.empty((d, d))
    U = np.empty((d, d))
    A = np.zeros((d, d))
    Ai = np.zeros((d, d))
    G = np.zeros((d, d))
    m3 = np.empty(3)
    c3 = np.empty((3, 3))
    sqn = math.sqrt(n)
    # Sums over fully observed rows never change.
    sum0 = np.zeros(d)
    cross0 = np.zeros((d, d))
    n_mis_cells = 0
    for g in range(n_groups):
        n_mis_cells += pnmis[g] * (ptr[g + 1] - ptr[g])
        if pnmis[g] == 0:
            for q in range(ptr[g], ptr[g + 1]):
                r = rows[q]
                for j in range(d):
                    sum0[j] += Z[r, j]
                    for k2 in range(j + 1):
                        cross0[j, k2] += Z[r, j] * Z[r, k2]
    off = n_mis_cells
    n_off = d * (d - 1) // 2
    emitted = 0
    for t in range(1, n_iter + 1):
        z = normals[t - 1]
        # I-step, accumulating sums of the incomplete rows as they are drawn
        for j in range(d):
            xbar[j] = sum0[j]
            for k2 in range(j + 1):
                S[j, k2] = cross0[j, k2]
        pos = 0
        for g in range(n_groups):
            nmis = pnmis[g]
            if nmis == 0:
                continue
            nobs = pnobs[g]
            obs = pobs[g]
            mis = pmis[g]
            if np.isnan(_sweep_repaired(T, mu, sig, obs, nobs, d, ridge_rel)):
                return NOT_PD, -1
            if not _cond_chol(T, mis, nmis, C, Lc, ridge_rel):
                return NOT_PD, -1
            for q in range(ptr[g], ptr[g + 1]):
                r = rows[q]
                for a in range(nmis):
                    j = mis[a]
                    v = T[0, j + 1]
                    for b in range(nobs):
                        v += T[obs[b] + 1, j + 1] * Z[r, obs[b]]
                    for b in range(a + 1):
                        v += Lc[a, b] * z[pos + b]
                    Z[r, j] = v
                pos += nmis
                for j in range(d):
                    zj = Z[r, j]
                    xbar[j] += zj
                    for k2 in range(j + 1):
                        S[j, k2] += zj * Z[r, k2]
        if t > burn_in and (t - burn_in) % thin == 0:
            k = emitted
            pos = 0
            for g in range(n_groups):
                nmis = pnmis[g]
                mis = pmis[g]
                for q in range(ptr[g], ptr[g + 1]):
                    r = rows[q]
                    for a in range(nmis):
                        out_imp[k, pos] = Z[r, mis[a]] + shift[mis[a]]
                        pos += 1
            if do_fit:
                moments3(Z, m3, c3)
                for j in range(3):
                    m3[j] += shift[j]
                st = theta_from_moments(m3, c3, n, out_fit[k])
                if st != OK:
                    return st, k
            emitted += 1
            if emitted == K:
                break
        # P-step
        for j in range(d):
            xbar[j] /= n
        for j in range(d):
            for k2 in range(j + 1):
                v = S[j, k2] - n * xbar[j] * xbar[k2]
                S[j, k2] = v
                S[k2, j] = v
        if not _chol(S, U, d):
            r0 = ridge_rel * _trace_scale(S, d)
            ok = False
            for _ in range(N_REPAIRS):
                for j in range(d):
                    S[j, j] += r0
                if _chol(S, U, d):
                    ok = True
                    break
                r0 *= 10.0
            if not ok:
                return NOT_PD, -1
        zo = off
        cz = chis[t - 1]
        for i in range(d):
            A[i, i] = math.sqrt(cz[i])
            for j in range(i):
                A[i, j] = z[zo]
                zo += 1
        # Ai = A^{-1}, lower triangular
        for i in range(d):
            Ai[i, i] = 1.0 / A[i, i]
            for j in range(i):
                s = 0.0
                for k2 in range(j, i):
                    s += A[i, k2] * Ai[k2, j]
                Ai[i, j] = -s / A[i, i]
        # sig = G G' with G = U Ai'
        for i in range(d):
            for j in range(d):
                s = 0.0
                for k2 in range(min(i, j) + 1):
                    s += U[i, k2] * Ai[j, k2]
                G[i, j] = s
        for i in range(d):
            for j in range(i + 1):
                s = 0.0
                for k2 in range(d):
                    s += G[i, k2] * G[j, k2]
                sig[i, j] = s
                sig[j, i] = s
        zo = off + n_off
        for i in range(d):
            s = 0.0
            for k2 in range(d):
                s += G[i, k2] * z[zo + k2]
            mu[i] = xbar[i] + s / sqn
    return OK, -1
