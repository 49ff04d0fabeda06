"""Pure numpy versions of the compiled SRP inner loops (same signatures as ``_kernels``)."""
import numpy as np


def edge_accumulate(re_g, im_g, cos_w, sin_w, row_pair, row_n, coef, lags):
    rs = np.einsum("rk,rk->r", re_g[row_pair], cos_w[row_n])
    zero = row_n == 0
    # cos(0) = 1: a plain sum with half-weight endpoints, as in the compiled loop
    g0 = re_g[row_pair[zero]]
    rs[zero] = 2.0 * g0.sum(axis=1) - g0[:, 0] - g0[:, -1]
    is_ = -row_n * np.einsum("rk,rk->r", im_g[row_pair], sin_w[row_n])
    # n = 0 rows store sinc(τ/T) directly, so the τ/T factor is dropped there
    scale = np.where(zero[:, None], 1.0, lags[row_pair])
    return np.einsum("rq,rq->q", coef, scale * rs[:, None] + is_[:, None])


def lc_accumulate(re_g, im_g, cos_w, sin_w, row_pair, row_n, sinc):
    a = np.abs(row_n)
    sgn = np.where(row_n >= 0, 1.0, -1.0)
    g = np.einsum("rk,rk->r", re_g[row_pair], cos_w[a]) - sgn * np.einsum("rk,rk->r", im_g[row_pair], sin_w[a])
    return g @ sinc


def td_gather(gcc_td, lags):
    rows = np.arange(lags.shape[0])[:, None]
    return 2.0 * gcc_td[rows, lags].sum(axis=0)
