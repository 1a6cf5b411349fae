"""Independent numpy restatements of the model equations.

These deliberately re-derive every operation with a different library and a
different code path than the package, so agreement is evidence, not an
identity check.
"""

import numpy as np

from eventclone import eventgraph as eg


def as_np(tensor, shape=None):
    arr = np.array(tensor.data, dtype=np.float64)
    return arr.reshape(shape or tensor.shape)


def np_params(params):
    cfg = params.config
    out = {"t1": {}, "t2": {}}
    for operator in eg.OPERATORS:
        out["t1"][operator.id] = as_np(params.op_tensor(1, operator.id),
                                       (cfg.slices, cfg.dim, cfg.dim))
        out["t2"][operator.id] = as_np(params.op_tensor(2, operator.id),
                                       (cfg.slices, cfg.dim, cfg.dim))
    out["w_r"] = as_np(params.w_reset)
    out["w_z"] = as_np(params.w_update)
    out["dense"] = as_np(params.dense_w)
    out["bias"] = as_np(params.dense_b)
    out["table"] = as_np(params.entity_table)
    out["conv"] = as_np(params.conv_w)
    return out


def oracle_cell(A, O, op_id, P):
    t1, t2 = P["t1"][op_id], P["t2"][op_id]
    parts = []
    for k in range(t1.shape[0]):
        parts.append(np.concatenate([A @ t1[k], O @ t2[k]]))
    a = np.concatenate(parts)
    return np.tanh(P["dense"] @ a + P["bias"])


def oracle_step(A_prev, O, op_id, P):
    cat = np.concatenate([A_prev, O])
    r = 1.0 / (1.0 + np.exp(-(P["w_r"] @ cat)))
    z = 1.0 / (1.0 + np.exp(-(P["w_z"] @ cat)))
    cand = oracle_cell(r * A_prev, O, op_id, P)
    return (1.0 - z) * A_prev + z * cand


def oracle_conv(X, P, cfg):
    xhat = np.zeros((cfg.pad_len, cfg.dim))
    xhat[:X.shape[0], :] = X
    t_len = cfg.pad_len - cfg.kernel_len + 1
    q = np.zeros(cfg.kernels)
    for k in range(cfg.kernels):
        channel = xhat[:, k % cfg.dim]
        z = np.zeros(t_len)
        for j in range(cfg.kernel_len):
            z += P["conv"][k, j] * channel[j:j + t_len]
        q[k] = z.mean()
    return q
