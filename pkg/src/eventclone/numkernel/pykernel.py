"""Pure-Python numeric kernels.

Reference implementation of the hot-loop kernels. The compiled backend in
``_ckernel.pyx`` mirrors these functions exactly: same signatures, same
summation order, so both backends produce bitwise-identical results. All
buffers are flat row-major float64 sequences (array('d') or writable
memoryviews); integer buffers are array('i') or equivalent. Shape checks
happen one layer up, in the public tensor API.
"""

import math

BACKEND_NAME = "python"


def dot(n, u, v):
    acc = 0.0
    for i in range(n):
        acc += u[i] * v[i]
    return acc


def matvec(m, n, mat, vec, out):
    # out[i] = sum_j mat[i, j] * vec[j]
    for i in range(m):
        acc = 0.0
        base = i * n
        for j in range(n):
            acc += mat[base + j] * vec[j]
        out[i] = acc


def vecmat(m, n, vec, mat, out):
    # out[j] = sum_i vec[i] * mat[i, j]  (row vector times matrix)
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += vec[i] * mat[i * n + j]
        out[j] = acc


def matmul(m, n, p, a, b, out):
    # out[i, k] = sum_j a[i, j] * b[j, k]
    for i in range(m):
        for k in range(p):
            acc = 0.0
            for j in range(n):
                acc += a[i * n + j] * b[j * p + k]
            out[i * p + k] = acc


def outer_acc(m, n, u, v, acc):
    # acc[i, j] += u[i] * v[j]
    for i in range(m):
        ui = u[i]
        base = i * n
        for j in range(n):
            acc[base + j] += ui * v[j]


def sigmoid_vec(n, x, out):
    for i in range(n):
        out[i] = 1.0 / (1.0 + math.exp(-x[i]))


def tanh_vec(n, x, out):
    for i in range(n):
        out[i] = math.tanh(x[i])


def hadamard_vec(n, u, v, out):
    for i in range(n):
        out[i] = u[i] * v[i]


def hadamard_acc(n, u, v, acc):
    for i in range(n):
        acc[i] += u[i] * v[i]


def ew_sub(n, u, v, out):
    for i in range(n):
        out[i] = u[i] - v[i]


def scale_add_vec(n, alpha, u, beta, v, out):
    for i in range(n):
        out[i] = alpha * u[i] + beta * v[i]


def axpy(n, alpha, u, acc):
    # acc[i] += alpha * u[i]
    for i in range(n):
        acc[i] += alpha * u[i]


def gate_mix(n, z, prev, cand, out):
    # out[i] = (1 - z[i]) * prev[i] + z[i] * cand[i]
    for i in range(n):
        out[i] = (1.0 - z[i]) * prev[i] + z[i] * cand[i]


def dsigmoid_from_y(n, y, dy, out):
    # y = sigmoid(x); out[i] = dy[i] * y[i] * (1 - y[i])
    for i in range(n):
        out[i] = dy[i] * y[i] * (1.0 - y[i])


def dtanh_from_y(n, y, dy, out):
    # y = tanh(x); out[i] = dy[i] * (1 - y[i]^2)
    for i in range(n):
        out[i] = dy[i] * (1.0 - y[i] * y[i])


def conv_forward(pad_len, dim, n_k, l_k, xhat, w, out):
    # Each 1-D kernel row slides along the padded statement axis of one
    # embedding channel (kernel k reads channel k mod dim); the valid window
    # positions are mean-pooled per kernel.
    t_len = pad_len - l_k + 1
    inv = 1.0 / t_len
    for k in range(n_k):
        c = k % dim
        acc = 0.0
        wbase = k * l_k
        for t in range(t_len):
            for j in range(l_k):
                acc += w[wbase + j] * xhat[(t + j) * dim + c]
        out[k] = acc * inv


def conv_backward_w(pad_len, dim, n_k, l_k, xhat, dq, dw_acc):
    # The pooled output is linear in w, so each dw[k, j] is the kernel's
    # channel window sum scaled by its upstream gradient.
    t_len = pad_len - l_k + 1
    inv = 1.0 / t_len
    for k in range(n_k):
        c = k % dim
        dz = dq[k] * inv
        for j in range(l_k):
            acc = 0.0
            for t in range(t_len):
                acc += xhat[(t + j) * dim + c]
            dw_acc[k * l_k + j] += dz * acc


def conv_backward_x(pad_len, dim, n_k, l_k, w, dq, dx_out):
    # A padded entry feeds only the kernels assigned to its channel, through
    # the taps whose window covers its row.
    t_len = pad_len - l_k + 1
    inv = 1.0 / t_len
    for s in range(pad_len):
        j_lo = s - t_len + 1
        if j_lo < 0:
            j_lo = 0
        j_hi = l_k - 1
        if j_hi > s:
            j_hi = s
        for k in range(n_k):
            c = k % dim
            dz = dq[k] * inv
            wbase = k * l_k
            val = 0.0
            for j in range(j_lo, j_hi + 1):
                val += dz * w[wbase + j]
            dx_out[s * dim + c] += val


def graph_forward(n_nodes, dim, slices, op_ids, a_kind, a_idx, o_kind, o_idx,
                  t1, t2, w_r, w_z, dense_w, dense_b, table, rows_out, scratch):
    """Run the gated per-node embedding over a flattened graph.

    Node inputs come either from the learned entity table (kind 0) or from an
    earlier node's output row (kind 1); nodes are already in a valid
    dependency order. Scratch must hold at least 6*dim + 2*slices*dim floats.
    The composed per-node functions in the model layer perform the identical
    operation sequence; this fused loop exists so that bulk embedding and
    finite-difference sweeps do not pay per-node Python overhead.
    """
    d2 = 2 * dim
    act_len = 2 * slices * dim
    cat = scratch[0:d2]
    r = scratch[d2:d2 + dim]
    z = scratch[d2 + dim:d2 + 2 * dim]
    acell = scratch[d2 + 2 * dim:d2 + 3 * dim]
    act = scratch[d2 + 3 * dim:d2 + 3 * dim + act_len]
    y = scratch[d2 + 3 * dim + act_len:d2 + 4 * dim + act_len]
    dd = dim * dim
    for node in range(n_nodes):
        if a_kind[node] == 0:
            abuf, aoff = table, a_idx[node] * dim
        else:
            abuf, aoff = rows_out, a_idx[node] * dim
        if o_kind[node] == 0:
            obuf, ooff = table, o_idx[node] * dim
        else:
            obuf, ooff = rows_out, o_idx[node] * dim
        for i in range(dim):
            cat[i] = abuf[aoff + i]
            cat[dim + i] = obuf[ooff + i]
        matvec(dim, d2, w_r, cat, r)
        sigmoid_vec(dim, r, r)
        matvec(dim, d2, w_z, cat, z)
        sigmoid_vec(dim, z, z)
        for i in range(dim):
            acell[i] = r[i] * abuf[aoff + i]
        tbase = op_ids[node] * slices * dd
        for k in range(slices):
            vecmat_from(dim, dim, acell, 0, t1, tbase + k * dd, act, k * d2)
            vecmat_from(dim, dim, obuf, ooff, t2, tbase + k * dd,
                        act, k * d2 + dim)
        matvec(dim, act_len, dense_w, act, y)
        for i in range(dim):
            y[i] += dense_b[i]
        tanh_vec(dim, y, y)
        rbase = node * dim
        for i in range(dim):
            zi = z[i]
            rows_out[rbase + i] = (1.0 - zi) * abuf[aoff + i] + zi * y[i]


def vecmat_from(m, n, vec, voff, mat, moff, out, ooff):
    # out[ooff + j] = sum_i vec[voff + i] * mat[moff + i*n + j]
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += vec[voff + i] * mat[moff + i * n + j]
        out[ooff + j] = acc
