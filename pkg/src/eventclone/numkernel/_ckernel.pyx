# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels.

Mirror of ``pykernel``: identical signatures and identical floating-point
operation order (the extension is built with -ffp-contract=off), so results
match the pure-Python backend bit for bit.
"""

from libc.math cimport exp, tanh

BACKEND_NAME = "c"


cdef double c_dot(int n, const double* u, const double* v) noexcept nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(n):
        acc += u[i] * v[i]
    return acc


cdef void c_matvec(int m, int n, const double* mat, const double* vec,
                   double* out) noexcept nogil:
    cdef int i, j
    cdef double acc
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += mat[i * n + j] * vec[j]
        out[i] = acc


cdef void c_vecmat(int m, int n, const double* vec, const double* mat,
                   double* out) noexcept nogil:
    cdef int i, j
    cdef double acc
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += vec[i] * mat[i * n + j]
        out[j] = acc


cdef void c_sigmoid(int n, const double* x, double* out) noexcept nogil:
    cdef int i
    for i in range(n):
        out[i] = 1.0 / (1.0 + exp(-x[i]))


cdef void c_tanh(int n, const double* x, double* out) noexcept nogil:
    cdef int i
    for i in range(n):
        out[i] = tanh(x[i])


def dot(int n, double[::1] u, double[::1] v):
    return c_dot(n, &u[0], &v[0])


def matvec(int m, int n, double[::1] mat, double[::1] vec, double[::1] out):
    c_matvec(m, n, &mat[0], &vec[0], &out[0])


def vecmat(int m, int n, double[::1] vec, double[::1] mat, double[::1] out):
    c_vecmat(m, n, &vec[0], &mat[0], &out[0])


def matmul(int m, int n, int p, double[::1] a, double[::1] b, double[::1] out):
    cdef int i, j, k
    cdef double acc
    for i in range(m):
        for k in range(p):
            acc = 0.0
            for j in range(n):
                acc += a[i * n + j] * b[j * p + k]
            out[i * p + k] = acc


def outer_acc(int m, int n, double[::1] u, double[::1] v, double[::1] acc):
    cdef int i, j
    cdef double ui
    for i in range(m):
        ui = u[i]
        for j in range(n):
            acc[i * n + j] += ui * v[j]


def sigmoid_vec(int n, double[::1] x, double[::1] out):
    c_sigmoid(n, &x[0], &out[0])


def tanh_vec(int n, double[::1] x, double[::1] out):
    c_tanh(n, &x[0], &out[0])


def hadamard_vec(int n, double[::1] u, double[::1] v, double[::1] out):
    cdef int i
    for i in range(n):
        out[i] = u[i] * v[i]


def hadamard_acc(int n, double[::1] u, double[::1] v, double[::1] acc):
    cdef int i
    for i in range(n):
        acc[i] += u[i] * v[i]


def ew_sub(int n, double[::1] u, double[::1] v, double[::1] out):
    cdef int i
    for i in range(n):
        out[i] = u[i] - v[i]


def scale_add_vec(int n, double alpha, double[::1] u, double beta,
                  double[::1] v, double[::1] out):
    cdef int i
    for i in range(n):
        out[i] = alpha * u[i] + beta * v[i]


def axpy(int n, double alpha, double[::1] u, double[::1] acc):
    cdef int i
    for i in range(n):
        acc[i] += alpha * u[i]


def gate_mix(int n, double[::1] z, double[::1] prev, double[::1] cand,
             double[::1] out):
    cdef int i
    for i in range(n):
        out[i] = (1.0 - z[i]) * prev[i] + z[i] * cand[i]


def dsigmoid_from_y(int n, double[::1] y, double[::1] dy, double[::1] out):
    cdef int i
    for i in range(n):
        out[i] = dy[i] * y[i] * (1.0 - y[i])


def dtanh_from_y(int n, double[::1] y, double[::1] dy, double[::1] out):
    cdef int i
    for i in range(n):
        out[i] = dy[i] * (1.0 - y[i] * y[i])


def conv_forward(int pad_len, int dim, int n_k, int l_k, double[::1] xhat,
                 double[::1] w, double[::1] out):
    cdef int t_len = pad_len - l_k + 1
    cdef double inv = 1.0 / t_len
    cdef int k, t, j, c, wbase
    cdef double acc
    for k in range(n_k):
        c = k % dim
        acc = 0.0
        wbase = k * l_k
        for t in range(t_len):
            for j in range(l_k):
                acc += w[wbase + j] * xhat[(t + j) * dim + c]
        out[k] = acc * inv


def conv_backward_w(int pad_len, int dim, int n_k, int l_k, double[::1] xhat,
                    double[::1] dq, double[::1] dw_acc):
    cdef int t_len = pad_len - l_k + 1
    cdef double inv = 1.0 / t_len
    cdef int k, t, j, c
    cdef double acc, dz
    for k in range(n_k):
        c = k % dim
        dz = dq[k] * inv
        for j in range(l_k):
            acc = 0.0
            for t in range(t_len):
                acc += xhat[(t + j) * dim + c]
            dw_acc[k * l_k + j] += dz * acc


def conv_backward_x(int pad_len, int dim, int n_k, int l_k, double[::1] w,
                    double[::1] dq, double[::1] dx_out):
    cdef int t_len = pad_len - l_k + 1
    cdef double inv = 1.0 / t_len
    cdef int s, k, j, c, j_lo, j_hi, wbase
    cdef double val, dz
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


def graph_forward(int n_nodes, int dim, int slices, int[::1] op_ids,
                  int[::1] a_kind, int[::1] a_idx, int[::1] o_kind,
                  int[::1] o_idx, double[::1] t1, double[::1] t2,
                  double[::1] w_r, double[::1] w_z, double[::1] dense_w,
                  double[::1] dense_b, double[::1] table,
                  double[::1] rows_out, double[::1] scratch):
    cdef int d2 = 2 * dim
    cdef int act_len = 2 * slices * dim
    cdef int dd = dim * dim
    cdef double* cat = &scratch[0]
    cdef double* r = cat + d2
    cdef double* z = r + dim
    cdef double* acell = z + dim
    cdef double* act = acell + dim
    cdef double* y = act + act_len
    cdef double* rows = &rows_out[0]
    cdef double* tab = &table[0]
    cdef int node, i, j, k, tbase, rbase
    cdef const double* abuf
    cdef const double* obuf
    cdef double acc, zi
    for node in range(n_nodes):
        if a_kind[node] == 0:
            abuf = tab + a_idx[node] * dim
        else:
            abuf = rows + a_idx[node] * dim
        if o_kind[node] == 0:
            obuf = tab + o_idx[node] * dim
        else:
            obuf = rows + o_idx[node] * dim
        for i in range(dim):
            cat[i] = abuf[i]
            cat[dim + i] = obuf[i]
        c_matvec(dim, d2, &w_r[0], cat, r)
        c_sigmoid(dim, r, r)
        c_matvec(dim, d2, &w_z[0], cat, z)
        c_sigmoid(dim, z, z)
        for i in range(dim):
            acell[i] = r[i] * abuf[i]
        tbase = op_ids[node] * slices * dd
        for k in range(slices):
            c_vecmat(dim, dim, acell, &t1[0] + tbase + k * dd, act + k * d2)
            c_vecmat(dim, dim, obuf, &t2[0] + tbase + k * dd,
                     act + k * d2 + dim)
        c_matvec(dim, act_len, &dense_w[0], act, y)
        for i in range(dim):
            y[i] += dense_b[i]
        c_tanh(dim, y, y)
        rbase = node * dim
        for i in range(dim):
            zi = z[i]
            rows[rbase + i] = (1.0 - zi) * abuf[i] + zi * y[i]
