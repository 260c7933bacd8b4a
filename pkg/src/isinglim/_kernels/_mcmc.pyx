# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Glauber and Wolff kernels.

Mirrors _kernels/pure.py exactly: same uniform-stream block size, same draw
order, so chains are bit-identical across backends for a given seed.
"""

import numpy as np

cimport numpy as cnp

STREAM_BLOCK = 65536

BACKEND_NAME = "compiled"


cdef class UniformStream:
    cdef object gen
    cdef double[::1] buf
    cdef Py_ssize_t pos
    cdef Py_ssize_t size

    def __init__(self, gen, Py_ssize_t size=STREAM_BLOCK):
        self.gen = gen
        self.size = size
        self.buf = gen.random(size)
        self.pos = 0

    cdef inline double c_next(self):
        cdef double u
        if self.pos == self.size:
            self.buf = self.gen.random(self.size)
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u

    def next(self):
        return self.c_next()


def make_stream(gen, Py_ssize_t size=STREAM_BLOCK):
    return UniformStream(gen, size)


cdef inline void _glauber_sweep(cnp.int8_t[::1] sp, const cnp.int32_t[::1] iptr,
                                const cnp.int32_t[::1] ind, const double[::1] pp,
                                Py_ssize_t n, Py_ssize_t k, UniformStream st):
    cdef Py_ssize_t step, i, e
    cdef int s
    for step in range(n):
        i = <Py_ssize_t>(st.c_next() * n)
        if i >= n:
            i = n - 1
        s = 0
        for e in range(iptr[i], iptr[i + 1]):
            s += sp[ind[e]]
        sp[i] = 1 if st.c_next() < pp[(s + k) >> 1] else -1


def glauber_sample(cnp.int8_t[::1] spins, const cnp.int32_t[::1] indptr,
                   const cnp.int32_t[::1] indices, const double[::1] pplus,
                   Py_ssize_t burn, Py_ssize_t thin,
                   cnp.int8_t[:, ::1] out, UniformStream stream):
    """Random-scan heat-bath sweeps; records a row of `out` every `thin` sweeps
    after `burn` sweeps. Mutates `spins` in place."""
    cdef Py_ssize_t n = spins.shape[0]
    cdef Py_ssize_t k = pplus.shape[0] - 1
    cdef Py_ssize_t nsamples = out.shape[0]
    cdef Py_ssize_t r, b
    for b in range(burn):
        _glauber_sweep(spins, indptr, indices, pplus, n, k, stream)
    for r in range(nsamples):
        for b in range(thin):
            _glauber_sweep(spins, indptr, indices, pplus, n, k, stream)
        out[r, :] = spins


cdef inline void _wolff_step(cnp.int8_t[::1] sp, const cnp.int32_t[::1] iptr,
                             const cnp.int32_t[::1] ind, double p_add,
                             Py_ssize_t n, cnp.int32_t[::1] stack,
                             UniformStream st):
    cdef Py_ssize_t i, e, top
    cdef cnp.int32_t v, w
    cdef cnp.int8_t cs
    i = <Py_ssize_t>(st.c_next() * n)
    if i >= n:
        i = n - 1
    cs = sp[i]
    sp[i] = -cs
    stack[0] = <cnp.int32_t>i
    top = 1
    while top:
        top -= 1
        v = stack[top]
        for e in range(iptr[v], iptr[v + 1]):
            w = ind[e]
            if sp[w] == cs and st.c_next() < p_add:
                sp[w] = -cs
                stack[top] = w
                top += 1


def wolff_sample(cnp.int8_t[::1] spins, const cnp.int32_t[::1] indptr,
                 const cnp.int32_t[::1] indices, double p_add,
                 Py_ssize_t burn, Py_ssize_t thin,
                 cnp.int8_t[:, ::1] out, UniformStream stream):
    """Single-cluster flips; records a row of `out` every `thin` steps after
    `burn` steps. Mutates `spins` in place."""
    cdef Py_ssize_t n = spins.shape[0]
    cdef Py_ssize_t nsamples = out.shape[0]
    cdef cnp.int32_t[::1] stack = np.empty(n, dtype=np.int32)
    cdef Py_ssize_t r, b
    for b in range(burn):
        _wolff_step(spins, indptr, indices, p_add, n, stack, stream)
    for r in range(nsamples):
        for b in range(thin):
            _wolff_step(spins, indptr, indices, p_add, n, stack, stream)
        out[r, :] = spins
