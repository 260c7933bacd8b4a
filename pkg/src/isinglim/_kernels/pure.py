"""Pure-Python MCMC kernels, the fallback when the compiled extension is absent.

Kept in exact lockstep with the compiled implementation: both consume
uniforms from block-buffered streams of the same size in the same order, so
a given seed produces bit-identical chains on either backend.
"""


STREAM_BLOCK = 65536

BACKEND_NAME = "pure"


class UniformStream:
    """Block-buffered stream of uniforms from a numpy Generator."""

    __slots__ = ("gen", "buf", "pos", "size")

    def __init__(self, gen, size=STREAM_BLOCK):
        self.gen = gen
        self.size = size
        self.buf = gen.random(size)
        self.pos = 0

    def next(self):
        if self.pos == self.size:
            self.buf = self.gen.random(self.size)
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u


def make_stream(gen, size=STREAM_BLOCK):
    return UniformStream(gen, size)


def glauber_sample(spins, indptr, indices, pplus, burn, thin, out, stream):
    """Random-scan heat-bath sweeps; records a row of `out` every `thin` sweeps
    after `burn` sweeps. Mutates `spins` in place."""
    n = len(spins)
    k = len(pplus) - 1
    sp = spins.tolist()
    iptr = indptr.tolist()
    ind = indices.tolist()
    pp = list(pplus)
    nxt = stream.next
    nsamples = out.shape[0]

    def sweep():
        for _ in range(n):
            i = int(nxt() * n)
            if i >= n:
                i = n - 1
            s = 0
            for e in range(iptr[i], iptr[i + 1]):
                s += sp[ind[e]]
            sp[i] = 1 if nxt() < pp[(s + k) >> 1] else -1

    for _ in range(burn):
        sweep()
    for r in range(nsamples):
        for _ in range(thin):
            sweep()
        out[r, :] = sp
    spins[:] = sp


def wolff_sample(spins, indptr, indices, p_add, burn, thin, out, stream):
    """Single-cluster flips; records a row of `out` every `thin` steps after
    `burn` steps. Mutates `spins` in place."""
    n = len(spins)
    sp = spins.tolist()
    iptr = indptr.tolist()
    ind = indices.tolist()
    stack = [0] * n
    nxt = stream.next
    nsamples = out.shape[0]

    def step():
        i = int(nxt() * n)
        if i >= n:
            i = n - 1
        cs = sp[i]
        sp[i] = -cs
        stack[0] = i
        top = 1
        while top:
            top -= 1
            v = stack[top]
            for e in range(iptr[v], iptr[v + 1]):
                w = ind[e]
                if sp[w] == cs and nxt() < p_add:
                    sp[w] = -cs
                    stack[top] = w
                    top += 1

    for _ in range(burn):
        step()
    for r in range(nsamples):
        for _ in range(thin):
            step()
        out[r, :] = sp
    spins[:] = sp
