"""Compiled inner loop for batches of quantum-jump trajectories.

States are stored struct-of-arrays, ``re[i, b]`` / ``im[i, b]`` for basis index
``i`` and trajectory lane ``b``, so the innermost loops run over lanes.  Every
lane performs exactly the same floating-point operations in the same order
whatever the batch width, which makes a trajectory bit-identical whether it is
propagated alone or inside any batch.  Do not enable fastmath here: operation
contraction would break that guarantee.

Operators are passed as two coordinate lists, one for the nonzero real parts
and one for the nonzero imaginary parts of the matrix.
"""

import numba as nb
import numpy as np

OK = -1


@nb.njit(cache=True)
def _apply(re, im, out_re, out_im, rr, rc, rv, ir, ic, iv):
    out_re[:, :] = 0.0
    out_im[:, :] = 0.0
    nlanes = re.shape[1]
    for q in range(rr.shape[0]):
        o1 = out_re[rr[q]]
        o2 = out_im[rr[q]]
        x1 = re[rc[q]]
        x2 = im[rc[q]]
        v = rv[q]
        for b in range(nlanes):
            o1[b] += v * x1[b]
            o2[b] += v * x2[b]
    for q in range(ir.shape[0]):
        o1 = out_re[ir[q]]
        o2 = out_im[ir[q]]
        x1 = re[ic[q]]
        x2 = im[ic[q]]
        v = iv[q]
        for b in range(nlanes):
            o1[b] -= v * x2[b]
            o2[b] += v * x1[b]


@nb.njit(cache=True)
def _apply_lane(re, im, out_re, out_im, lane, rr, rc, rv, ir, ic, iv):
    for i in range(re.shape[0]):
        out_re[i, lane] = 0.0
        out_im[i, lane] = 0.0
    for q in range(rr.shape[0]):
        out_re[rr[q], lane] += rv[q] * re[rc[q], lane]
        out_im[rr[q], lane] += rv[q] * im[rc[q], lane]
    for q in range(ir.shape[0]):
        out_re[ir[q], lane] -= iv[q] * im[ic[q], lane]
        out_im[ir[q], lane] += iv[q] * re[ic[q], lane]


@nb.njit(cache=True)
def propagate(
    re, im,
    w0, w1,
    photon_weights, top_rows, leak_tol,
    jump_scale, uniforms, first_step,
    sample_steps, sample_ptr, counts, snap_re, snap_im, snap_counts,
    jumped,
):
    """Advance every lane by ``uniforms.shape[0]`` steps in place.

    ``w0`` and ``w1`` are ``(rr, rc, rv, ir, ic, iv)`` coordinate tuples for the
    no-jump and jump operators.  A lane jumps on step k when
    ``uniforms[k, b] < jump_scale * <n>`` for its normalized pre-step state.
    The state after global step ``s`` lives at time ``(s + 1) * dt``; it is
    copied into snapshot slot ``sample_ptr`` whenever ``sample_steps`` asks for
    that step.

    Returns ``(sample_ptr, bad_lane, bad_step)``; ``bad_lane`` is ``OK`` unless
    the top-of-ladder population of some lane exceeded ``leak_tol``.
    """
    dim, nlanes = re.shape
    nsteps = uniforms.shape[0]
    out_re = np.empty_like(re)
    out_im = np.empty_like(im)
    nbar = np.empty(nlanes)
    scale = np.empty(nlanes)
    nsamples = sample_steps.shape[0]
    for k in range(nsteps):
        nbar[:] = 0.0
        for i in range(dim):
            w = photon_weights[i]
            if w != 0.0:
                x1 = re[i]
                x2 = im[i]
                for b in range(nlanes):
                    nbar[b] += w * (x1[b] * x1[b] + x2[b] * x2[b])

        _apply(re, im, out_re, out_im, w0[0], w0[1], w0[2], w0[3], w0[4], w0[5])
        for b in range(nlanes):
            if uniforms[k, b] < jump_scale * nbar[b]:
                jumped[k, b] = True
                counts[b] += 1
                _apply_lane(re, im, out_re, out_im, b, w1[0], w1[1], w1[2], w1[3], w1[4], w1[5])

        scale[:] = 0.0
        for i in range(dim):
            o1 = out_re[i]
            o2 = out_im[i]
            for b in range(nlanes):
                scale[b] += o1[b] * o1[b] + o2[b] * o2[b]
        for b in range(nlanes):
            scale[b] = 1.0 / np.sqrt(scale[b])
        for i in range(dim):
            o1 = out_re[i]
            o2 = out_im[i]
            x1 = re[i]
            x2 = im[i]
            for b in range(nlanes):
                x1[b] = o1[b] * scale[b]
                x2[b] = o2[b] * scale[b]

        for b in range(nlanes):
            leak = 0.0
            for r in range(top_rows.shape[0]):
                leak += re[top_rows[r], b] ** 2 + im[top_rows[r], b] ** 2
            if leak > leak_tol:
                return sample_ptr, b, first_step + k

        step = first_step + k + 1
        while sample_ptr < nsamples and sample_steps[sample_ptr] == step:
            snap_re[sample_ptr] = re
            snap_im[sample_ptr] = im
            snap_counts[sample_ptr] = counts
            sample_ptr += 1
    return sample_ptr, OK, 0
