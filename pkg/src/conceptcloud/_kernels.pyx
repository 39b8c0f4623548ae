# Hot loops: z-buffered point splatting and per-voxel accumulation.
# Both must stay bit-compatible with the numpy fallbacks in kernels.py:
# splatting only selects (no arithmetic), accumulation adds in ascending
# point-index order.

import numpy as np
cimport numpy as cnp

cnp.import_array()


def splat(const long long[::1] cols, const long long[::1] rows,
          const double[::1] depth, const unsigned char[:, ::1] colors,
          const long long[::1] ids, int width, int height, int radius,
          unsigned char[:, :, ::1] img, long long[:, ::1] mask,
          double[:, ::1] zbuf):
    cdef Py_ssize_t i, n = cols.shape[0]
    cdef long long c0, r0
    cdef Py_ssize_t r, c, rlo, rhi, clo, chi
    cdef double d
    for i in range(n):
        c0 = cols[i]
        r0 = rows[i]
        if c0 + radius < 0 or c0 - radius >= width:
            continue
        if r0 + radius < 0 or r0 - radius >= height:
            continue
        d = depth[i]
        rlo = r0 - radius if r0 - radius > 0 else 0
        rhi = r0 + radius if r0 + radius < height - 1 else height - 1
        clo = c0 - radius if c0 - radius > 0 else 0
        chi = c0 + radius if c0 + radius < width - 1 else width - 1
        for r in range(rlo, rhi + 1):
            for c in range(clo, chi + 1):
                if d < zbuf[r, c]:
                    zbuf[r, c] = d
                    img[r, c, 0] = colors[i, 0]
                    img[r, c, 1] = colors[i, 1]
                    img[r, c, 2] = colors[i, 2]
                    mask[r, c] = ids[i]


def voxel_accumulate(const long long[::1] groups, const double[:, ::1] pos,
                     const double[:, ::1] feat, double[:, ::1] pos_sum,
                     double[:, ::1] feat_sum, long long[::1] counts):
    cdef Py_ssize_t i, j, g, n = groups.shape[0]
    cdef Py_ssize_t d = feat.shape[1]
    for i in range(n):
        g = groups[i]
        counts[g] += 1
        pos_sum[g, 0] += pos[i, 0]
        pos_sum[g, 1] += pos[i, 1]
        pos_sum[g, 2] += pos[i, 2]
        for j in range(d):
            feat_sum[g, j] += feat[i, j]
