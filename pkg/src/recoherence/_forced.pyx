# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-mode integrators for the forced-mode amplitude equation

    d(alpha)/dt = -i omega alpha + drive * eps(t)

Each mode is independent, so the outer loop runs over modes and the inner loop
over time steps.  ``eps_half`` holds eps at every half step (length
2*n_steps + 1).  ``out[j, :]`` receives the amplitudes after ``j*stride`` steps.
Complex arithmetic is spelled out in real and imaginary parts.
"""


def rk4_forced_modes(double[::1] omega, double[::1] drive, double[::1] eps_half,
                     double dt, Py_ssize_t stride, double complex[::1] alpha0,
                     double complex[:, ::1] out):
    cdef Py_ssize_t n_modes = omega.shape[0]
    cdef Py_ssize_t n_steps = (eps_half.shape[0] - 1) // 2
    cdef Py_ssize_t k, n, count
    cdef double x, y, w, f, f0, fm, f1
    cdef double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y, tx, ty
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    with nogil:
        for k in range(n_modes):
            x = alpha0[k].real
            y = alpha0[k].imag
            w = omega[k]
            f = drive[k]
            out[0, k] = alpha0[k]
            count = 0
            for n in range(n_steps):
                f0 = f * eps_half[2 * n]
                fm = f * eps_half[2 * n + 1]
                f1 = f * eps_half[2 * n + 2]
                # -i w (x + i y) = w y - i w x
                k1x = w * y + f0
                k1y = -w * x
                tx = x + h2 * k1x
                ty = y + h2 * k1y
                k2x = w * ty + fm
                k2y = -w * tx
                tx = x + h2 * k2x
                ty = y + h2 * k2y
                k3x = w * ty + fm
                k3y = -w * tx
                tx = x + dt * k3x
                ty = y + dt * k3y
                k4x = w * ty + f1
                k4y = -w * tx
                x = x + h6 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                y = y + h6 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                count += 1
                if count == stride:
                    count = 0
                    out[(n + 1) // stride, k].real = x
                    out[(n + 1) // stride, k].imag = y


def etd_forced_modes(double complex[::1] phase, double complex[::1] c0,
                     double complex[::1] c1, double complex[::1] c2,
                     double[::1] eps_half, Py_ssize_t stride,
                     double complex[::1] alpha0, double complex[:, ::1] out):
    cdef Py_ssize_t n_modes = phase.shape[0]
    cdef Py_ssize_t n_steps = (eps_half.shape[0] - 1) // 2
    cdef Py_ssize_t k, n, count
    cdef double x, y, px, py, ax, ay, bx, by, cx, cy, e0, e1, e2, tx
    with nogil:
        for k in range(n_modes):
            x = alpha0[k].real
            y = alpha0[k].imag
            px = phase[k].real
            py = phase[k].imag
            ax = c0[k].real
            ay = c0[k].imag
            bx = c1[k].real
            by = c1[k].imag
            cx = c2[k].real
            cy = c2[k].imag
            out[0, k] = alpha0[k]
            count = 0
            for n in range(n_steps):
                e0 = eps_half[2 * n]
                e1 = eps_half[2 * n + 1]
                e2 = eps_half[2 * n + 2]
                tx = px * x - py * y + ax * e0 + bx * e1 + cx * e2
                y = px * y + py * x + ay * e0 + by * e1 + cy * e2
                x = tx
                count += 1
                if count == stride:
                    count = 0
                    out[(n + 1) // stride, k].real = x
                    out[(n + 1) // stride, k].imag = y
