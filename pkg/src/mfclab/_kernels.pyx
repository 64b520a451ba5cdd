# Compiled quadrature kernels.  Must stay numerically identical to
# _kernels_py.py: same grid, same accumulation order.

BACKEND = "cython"


def algebraic_f(const double[::1] y, const double[::1] u,
                double ts, double tau, double alpha):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t i
    cdef double sigma, w
    cdef double acc = 0.0
    for i in range(n):
        sigma = i * ts
        w = (tau - 2.0 * sigma) * y[i] + alpha * sigma * (tau - sigma) * u[i]
        if i == 0 or i == n - 1:
            acc += 0.5 * w
        else:
            acc += w
    return -6.0 / (tau * tau * tau) * (acc * ts)


def closedloop_f(const double[::1] ydot_star, const double[::1] u,
                 const double[::1] e, double ts, double tau,
                 double alpha, double kp):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double w
    cdef double acc = 0.0
    for i in range(n):
        w = ydot_star[i] - alpha * u[i] - kp * e[i]
        if i == 0 or i == n - 1:
            acc += 0.5 * w
        else:
            acc += w
    return (acc * ts) / tau
