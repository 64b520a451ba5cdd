"""Pure-Python quadrature kernels.

Reference implementation of the hot per-tick integrals.  The compiled
extension in ``_kernels.pyx`` mirrors these loops operation for operation
(same accumulation order), so both backends produce bit-identical floats.
"""

BACKEND = "python"


def algebraic_f(y, u, ts, tau, alpha):
    """Windowed integral estimate of the ultra-local model residual.

    Computes -(6/tau^3) * integral over sigma in [0, tau] of
    (tau - 2*sigma)*y(sigma) + alpha*sigma*(tau - sigma)*u(sigma),
    by the composite trapezoid rule on a uniform grid sigma_i = i*ts.
    """
    n = len(y)
    acc = 0.0
    for i in range(n):
        sigma = i * ts
        w = (tau - 2.0 * sigma) * y[i] + alpha * sigma * (tau - sigma) * u[i]
        if i == 0 or i == n - 1:
            acc += 0.5 * w
        else:
            acc += w
    return -6.0 / (tau * tau * tau) * (acc * ts)


def closedloop_f(ydot_star, u, e, ts, tau, alpha, kp):
    """Windowed average of (ydot_star - alpha*u - kp*e), trapezoid rule."""
    n = len(u)
    acc = 0.0
    for i in range(n):
        w = ydot_star[i] - alpha * u[i] - kp * e[i]
        if i == 0 or i == n - 1:
            acc += 0.5 * w
        else:
            acc += w
    return (acc * ts) / tau
