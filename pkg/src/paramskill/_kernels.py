"""Hot inner loops: DMP integration, arm dynamics, RK4 and the throw loop.

Everything here works on plain floats and float64 arrays so that the same
source runs under ``numba.njit`` or as ordinary Python (see ``_accel``).
Angles are absolute link angles measured counter-clockwise from +x when the
name starts with ``phi``; joint angles ``q`` are relative to the parent link.
"""

import math

import numpy as np

from ._accel import njit

STATUS_OK = 0
STATUS_NONFINITE = 1


@njit(cache=True, nogil=True)
def phase(t, alpha, kappa):
    return math.exp(-alpha * t / kappa)


@njit(cache=True, nogil=True)
def forcing(s, weights, centers, widths):
    num = 0.0
    den = 0.0
    for i in range(weights.shape[0]):
        d = s - centers[i]
        psi = math.exp(-widths[i] * d * d)
        num += weights[i] * psi
        den += psi
    if den < 1e-300:
        return 0.0
    return num / den


@njit(cache=True, nogil=True)
def release_index(lam, n_steps, dt, alpha, kappa):
    """First sample index whose phase is <= lam, or -1 within ``n_steps``."""
    for n in range(n_steps + 1):
        if phase(n * dt, alpha, kappa) <= lam:
            return n
    return -1


@njit(cache=True, nogil=True)
def _dmp_deriv(x, v, s, goal, x0, weights, centers, widths, spring, damping, kappa):
    f = forcing(s, weights, centers, widths)
    dv = (spring * (goal - x) - damping * v + (goal - x0) * f) / kappa
    dx = v / kappa
    return dx, dv


@njit(cache=True, nogil=True)
def integrate_dmp(goal, weights, x0, n_steps, dt, spring, damping, kappa, alpha,
                  centers, widths):
    """RK4 on the transformation system; the phase uses its exact solution.

    Returns arrays (t, s, x, xdot) of length ``n_steps + 1``. ``xdot`` is the
    time derivative of x (rad/s), i.e. v / kappa.
    """
    t = np.empty(n_steps + 1)
    s = np.empty(n_steps + 1)
    x = np.empty(n_steps + 1)
    xd = np.empty(n_steps + 1)
    xc = x0
    vc = 0.0
    for n in range(n_steps + 1):
        tn = n * dt
        t[n] = tn
        s[n] = phase(tn, alpha, kappa)
        x[n] = xc
        xd[n] = vc / kappa
        if n == n_steps:
            break
        s_mid = phase(tn + 0.5 * dt, alpha, kappa)
        s_end = phase(tn + dt, alpha, kappa)
        k1x, k1v = _dmp_deriv(xc, vc, s[n], goal, x0, weights, centers, widths,
                              spring, damping, kappa)
        k2x, k2v = _dmp_deriv(xc + 0.5 * dt * k1x, vc + 0.5 * dt * k1v, s_mid, goal, x0,
                              weights, centers, widths, spring, damping, kappa)
        k3x, k3v = _dmp_deriv(xc + 0.5 * dt * k2x, vc + 0.5 * dt * k2v, s_mid, goal, x0,
                              weights, centers, widths, spring, damping, kappa)
        k4x, k4v = _dmp_deriv(xc + dt * k3x, vc + dt * k3v, s_end, goal, x0,
                              weights, centers, widths, spring, damping, kappa)
        xc = xc + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        vc = vc + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return t, s, x, xd


@njit(cache=True, nogil=True)
def elbow_stop(q2, w2, lim, klim, blim):
    """Penalty torque of the joint-2 range stops at +-lim (zero inside the range)."""
    if q2 > lim:
        return -klim * (q2 - lim) - blim * w2
    if q2 < -lim:
        return -klim * (q2 + lim) - blim * w2
    return 0.0


@njit(cache=True, nogil=True)
def _accel3(q1, q2, q3, w1, w2, w3, u, l1, l2, l3, m1, m2, m3, grav, b1, b2, b3,
            lim, klim, blim):
    # absolute link angles/rates, then a 3x3 symmetric solve by cofactors
    p1 = q1
    p2 = q1 + q2
    p3 = p2 + q3
    r1 = w1
    r2 = w1 + w2
    r3 = r2 + w3
    s3 = m3
    s2 = m2 + m3
    s1 = m1 + m2 + m3
    c12 = math.cos(p1 - p2)
    c13 = math.cos(p1 - p3)
    c23 = math.cos(p2 - p3)
    n12 = math.sin(p1 - p2)
    n13 = math.sin(p1 - p3)
    n23 = math.sin(p2 - p3)
    a11 = s1 * l1 * l1
    a22 = s2 * l2 * l2
    a33 = s3 * l3 * l3
    a12 = s2 * l1 * l2 * c12
    a13 = s3 * l1 * l3 * c13
    a23 = s3 * l2 * l3 * c23
    t1 = -b1 * w1
    t2 = u - b2 * w2 + elbow_stop(q2, w2, lim, klim, blim)
    t3 = -b3 * w3
    f1 = (t1 - t2) - s1 * grav * l1 * math.cos(p1) \
        - s2 * l1 * l2 * n12 * r2 * r2 - s3 * l1 * l3 * n13 * r3 * r3
    f2 = (t2 - t3) - s2 * grav * l2 * math.cos(p2) \
        + s2 * l1 * l2 * n12 * r1 * r1 - s3 * l2 * l3 * n23 * r3 * r3
    f3 = t3 - s3 * grav * l3 * math.cos(p3) \
        + s3 * l1 * l3 * n13 * r1 * r1 + s3 * l2 * l3 * n23 * r2 * r2
    k11 = a22 * a33 - a23 * a23
    k12 = a13 * a23 - a12 * a33
    k13 = a12 * a23 - a13 * a22
    k22 = a11 * a33 - a13 * a13
    k23 = a12 * a13 - a11 * a23
    k33 = a11 * a22 - a12 * a12
    det = a11 * k11 + a12 * k12 + a13 * k13
    e1 = (k11 * f1 + k12 * f2 + k13 * f3) / det
    e2 = (k12 * f1 + k22 * f2 + k23 * f3) / det
    e3 = (k13 * f1 + k23 * f2 + k33 * f3) / det
    return e1, e2 - e1, e3 - e2


@njit(cache=True, nogil=True)
def arm_accel(q, qd, u, lengths, masses, gravity, damping, stop):
    """Joint accelerations of the 3-link point-mass arm, torque ``u`` on joint 2.

    ``stop`` is (limit, stiffness, damping) of the joint-2 range stops.
    """
    a1, a2, a3 = _accel3(q[0], q[1], q[2], qd[0], qd[1], qd[2], u,
                         lengths[0], lengths[1], lengths[2], masses[0], masses[1], masses[2],
                         gravity, damping[0], damping[1], damping[2], stop[0], stop[1], stop[2])
    out = np.empty(3)
    out[0] = a1
    out[1] = a2
    out[2] = a3
    return out


@njit(cache=True, nogil=True)
def _rk4_scalar(q1, q2, q3, w1, w2, w3, u, dt, l1, l2, l3, m1, m2, m3, grav, b1, b2, b3,
                lim, klim, blim):
    h = 0.5 * dt
    a1, a2, a3 = _accel3(q1, q2, q3, w1, w2, w3, u, l1, l2, l3, m1, m2, m3, grav, b1, b2, b3, lim, klim, blim)
    v1, v2, v3 = w1 + h * a1, w2 + h * a2, w3 + h * a3
    c1, c2, c3 = _accel3(q1 + h * w1, q2 + h * w2, q3 + h * w3, v1, v2, v3, u,
                         l1, l2, l3, m1, m2, m3, grav, b1, b2, b3, lim, klim, blim)
    x1, x2, x3 = w1 + h * c1, w2 + h * c2, w3 + h * c3
    d1, d2, d3 = _accel3(q1 + h * v1, q2 + h * v2, q3 + h * v3, x1, x2, x3, u,
                         l1, l2, l3, m1, m2, m3, grav, b1, b2, b3, lim, klim, blim)
    y1, y2, y3 = w1 + dt * d1, w2 + dt * d2, w3 + dt * d3
    e1, e2, e3 = _accel3(q1 + dt * x1, q2 + dt * x2, q3 + dt * x3, y1, y2, y3, u,
                         l1, l2, l3, m1, m2, m3, grav, b1, b2, b3, lim, klim, blim)
    k = dt / 6.0
    return (q1 + k * (w1 + 2.0 * v1 + 2.0 * x1 + y1),
            q2 + k * (w2 + 2.0 * v2 + 2.0 * x2 + y2),
            q3 + k * (w3 + 2.0 * v3 + 2.0 * x3 + y3),
            w1 + k * (a1 + 2.0 * c1 + 2.0 * d1 + e1),
            w2 + k * (a2 + 2.0 * c2 + 2.0 * d2 + e2),
            w3 + k * (a3 + 2.0 * c3 + 2.0 * d3 + e3))


@njit(cache=True, nogil=True)
def rk4_step(q, qd, u, dt, lengths, masses, gravity, damping, stop):
    r = _rk4_scalar(q[0], q[1], q[2], qd[0], qd[1], qd[2], u, dt,
                    lengths[0], lengths[1], lengths[2], masses[0], masses[1], masses[2],
                    gravity, damping[0], damping[1], damping[2], stop[0], stop[1], stop[2])
    qn = np.empty(3)
    vn = np.empty(3)
    for i in range(3):
        qn[i] = r[i]
        vn[i] = r[3 + i]
    return qn, vn


@njit(cache=True, nogil=True)
def tip_kinematics(q, qd, lengths, base):
    px = base[0]
    py = base[1]
    vx = 0.0
    vy = 0.0
    phi = 0.0
    phid = 0.0
    for i in range(3):
        phi += q[i]
        phid += qd[i]
        px += lengths[i] * math.cos(phi)
        py += lengths[i] * math.sin(phi)
        vx -= lengths[i] * phid * math.sin(phi)
        vy += lengths[i] * phid * math.cos(phi)
    return px, py, vx, vy


@njit(cache=True, nogil=True)
def throw_loop(lam, s, xdes, vdes, q0, qd0, dt, lengths, masses, gravity, damping, stop,
               kp, ki, kd, torque_limit, base, record):
    """Track the desired joint-2 trajectory until release or the end of ``s``.

    Returns (status, release_index, release_state[4], q, qd, log) where
    release_index is -1 if the dart was never released and ``log`` holds
    (q1, q2, q3, qd1, qd2, qd3, torque) rows when ``record`` is true.
    """
    n_steps = s.shape[0] - 1
    l1, l2, l3 = lengths[0], lengths[1], lengths[2]
    m1, m2, m3 = masses[0], masses[1], masses[2]
    b1, b2, b3 = damping[0], damping[1], damping[2]
    lim, klim, blim = stop[0], stop[1], stop[2]
    q1, q2, q3 = q0[0], q0[1], q0[2]
    w1, w2, w3 = qd0[0], qd0[1], qd0[2]
    integ = 0.0
    rel = np.zeros(4)
    log = np.zeros((n_steps + 1 if record else 0, 7))
    release_index = -1
    status = STATUS_OK
    for n in range(n_steps + 1):
        if record:
            log[n, 0] = q1
            log[n, 1] = q2
            log[n, 2] = q3
            log[n, 3] = w1
            log[n, 4] = w2
            log[n, 5] = w3
        if s[n] <= lam:
            qv = np.array([q1, q2, q3])
            wv = np.array([w1, w2, w3])
            px, py, vx, vy = tip_kinematics(qv, wv, lengths, base)
            rel[0] = px
            rel[1] = py
            rel[2] = vx
            rel[3] = vy
            release_index = n
            break
        if n == n_steps:
            break
        err = xdes[n] - q2
        u = kp * err + ki * integ + kd * (vdes[n] - w2)
        integ += err * dt
        if u > torque_limit:
            u = torque_limit
        elif u < -torque_limit:
            u = -torque_limit
        if record:
            log[n, 6] = u
        q1, q2, q3, w1, w2, w3 = _rk4_scalar(q1, q2, q3, w1, w2, w3, u, dt,
                                             l1, l2, l3, m1, m2, m3, gravity, b1, b2, b3,
                                             lim, klim, blim)
        if not (math.isfinite(q1) and math.isfinite(q2) and math.isfinite(q3)
                and math.isfinite(w1) and math.isfinite(w2) and math.isfinite(w3)):
            status = STATUS_NONFINITE
            break
    return status, release_index, rel, np.array([q1, q2, q3]), np.array([w1, w2, w3]), log
