"""Straight-line scalar reference for every optimizer variant.

Everything here is plain Python floats, lists, and the math module; nothing
is imported from the package. Tests replay the same gradient stream through
this file and through the library and demand per-element agreement, so this
file must stay an independent transcription of the update rules, however
repetitive that makes it.
"""

import math


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def cyclic_rate_ref(t, steps):
    lr = 2.0 - abs(math.cos(math.pi * t / steps)) * math.exp(-0.01 * (t % steps + 1))
    if lr < 9e-4:
        lr = 9e-4
    return lr


def reference_run(
    variant,
    theta0,
    grad_stream,
    lr=0.001,
    rho1=0.9,
    rho2=0.999,
    eps=1e-8,
    k=4.0,
    steps=30,
    eps_div=1e-12,
    avg_mode="squared_grad",
):
    """Run one parameter vector through `variant`; returns the trajectory
    (list of theta lists, one per step, excluding the starting point)."""
    n = len(theta0)
    theta = [float(v) for v in theta0]
    m = [0.0] * n
    u = [0.0] * n
    avg = [0.0] * n
    u_max = [0.0] * n
    g_prev = [0.0] * n
    t = 0
    trajectory = []

    for g in grad_stream:
        t += 1
        if variant == "sgd":
            for i in range(n):
                theta[i] = theta[i] - lr * g[i]
            trajectory.append(list(theta))
            continue

        for i in range(n):
            m[i] = rho1 * m[i] + (1.0 - rho1) * g[i]
            u[i] = rho2 * u[i] + (1.0 - rho2) * (g[i] * g[i])
        bc1 = 1.0 - rho1**t
        bc2 = 1.0 - rho2**t
        mhat = [m[i] / bc1 for i in range(n)]
        uhat = [u[i] / bc2 for i in range(n)]

        if variant == "adam":
            for i in range(n):
                theta[i] = theta[i] - lr * 1.0 * mhat[i] / (math.sqrt(uhat[i]) + eps)

        elif variant == "amsgrad":
            for i in range(n):
                u_max[i] = max(u_max[i], u[i])
                theta[i] = theta[i] - lr * 1.0 * mhat[i] / (math.sqrt(u_max[i]) + eps)

        elif variant == "diffgrad":
            for i in range(n):
                mod = sig(abs(g_prev[i] - g[i]))
                theta[i] = theta[i] - lr * mod * mhat[i] / (math.sqrt(uhat[i]) + eps)
            g_prev = [float(v) for v in g]

        elif variant in ("dgrad", "cos", "exp", "explr"):
            delta = [abs(g[i] - avg[i]) for i in range(n)]
            delta_den = max(max(delta), eps_div)

            if variant == "dgrad":
                mods = [sig(4.0 * (delta[i] / delta_den)) for i in range(n)]
            elif variant == "cos":
                lrt = cyclic_rate_ref(t, steps)
                mods = [sig(4.0 * lrt * (delta[i] / delta_den)) for i in range(n)]
            elif variant == "exp":
                raw = [(k * delta[i]) * math.exp(-(k * delta[i])) for i in range(n)]
                raw_den = max(max(raw), eps_div)
                mods = [1.5 * (raw[i] / raw_den) for i in range(n)]
            else:  # explr
                raw = [(1.0 * delta[i]) * math.exp(-(1.0 * delta[i])) for i in range(n)]
                raw_den = max(max(raw), eps_div)
                mods = [
                    (1.5 * (raw[i] / raw_den)) * sig(2.0 * (delta[i] / delta_den))
                    for i in range(n)
                ]

            for i in range(n):
                theta[i] = theta[i] - lr * mods[i] * mhat[i] / (math.sqrt(uhat[i]) + eps)
            for i in range(n):
                if avg_mode == "squared_grad":
                    avg[i] = rho2 * avg[i] + (1.0 - rho2) * (g[i] * g[i])
                else:
                    avg[i] = rho2 * avg[i] + (1.0 - rho2) * g[i]

        else:
            raise ValueError(f"unknown variant {variant!r}")

        trajectory.append(list(theta))

    return trajectory
