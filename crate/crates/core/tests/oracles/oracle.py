"""Independent numpy transcription of the field model, used to freeze the
expected values in the Rust test suites. Not imported by the crate.

Run: python3 oracle.py
"""
import math
import numpy as np

LAM = 866e-9
W0 = 37e-6
ZR = math.pi * W0**2 / LAM
K = 2 * math.pi / LAM


def hermite_table(l, t):
    # closed forms, not the recurrence
    return [
        np.ones_like(t),
        2 * t,
        4 * t**2 - 2,
        8 * t**3 - 12 * t,
        16 * t**4 - 48 * t**2 + 12,
    ][l]


def psi(l, u, z):
    w = W0 * np.sqrt(1 + z**2 / ZR**2)
    norm = 1.0 / math.sqrt(2**l * math.factorial(l))
    return norm * np.sqrt(W0 / w) * hermite_table(l, u * math.sqrt(2) / w) * np.exp(-u**2 / w**2)


def phase(m, n, x, y, z):
    return K * z - (m + n + 1) * np.arctan(z / ZR) + K * (x**2 + y**2) * z / (2 * (z**2 + ZR**2))


def field(m, n, x, y, z):
    return psi(m, x, z) ** 2 * psi(n, y, z) ** 2 * np.sin(phase(m, n, x, y, z)) ** 2


def sample_spheroid(rng, L, R, count):
    out = []
    have = 0
    while have < count:
        p = rng.uniform(-1, 1, size=(2 * (count - have) + 1000, 3))
        p = p[(p**2).sum(axis=1) <= 1]
        out.append(p)
        have += len(p)
    p = np.concatenate(out)[:count]
    return p[:, 0] * R, p[:, 1] * R, p[:, 2] * L


def mc_integral(m, n, L, R, x0, y0, count, seed, chunk=1_000_000):
    rng = np.random.default_rng(seed)
    s = 0.0
    s2 = 0.0
    done = 0
    while done < count:
        c = min(chunk, count - done)
        x, y, z = sample_spheroid(rng, L, R, c)
        f = field(m, n, x + x0, y + y0, z)
        s += f.sum()
        s2 += (f**2).sum()
        done += c
    mean = s / count
    var = s2 / count - mean**2
    vol = 4 * math.pi * R**2 * L / 3
    return mean * vol, math.sqrt(var / count) * vol


def ratio(a, b):
    (va, ea), (vb, eb) = a, b
    r = va / vb
    return r, r * math.hypot(ea / va, eb / vb)


if __name__ == "__main__":
    w = lambda z: W0 * math.sqrt(1 + z**2 / ZR**2)
    print("z_R", ZR)
    print("waist_at(336um)", w(336e-6))
    print("curvature_at(600um)", 600e-6 / (600e-6**2 + ZR**2))
    print("H4(0.7)", hermite_table(4, np.array(0.7)))
    print("phase(1,0,10um,0,300um)", phase(1, 0, 10e-6, 0.0, 300e-6))
    print("volume(21um,240um)", 4 * math.pi * 21e-6**2 * 240e-6 / 3)
    print("ions", 3.8e14 * 4 * math.pi * 21e-6**2 * 240e-6 / 3)
    print("kappa' MHz", 2.15 + 11.6**2 / 11.2)

    N = 10_000_000
    # needle crystal: normalized G00^2 at x0 = 37 um
    ref = mc_integral(0, 0, 240e-6, 21e-6, 0, 0, N, 1)
    at37 = mc_integral(0, 0, 240e-6, 21e-6, 37e-6, 0, N, 2)
    print("needle G00(37um)/G00(0)", ratio(at37, ref))
    # TEM10 displacement curve
    for a in [0, 10, 20, 25, 30, 40, 50]:
        v = mc_integral(1, 0, 240e-6, 21e-6, a * 1e-6, 0, N // 4, 100 + a)
        print("needle G10(x0=%d um)/G00(0)" % a, ratio(v, ref))
    # radius sweep convergence at R = 4 w0
    g00 = mc_integral(0, 0, 336e-6, 148e-6, 0, 0, N, 3)
    g10 = mc_integral(1, 0, 336e-6, 148e-6, 0, 0, N, 4)
    print("radius sweep G10/G00 at R=148um", ratio(g10, g00))
    # detuning-sweep crystal, R = 200 um
    g00 = mc_integral(0, 0, 600e-6, 200e-6, 0, 0, N, 5)
    g10 = mc_integral(1, 0, 600e-6, 200e-6, 0, 0, N, 6)
    print("detuning crystal I00", g00)
    print("detuning crystal G10/G00 (squared)", ratio(g10, g00))
