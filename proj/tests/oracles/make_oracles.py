#!/usr/bin/env python3
"""Reference values for the unit tests, computed with numpy by independent routes.

Writes frozen_oracles.hpp next to this file. Re-run only when an oracle
definition changes; the header is checked in so the tests do not need Python.
"""

import math
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).with_name("frozen_oracles.hpp")
rng = np.random.default_rng(20240611)


def lit(x):
    return repr(float(x))


def vec(name, v):
    return f"inline constexpr double {name}[] = {{{', '.join(lit(x) for x in np.ravel(v))}}};\n"


def cma_constants(n, k):
    mu = k // 2
    w = np.array([math.log(mu + 0.5) - math.log(i) for i in range(1, mu + 1)])
    w /= w.sum()
    mu_eff = 1.0 / np.sum(w ** 2)
    c_sigma = (mu_eff + 2) / (n + mu_eff + 5)
    d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (n + 1)) - 1) + c_sigma
    c_c = (4 + mu_eff / n) / (n + 4 + 2 * mu_eff / n)
    c_1 = 2 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((n + 2) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
    return w, [mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n]


def cross_entropy(logits, y):
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    return float(np.mean(-np.log(np.maximum((p * y).sum(axis=1), 1e-12))))


def ridge_primal(h, y, gamma):
    m = h.shape[1]
    return np.linalg.solve(h.T @ h + gamma * np.eye(m), h.T @ y)


parts = ["#pragma once\n\n// Generated by make_oracles.py. Do not edit.\n\nnamespace foro::oracle {\n\n"]

# CMA-ES default constants
for n, k in [(4, 6), (10, 10), (48, 4)]:
    w, c = cma_constants(n, k)
    parts.append(vec(f"kCmaWeights_n{n}_k{k}", w))
    parts.append(vec(f"kCmaConstants_n{n}_k{k}", c))
parts.append("// order: mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n\n\n")

# Cross-entropy on a random 8 x 3 case
logits = rng.normal(size=(8, 3)) * 2.0
labels = rng.integers(0, 3, size=8)
y = np.eye(3)[labels]
parts.append(vec("kCeLogits", logits))
parts.append(vec("kCeLabels", y))
parts.append(f"inline constexpr double kCeExpected = {lit(cross_entropy(logits, y))};\n\n")

# Ridge head: in-sample fitted values and leave-one-out predictions by explicit refits
n, m, c, gamma = 7, 12, 3, 0.1
h = rng.normal(size=(n, m))
y = np.eye(c)[rng.integers(0, c, size=n)]
fitted = h @ ridge_primal(h, y, gamma)
loo = np.zeros_like(y)
for i in range(n):
    keep = np.arange(n) != i
    loo[i] = h[i] @ ridge_primal(h[keep], y[keep], gamma)
parts.append(f"inline constexpr int kRidgeN = {n}, kRidgeM = {m}, kRidgeC = {c};\n")
parts.append(f"inline constexpr double kRidgeGamma = {lit(gamma)};\n")
parts.append(vec("kRidgeH", h))
parts.append(vec("kRidgeY", y))
parts.append(vec("kRidgeInSample", fitted))
parts.append(vec("kRidgeLoo", loo))
parts.append("\n")

# KEM after two batches against the direct inverse, and the ridge weights
m, gamma = 5, 0.5
x1 = rng.normal(size=(3, m))
x2 = rng.normal(size=(4, m))
l1 = rng.integers(0, 2, size=3)
l2 = rng.integers(2, 4, size=4)
x = np.vstack([x1, x2])
r = np.linalg.inv(x.T @ x + gamma * np.eye(m))
y_all = np.eye(4)[np.concatenate([l1, l2])]
w = r @ x.T @ y_all
parts.append(f"inline constexpr int kKemM = {m};\ninline constexpr double kKemGamma = {lit(gamma)};\n")
parts.append(vec("kKemX1", x1))
parts.append(vec("kKemX2", x2))
parts.append(f"inline constexpr unsigned kKemL1[] = {{{', '.join(str(int(v)) for v in l1)}}};\n")
parts.append(f"inline constexpr unsigned kKemL2[] = {{{', '.join(str(int(v)) for v in l2)}}};\n")
parts.append(vec("kKemR", r))
parts.append(vec("kKemW", w))
parts.append("\n")

# Layer statistics: population mean and std of a 5 x 4 block
rows = rng.normal(size=(5, 4))
parts.append(vec("kStatsRows", rows))
parts.append(vec("kStatsMean", rows.mean(axis=0)))
parts.append(vec("kStatsStd", rows.std(axis=0)))

# Seeded generator: mt19937_64 and the Box-Muller pairing used by foro::Rng
class MT64:
    def __init__(self, seed):
        self.mt = [0] * 312
        self.mt[0] = seed & 0xFFFFFFFFFFFFFFFF
        for i in range(1, 312):
            prev = self.mt[i - 1]
            self.mt[i] = (6364136223846793005 * (prev ^ (prev >> 62)) + i) & 0xFFFFFFFFFFFFFFFF
        self.idx = 312
        self.spare = None

    def next(self):
        if self.idx >= 312:
            for i in range(312):
                x = (self.mt[i] & 0xFFFFFFFF80000000) | (self.mt[(i + 1) % 312] & 0x7FFFFFFF)
                xa = x >> 1
                if x & 1:
                    xa ^= 0xB5026F5AA96619E9
                self.mt[i] = self.mt[(i + 156) % 312] ^ xa
            self.idx = 0
        y = self.mt[self.idx]
        self.idx += 1
        y ^= (y >> 29) & 0x5555555555555555
        y ^= (y << 17) & 0x71D67FFFEDA60000
        y ^= (y << 37) & 0xFFF7EEE000000000
        y ^= y >> 43
        return y & 0xFFFFFFFFFFFFFFFF

    def uniform(self):
        return (self.next() >> 11) * 2.0 ** -53

    def normal(self):
        if self.spare is not None:
            v, self.spare = self.spare, None
            return v
        u1 = 0.0
        while u1 <= 0.0:
            u1 = self.uniform()
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        angle = 2.0 * 3.14159265358979323846 * u2
        self.spare = radius * math.sin(angle)
        return radius * math.cos(angle)


g = MT64(5489)
parts.append(f"inline constexpr unsigned long long kMt64Seed5489First = {g.next()}ULL;\n")
g = MT64(2024)
parts.append(vec("kRngNormalsSeed2024", [g.normal() for _ in range(7)]))
parts.append("\n")


# Surrogate backbone forward: default desk shape, seed 42
def gaussian(gen, rows, cols, fan_in):
    return np.array([gen.normal() for _ in range(rows * cols)]).reshape(rows, cols) / math.sqrt(fan_in)


def layer_norm(x):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + 1e-5)


def backbone_forward(seed, layers, d, m, heads, hidden, prompts, patches):
    gen = MT64(seed)
    cls = gaussian(gen, 1, d, 1.0)
    pos = gaussian(gen, m, d, 1.0)
    blocks = []
    for _ in range(layers):
        blocks.append([gaussian(gen, d, d, d) for _ in range(4)] + [gaussian(gen, d, hidden, d), gaussian(gen, hidden, d, hidden)])
    x = np.vstack([cls, prompts, patches + pos])
    hd = d // heads
    trace = []
    for wq, wk, wv, wo, w1, w2 in blocks:
        y = layer_norm(x)
        q, k, v = y @ wq, y @ wk, y @ wv
        att = np.zeros_like(x)
        for h in range(heads):
            sl = slice(h * hd, (h + 1) * hd)
            s = q[:, sl] @ k[:, sl].T / math.sqrt(hd)
            s = np.exp(s - s.max(axis=1, keepdims=True))
            s /= s.sum(axis=1, keepdims=True)
            att[:, sl] = s @ v[:, sl]
        x = x + att @ wo
        x = x + np.tanh(layer_norm(x) @ w1) @ w2
        trace.append(x[0].copy())
    return np.array(trace)


bb_prompts = rng.normal(size=(2, 16))
bb_patches = rng.normal(size=(8, 16)) * 2.0
trace = backbone_forward(42, 4, 16, 8, 2, 32, bb_prompts, bb_patches)
parts.append(vec("kBackbonePrompts", bb_prompts))
parts.append(vec("kBackbonePatches", bb_patches))
parts.append(vec("kBackboneClsPerLayer", trace))
trace0 = backbone_forward(42, 4, 16, 8, 2, 32, np.zeros((0, 16)), bb_patches)
parts.append(vec("kBackboneClsNoPrompt", trace0[-1]))

parts.append("\n}  // namespace foro::oracle\n")
OUT.write_text("".join(parts))
print(f"wrote {OUT}")
