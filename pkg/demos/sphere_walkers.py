"""Walkers on the unit sphere carrying parallel-transported frames.

First a single noiseless walker is driven once around a latitude circle to
show the frame rotation picked up on a curved surface.  Then a cloud of
Brownian walkers spreads from the equator and its mean cos(distance) is
compared with the heat-kernel value exp(-D t).

    python3 demos/sphere_walkers.py
"""
import math

import numpy as np

from curvqhd import geometry as geo
from curvqhd import sde

chart = geo.Chart.sphere2(1.0, 32, 64)


def loop(x, t):
    # one revolution in phi per unit time
    u = np.zeros_like(x)
    u[:, 1] = 2 * np.pi
    return u


def still(x, t):
    return np.zeros_like(x)


for theta0 in (np.pi / 6, np.pi / 3, np.pi / 2):
    ens = sde.make_ensemble(chart, [[theta0, 0.0]], diffusion=0.0)
    ens = sde.advance(ens, loop, 1 / 2000, 2000, renormalize=False)
    e = ens.frames[0]
    angle = math.atan2(e[1, 0] * math.sin(theta0), e[0, 0])
    area = 2 * np.pi * (1 - math.cos(theta0))
    # rotation angles are only defined modulo 2 pi
    gap = math.remainder(angle - area, 2 * np.pi)
    print(f"theta0 = {theta0:.4f}  enclosed area {area:.6f}  rotation minus area (mod 2 pi) {gap:+.1e}")

N, D, dt = 20000, 1.0, 1e-3
x0 = np.tile([np.pi / 2, 0.0], (N, 1))
ens = sde.make_ensemble(chart, x0, diffusion=D, seed=1)
print("\n   t    <cos d>   exp(-D t)   max frame residual")
for block in range(5):
    ens = sde.advance(ens, still, dt, 40)
    cosd = np.cos(sde.geodesic_distance(chart, x0, ens.positions))
    res = sde.frame_residual(chart, ens.positions, ens.frames).max()
    print(f"{ens.t:5.2f}  {cosd.mean():.5f}   {math.exp(-D * ens.t):.5f}     {res:.1e}")
