"""
Potential and projected phase-space density
===========================================

A step density gives a closed-form potential. A step DF in energy, projected
along the line of sight and over the unseen velocities, gives the density of
a tracer in the observable (x1, x2, v3) space.
"""

import numpy as np

from darkmass import EnergyGrid, PotentialProfile, RadialGrid, potential
from darkmass.projection import dos_weights, project_pdf_unnorm

# A uniform sphere first: phi(0) = 2 pi G rho R^2, Keplerian outside.
sphere = PotentialProfile([1.0], RadialGrid([0.0, 1.0]))
print("uniform sphere phi(0), phi(1), phi(2):", potential(sphere, np.array([0.0, 1.0, 2.0])))
print("closed form:                         ", [2 * np.pi, 4 * np.pi / 3, 2 * np.pi / 3])

# Three declining density steps.
profile = PotentialProfile([2.0, 0.8, 0.3], RadialGrid([0.0, 0.7, 1.5, 2.4]))
r = np.linspace(0.0, 4.0, 9)
for ri, phi in zip(r, potential(profile, r)):
    print(f"r = {ri:4.1f}   phi = {phi:7.4f}   M(<r) = {profile.mass(ri):7.4f}")

# A four-bin DF. The top edge sits at E = 0, the bottom near the potential floor.
egrid = EnergyGrid([-1.05 * profile.phi0, -4.0, -2.0, -0.7, 0.0])
f = np.array([3.0, 1.5, 0.6, 0.2])

# nu(rp, v3) is linear in f; dividing by w . f normalises it over the region.
w = dos_weights(profile, egrid)
norm = w @ f
print("\nphase-space volume per energy bin:", w)
for rp, v3 in [(0.0, 0.0), (0.5, 1.0), (1.2, 0.5), (2.0, 0.2)]:
    nu = project_pdf_unnorm(profile, f, egrid, profile.grid, rp, v3) / norm
    print(f"nu(rp = {rp:.1f}, v3 = {v3:.1f}) = {nu:.5f}")

# Faster tracers are rarer: along a fixed rp, nu falls with |v3| and
# vanishes at the local escape speed.
v_esc = np.sqrt(2 * potential(profile, 0.5))
v3 = np.linspace(0.0, v_esc, 6)
print("\nnu along rp = 0.5:", np.round(project_pdf_unnorm(profile, f, egrid, profile.grid, np.full(6, 0.5), v3) / norm, 5))
