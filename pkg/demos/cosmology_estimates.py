"""Order-of-magnitude estimates for the homogeneous quantum-curvature term.

Prints alpha, the matter-density drift and Lambda_QC for hydrogen and for
the electron over a few Hubble rates, with the critical energy density
standing in for eps + P.

    python3 demos/cosmology_estimates.py
"""
from curvqhd import cosmo

print("units:", cosmo.check_dimensions())
print(f"{'particle':9s} {'H0 [1/s]':>9s} {'alpha':>10s} {'d0 rho_M':>11s} {'Lambda_QC':>11s} {'/Lambda':>9s}")
for label, mass in (("hydrogen", cosmo.HYDROGEN_MASS), ("electron", 9.109e-31)):
    for H0 in (2.18e-18, 2.2e-18, 2.3e-18):
        row = cosmo.evaluate(cosmo.CosmologyParams(H0=H0, M=mass, Omega_m=0.1))
        print(f"{label:9s} {H0:9.3g} {row.alpha:10.3e} {row.drho:11.3e} {row.lambda_qc_energy:11.3e} "
              f"{row.ratio_to_lambda:9.2e}")

p = cosmo.CosmologyParams()
lam = cosmo.lambda_qc_from_energy(p)
print(f"\npressure shift at the default point: {cosmo.pressure_shift(p, lam):.3e} J/m^3")
print("a region whose density grows (d0 rho_M = +1e-50 kg/m^4) gets Lambda_QC =",
      f"{cosmo.lambda_qc_from_drho(p, 1e-50):.3e} 1/m^2")
