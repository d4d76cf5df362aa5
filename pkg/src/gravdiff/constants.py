"""Physical constants (CODATA 2018 / exact SI values).

These are the defaults used whenever a setup does not override them; kB and
hbar are exact in the 2019 SI, G is the CODATA 2018 recommended value.
"""

G_NEWTON = 6.67430e-11      # gravitational constant [m^3 kg^-1 s^-2]
HBAR = 1.054571817e-34      # reduced Planck constant [J s]
KB = 1.380649e-23           # Boltzmann constant [J/K] (exact)

OSMIUM_DENSITY = 2.26e4     # densest solid element [kg/m^3]
