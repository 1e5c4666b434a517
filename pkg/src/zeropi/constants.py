"""Physical constants (SI, CODATA 2018 exact values where defined)."""

import math

h = 6.62607015e-34
hbar = h / (2 * math.pi)
e = 1.602176634e-19
k_B = 1.380649e-23
Phi0 = h / (2 * e)

#: Boltzmann constant over Planck constant, in GHz per kelvin.
KB_OVER_H_GHZ = k_B / h * 1e-9

#: Multiply an energy E/h in GHz by this to get an angular frequency in rad/s.
GHZ_TO_RAD_S = 2 * math.pi * 1e9


def ghz_to_rad_s(value):
    return value * GHZ_TO_RAD_S


def rad_s_to_ghz(value):
    return value / GHZ_TO_RAD_S
