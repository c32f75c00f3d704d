"""Physical constants shared across the package (SI units)."""

EARTH_RADIUS = 6.371e6  # m, spherical Earth
EARTH_MU = 3.986e14  # m^3/s^2
SPEED_OF_LIGHT = 2.998e8  # m/s
BOLTZMANN = 1.38e-23  # J/K
