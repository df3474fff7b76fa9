"""Physical constants (CODATA 2018, via scipy.constants).

Every derived number in the package goes through this table.
"""

from scipy import constants as _c

HBAR = _c.hbar
ELEMENTARY_CHARGE = _c.e
EPSILON_0 = _c.epsilon_0
ATOMIC_MASS = _c.atomic_mass
K_B = _c.k

TWO_PI = 2.0 * _c.pi
