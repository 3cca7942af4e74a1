"""skewlab: exact-arithmetic skew products over badly approximable rotations."""

from skewlab.qfield import (
    QReal,
    Convergent,
    CFExpansion,
    make_qreal,
    compare,
    frac_multiple,
    continued_fraction,
    convergents,
    badly_approximable_constant,
    rotation_hit_count,
    decimal_str,
)

__version__ = "0.1.0"

DEFAULT_ALPHA = make_qreal(-2, 1, 1, 1, 5)  # sqrt(5) - 2, CF [0; 4, 4, 4, ...]
