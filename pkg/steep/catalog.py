"""
Reference functions with known steepness behaviour at the origin.
"""
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Tuple

from steep.polyjet import Polynomial, parse_polynomial


@dataclass(frozen=True)
class ReferenceFunction:
    name: str
    n: int
    text: str
    description: str

    @property
    def origin(self) -> Tuple[int, ...]:
        return (0,) * self.n

    def polynomial(self) -> Polynomial:
        return parse_polynomial(self.text, self.n)


FOUR_VARIABLE = ReferenceFunction(
    name='example1',
    n=4,
    text="I2^5/5 + I1^3/3 - I1^2/2 + I1*I2/2 - I3^2/2 - I4",
    description="steep at 0 although three- and four-jet degenerate along e2",
)

FIVE_VARIABLE = ReferenceFunction(
    name='example2',
    n=5,
    text="I4^4/4 + I5^4/4 + I3^3/3 + I3*I2^2/2 - I1^2/2 - I3^2/2 - I5^2/2 + I3*I4 + I2",
    description="steep at 0 although two-jet degenerate on a cone and three-jet degenerate along e4",
)

# Limit of the 'b' family below; weakly convex at 0 but every Psi*_2(3) equation vanishes
WEAKLY_CONVEX_LIMIT = ReferenceFunction(
    name='example3-limit',
    n=3,
    text="(I1^4 + I2^4)/16 + I3",
    description="limit of the Psi_2(3) family; fails the three-variable sufficient condition",
)


@dataclass(frozen=True)
class FamilyMember:
    """A member h_k of a family lying in Psi_2(3) at 0, with its witness data."""
    function: ReferenceFunction
    k: int
    u: Tuple[int, ...]
    v: Tuple[int, ...]
    alpha: Fraction
    beta: Fraction

    @property
    def params(self) -> Dict[str, Fraction]:
        return {'alpha': self.alpha, 'beta': self.beta}


FAMILIES = ('a', 'b')


def psi2_family(k: int, variant: str = 'a') -> FamilyMember:
    """
    Member k of a sequence of three-variable jets inside Psi_2(3) at the origin.

    Variant 'a' pairs with alpha = k/2, beta = k^2/2; variant 'b' pairs with
    alpha = k/4, beta = 0 and converges to ``WEAKLY_CONVEX_LIMIT`` as k grows.
    Both use u = e2, v = e1.

    Raises:
        ValueError: If k < 1 or the variant is unknown
    """
    if k < 1:
        raise ValueError(f"family index must be positive, got {k}")
    if variant == 'a':
        text = (f"(I1^4 + I2^4)/8 - I1^3*I2/2 - I3^4/{24 * k} - I1^2*I2/{2 * k}"
                f" + I2^2/{2 * k * k} + I3")
        alpha, beta = Fraction(k, 2), Fraction(k * k, 2)
    elif variant == 'b':
        text = f"(I1^4 + I2^4)/16 - I3^4/{24 * k} - I1^2*I2/{2 * k} + I2^2/{k * k} + I3"
        alpha, beta = Fraction(k, 4), Fraction(0)
    else:
        raise ValueError(f"unknown family {variant!r}; expected one of {FAMILIES}")
    function = ReferenceFunction(f"example3{variant}-k{k}", 3, text,
                                 f"member k={k} of family {variant}")
    return FamilyMember(function, k, u=(0, 1, 0), v=(1, 0, 0), alpha=alpha, beta=beta)
