"""Level crossing rate and average fade duration of the N*Rayleigh
(cascaded amplify-and-forward) fading channel."""

from nrayleigh.analytic import (
    QuadratureConfig,
    afd,
    afd_approx,
    cdf_product,
    laplace_internals,
    lcr_approx,
    lcr_exact,
    lcr_exact_mc,
    multihop_lcr_approx,
)
from nrayleigh.model import (
    DopplerSpec,
    FixedGain,
    HopSpec,
    ProductParams,
    SemiBlindGain,
    UnitGain,
    cascade_to_product,
    hops_from_stations,
)

__version__ = "0.1.0"
