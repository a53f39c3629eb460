"""Option pricing under subdiffusive (inverse-subordinated) Black-Scholes and Bachelier models."""

from .classical_pricing import (
    AMERICAN_PUT,
    EURO_CALL,
    EURO_PUT,
    LOOKBACK_FLOAT_CALL,
    MarketParams,
    OptionKind,
    OptionSpec,
    TreeConfig,
    bachelier_call,
    bs_call,
    bs_put,
    crr_price,
    lookback_call_closed,
)
from .errors import (
    CalibrationError,
    PdeInstabilityError,
    PricerError,
    RegimeError,
    ResourceError,
    UnsupportedOptionError,
)
from .fractional_pde import PdeGrid, PdeSolution, solve_frac_bachelier_call, solve_frac_bs_call
from .sub_pricing import (
    HorizonSampleSet,
    MCConfig,
    PriceEstimate,
    draw_horizons,
    price_european_closed,
    price_lookback_path_mc,
    price_lookback_subordinated_closed,
    price_subordinated,
    price_subordinated_crr,
    bachelier_bs_gap,
)
from .subordinator import (
    Family,
    LaplaceExponentSpec,
    RngStream,
    inverse_moment,
    sample_inverse_at,
    sample_inverse_path,
    sample_subordinator_path,
)

__version__ = "0.1.0"
