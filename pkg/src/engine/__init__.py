"""Best-response dynamics and congestion pricing."""

from .best_response import (
    GameKind,
    IterationState,
    RegulatedSelfish,
    SocialIteration,
    best_response_regulated,
    best_response_social,
    regulated_response_curve,
    run_gauss_seidel,
    social_response_curve,
)
from .pricing import PricedOutcome, personalized_prices, solve_priced_equilibrium, uniform_price
