"""
Main entry point for the offloading pricing demo.

Solves the default homogeneous scenario in closed form, confirms the pricing
result with best-response dynamics and prints the headline numbers.
"""

import logging
import sys

from .config.settings import settings
from .engine.best_response import RegulatedSelfish, SocialIteration, run_gauss_seidel
from .equilibrium.homogeneous import (
    HomogeneousScenario,
    optimal_price_homogeneous,
    solve_ne_homogeneous,
    solve_se_homogeneous,
)
from .experiments.scenario import DEFAULT_PROFILE
from .model.costs import profit
from .model.exceptions import OffloadingError
from .model.parameters import SystemConfig

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.log_level),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)

DEMO_USERS = 100


def main():
    """Closed-form equilibria, optimal price and best-response confirmation for 100 users."""
    logger.info("Starting offloading pricing demo")

    try:
        cfg = SystemConfig(n_users=DEMO_USERS)
        s = HomogeneousScenario(n_users=DEMO_USERS, profile=DEFAULT_PROFILE, cfg=cfg)
        users = s.users()

        print("=" * 60)
        print("Offloading on a shared edge server - pricing demo")
        print("=" * 60)

        ne = solve_ne_homogeneous(s)
        se = solve_se_homogeneous(s)
        price = optimal_price_homogeneous(s)
        print(f"Users: {DEMO_USERS}, SNR {DEFAULT_PROFILE.rho}, edge rate {cfg.mu_B:g} jobs/s")
        print(f"Nash equilibrium frequency:   {ne.mean_x:.6f}")
        print(f"Social equilibrium frequency: {se.mean_x:.6f}")
        print(f"Optimal unit price:           {price:.6f}")

        p_ne = profit(0, ne.x_star, users, cfg)[0]
        p_se = profit(0, se.x_star, users, cfg)[0]
        print(f"Per-user profit NE / SE:      {p_ne:.6f} / {p_se:.6f} (ratio {p_se / p_ne:.4f})")
        print()

        priced = run_gauss_seidel(users, cfg, RegulatedSelfish(price))
        social = run_gauss_seidel(users, cfg, SocialIteration())
        print(f"✓ Priced best response: {priced.sweeps} sweeps -> {priced.mean_x:.6f}")
        print(f"✓ Social iteration:     {social.sweeps} sweeps -> {social.mean_x:.6f}")

        print()
        print("For experiments, run: python -m src.cli --help")

    except OffloadingError as e:
        logger.error(f"Demo failed: {e}")
        print(f"Error: {e}")
        return 1

    return 0


if __name__ == "__main__":
    sys.exit(main())
