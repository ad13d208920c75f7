"""Cost engine for universal 4G broadband investment estimation.

Pipeline: tabular inputs -> density deciles -> traffic demand -> network
dimensioning against Monte Carlo capacity lookups -> capex/opex/fiber/
satellite cost roll-up per country, with scenario sweeps.
"""

__version__ = "0.1.0"
