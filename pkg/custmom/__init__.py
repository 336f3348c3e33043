"""
# custmom

Customer-momentum research engine: linked-firm signals, quantile portfolio
sorts, 2x3 factors and the Newey-West / Fama-MacBeth / spanning regression
battery, runnable on user panels or on seeded synthetic markets.
"""
__version__ = "0.1.0"
