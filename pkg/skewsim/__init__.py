"""skewsim - skew Brownian motion with two semipermeable barriers"""

__version__ = '0.1.0'
