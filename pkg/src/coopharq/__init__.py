"""Analytical and Monte Carlo toolkit for relay-assisted HARQ-IR links
over time-correlated Nakagami-m fading."""

__version__ = "0.1.0"
