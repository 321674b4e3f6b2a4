"""Penalized variable selection for Weibull scale/shape survival regression."""
