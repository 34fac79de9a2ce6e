"""Simulation of sup-normalized spectral vectors of Brown-Resnick processes."""
