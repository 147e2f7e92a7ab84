"""Simulation and closed-form analysis of the penalised two-armed bandit."""
