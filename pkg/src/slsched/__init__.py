"""Sidelink band-allocation simulator with a from-scratch DDQN scheduler.

Modules
-------
channel      path loss, Rician fading, Shannon-rate link budgets
traffic      Poisson arrivals and a finite FIFO packet buffer
coexistence  Wi-Fi occupancy chain, listen-before-talk gate, idle estimator
env          the decision-epoch environment tying the pieces together
nn           plain-numpy MLP with manual backprop and Adam
agent        replay buffer, epsilon schedules, double-Q learning steps
baselines    threshold and uniform-random reference policies
harness      experiment specs, training/evaluation runners, CSV outputs
cli          command-line entry point
"""

__version__ = "0.1.0"

from .env import Action, EnvConfig, SidelinkEnv

__all__ = ["Action", "EnvConfig", "SidelinkEnv", "__version__"]
