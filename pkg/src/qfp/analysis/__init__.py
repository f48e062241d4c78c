"""Experiments on simulated circuits: logic checks, margins, energy, latency limits, EDP."""
