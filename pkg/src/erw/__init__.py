"""Elephant random walks with step reinforcement and time-dependent bias."""
