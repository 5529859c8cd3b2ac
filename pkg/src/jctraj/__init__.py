"""Monte Carlo wavefunction simulation of a driven, damped Jaynes-Cummings system."""
