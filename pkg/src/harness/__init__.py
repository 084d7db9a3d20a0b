"""
Monte Carlo harness: seeding, batch simulation and grid execution
"""
