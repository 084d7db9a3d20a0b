"""
Allocation policies: OPTrack, clipping baselines and Neyman oracles
"""
