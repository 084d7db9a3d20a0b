"""
Confidence sequences for arm standard deviations and the Neyman allocation
"""
