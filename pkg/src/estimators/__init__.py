"""
Average treatment effect estimators
"""
