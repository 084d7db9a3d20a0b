"""
Environment-aware metrics and exact enumeration oracles
"""
