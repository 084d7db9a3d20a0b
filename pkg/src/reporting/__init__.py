"""
Result writers and plot emitters
"""
