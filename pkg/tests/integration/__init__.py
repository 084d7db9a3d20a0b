"""
Monte Carlo acceptance tests. They are marked slow and only run with
pytest --runslow.
"""
