"""
biodelay CLI Package

Batch command-line front end: fit, stability, regions and simulate.
"""
