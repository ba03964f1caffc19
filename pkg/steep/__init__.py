"""
Nekhoroshev steepness certifier
"""
__version__ = '1.0.0'
