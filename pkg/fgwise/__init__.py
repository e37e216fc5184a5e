"""
fgwise - truncated Fefferman-Graham expansions of asymptotically de Sitter Einstein metrics.
"""

__version__ = "0.1.0"
