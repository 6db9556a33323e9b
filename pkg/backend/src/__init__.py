"""
ScopeStack: a recursive, scope-isolated Bundle Protocol stack.
"""

__version__ = "0.1.0"
