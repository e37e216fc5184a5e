"""
Entry point for running fgwise as a module.
"""

from fgwise.cli import main

if __name__ == "__main__":
    main()
