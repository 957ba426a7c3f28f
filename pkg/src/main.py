"""
uae-minmax - command-line entry point.

Configures logging from the environment settings and dispatches to the
subcommands in `src.cli`.
"""
from src.cli import main, run_command

__all__ = ["main", "run_command"]

if __name__ == "__main__":
    main()
