"""Run the command line with `python -m meltrec`."""

from __future__ import annotations

from meltrec.cli import main

if __name__ == "__main__":
    main()
