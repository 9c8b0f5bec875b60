#!/usr/bin/env python
from sievelab.cli import app

if __name__ == "__main__":
    app()
