"""
septoskill CLI

Command-line tools over the septoskill pipeline.

Usage:
    python -m cli.main features bundles/* -o out/
    python -m cli.main classify out/features.csv -s out/strokes.csv
"""
