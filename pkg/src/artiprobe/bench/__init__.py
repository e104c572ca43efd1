"""Procedural benchmark scenes, baselines, metrics, experiment runner, CLI."""
