"""
CLI commands. Each module exposes `main(config: RunConfig)`.
"""
