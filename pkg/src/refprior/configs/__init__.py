"""Shipped run configs (JSON), loadable with ``refprior.cli.builtin_config``."""
