"""Erasure coding over neural networks.

Thin re-export of the native ``_coin`` extension plus a few helpers that
take config dictionaries instead of JSON strings.
"""

import json as _json

from ._coin import *  # noqa: F401,F403
from ._coin import (
    MissingArtifact,
    ValidationError,
    code as _code,
    config_hash as _config_hash,
    evaluate as _evaluate,
    report as _report,
    simulate as _simulate,
    train_experts as _train_experts,
)


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def train_experts(config, output_dir=""):
    _train_experts(_text(config), str(output_dir))


def code(config, method, output_dir=""):
    _code(_text(config), method, str(output_dir))


def evaluate(config, output_dir=""):
    return _evaluate(_text(config), str(output_dir))


def simulate(config, output_dir=""):
    return _simulate(_text(config), str(output_dir))


def report(config, output_dir=""):
    _report(_text(config), str(output_dir))


def config_hash(config):
    return _config_hash(_text(config))
