# SPDX-License-Identifier: Apache-2.0
"""Python front end for the qgen C++ core."""

import json
import os

from ._qgen import (
    QgenError,
    ablate,
    build_eval_set,
    cohen_kappa,
    fleiss_kappa,
    screen,
)
from . import _qgen

__all__ = [
    "QgenError",
    "ablate",
    "agreement_report",
    "build_eval_set",
    "cohen_kappa",
    "fleiss_kappa",
    "run_pipeline",
    "screen",
    "summarize_bank",
]


def run_pipeline(config, objectives, out_bank):
    """Run generate, filter, confide and align; return the stage summary."""
    return json.loads(_qgen.run_pipeline(os.fspath(config), os.fspath(objectives), os.fspath(out_bank)))


def summarize_bank(bank):
    return json.loads(_qgen.summarize_bank(os.fspath(bank)))


def agreement_report(records, machines=(), field="answer"):
    """Agreement report over one or more judgment record files."""
    if isinstance(records, (str, os.PathLike)):
        records = [records]
    return json.loads(_qgen.agreement_report([os.fspath(r) for r in records], list(machines), field))
