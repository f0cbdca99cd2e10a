"""Python bindings for the defectsim C++ library."""

import json

from ._core import *  # noqa: F401,F403
from ._core import Trace


def trace_dict(trace: Trace) -> dict:
    """The trace as plain Python data (same layout as trace.json)."""
    return json.loads(trace.to_json())
