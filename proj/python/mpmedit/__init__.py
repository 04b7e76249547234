"""Material fields, volumetric fill, MPM simulation and trajectory tools."""

import json

from ._core import (
    Error,
    assignment_loss,
    decode_field,
    derive_moduli,
    fill_interior,
    load_trajectory,
    ramp_value,
    rasterize,
    soft_assign,
    task_loss,
    verify,
    wave_speeds,
)
from ._core import _run

__all__ = [
    "Error",
    "analyze",
    "assignment_loss",
    "decode_field",
    "derive_moduli",
    "fill",
    "fill_interior",
    "load_trajectory",
    "ramp_value",
    "rasterize",
    "simulate",
    "soft_assign",
    "task_loss",
    "verify",
    "wave_speeds",
]


def _call(command, input, output="", **options):
    opts = {}
    for key, value in options.items():
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        opts[key] = str(value)
    rc, out, err = _run(command, str(input), str(output), opts)
    if rc != 0:
        record = json.loads(err)
        exc = Error(f"{record['error']}: {record['message']}")
        exc.code = record["code"]
        exc.name = record["error"]
        raise exc
    return json.loads(out) if out.strip() else {}


def fill(input, output, spacing, **options):
    """Fill a surface field file and write the solid field. Returns the fill report."""
    return _call("fill", input, output, spacing=spacing, **options)


def simulate(scene, output, **options):
    """Run a scene file and export its trajectory into `output`. Returns the run summary."""
    return _call("simulate", scene, output, **options)


def analyze(fixture, **options):
    """Loss values and gradient checks for a labelled fixture file."""
    return _call("analyze", fixture, **options)
