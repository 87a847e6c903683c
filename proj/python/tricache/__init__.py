"""Python access to the tricache engine."""

import json

from . import _core
from ._core import (
    TricacheError,
    adjusted_rand_index,
    dbscan,
    ece,
    entropy_route,
    frechet_diag,
    metrics,
    run_cli,
)

__all__ = [
    "TricacheError",
    "adjusted_rand_index",
    "build_prototypes",
    "dbscan",
    "ece",
    "entropy_route",
    "frechet_diag",
    "metrics",
    "run_cli",
    "run_pipeline",
    "synth_generate",
]


def synth_generate(out, **config):
    """Write a synthetic benchmark tree under `out`; keyword names follow SynthConfig."""
    return json.loads(_core.synth_generate(str(out), json.dumps(config)))


def build_prototypes(manifest, out, extractor="dbscan", seed=0, jobs=1):
    return json.loads(_core.build_prototypes(str(manifest), str(out), extractor, seed, jobs))


def run_pipeline(manifest, anchors, protos=None, top_m=3, jobs=1, **engine):
    """Adapt every target subject and return the evaluation report as a dict.

    Engine options use the keys of the engine config echo, e.g.
    cache_variant="dynamic" or tau_h_pos=0.4.
    """
    report = _core.run_pipeline(
        str(manifest),
        str(anchors),
        None if protos is None else str(protos),
        json.dumps(engine),
        top_m,
        jobs,
    )
    return json.loads(report)
