"""Goal-conditioned deformation of stored root motions.

Every adapter turns a planned root path into a stored root motion and later
deforms that motion so it ends at a requested joint goal. None of them looks
at obstacles; the library verifies the result offline.
"""

from __future__ import annotations

from .base import AdaptationError, Adapter, DmpWeights, RawPath, RootMotion
from .dmp import DmpAdapter, DmpOpts, dmp_adapt, dmp_fit, dmp_rollout
from .full import FullAdapter
from .li import LiAdapter, LiOpts, li_adapt, li_continuity_check
from .qp import QpOptions, QpResult, QpWorkspace, qp_solve
from .sto import StoAdapter, StoOpts, sto_adapt, sto_objective, sto_solve

ADAPTERS = {"li": LiAdapter, "dmp": DmpAdapter, "sto": StoAdapter, "full": FullAdapter}


def make_adapter(name: str, **options) -> Adapter:
    """Adapter by id (``li``, ``dmp``, ``sto``, ``full``), with option overrides."""
    try:
        cls = ADAPTERS[name]
    except KeyError:
        raise ValueError(f"unknown adapter {name!r}; choose from {sorted(ADAPTERS)}") from None
    return cls.from_options(options)


__all__ = [
    "ADAPTERS",
    "AdaptationError",
    "Adapter",
    "DmpAdapter",
    "DmpOpts",
    "DmpWeights",
    "FullAdapter",
    "LiAdapter",
    "LiOpts",
    "QpOptions",
    "QpResult",
    "QpWorkspace",
    "RawPath",
    "RootMotion",
    "StoAdapter",
    "StoOpts",
    "dmp_adapt",
    "dmp_fit",
    "dmp_rollout",
    "li_adapt",
    "li_continuity_check",
    "make_adapter",
    "qp_solve",
    "sto_adapt",
    "sto_objective",
    "sto_solve",
]
