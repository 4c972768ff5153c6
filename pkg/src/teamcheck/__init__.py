"""Team-oriented consistency checking of engineering artifacts stored as
incremental property changes in hierarchical work areas."""

from .engine import CRD, CRE, AccessTally, Engine, Feedback
from .store import (
    PUBLIC, Change, ChangeEvent, FieldDecl, Group, Ref, ResolvedValue, Store,
    StoreError, TypeDecl, WorkArea,
)

__version__ = "0.1.0"

__all__ = [
    "AccessTally", "CRD", "CRE", "Change", "ChangeEvent", "Engine", "Feedback",
    "FieldDecl", "Group", "PUBLIC", "Ref", "ResolvedValue", "Store", "StoreError",
    "TypeDecl", "WorkArea",
]
