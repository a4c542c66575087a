"""Token/phase-level model of PCHB-based QDI routing processes."""

from .channel import DualRailChannel, Phase, Rail, Violation, decode, encode
from .processes import Buffer, Merge, Process, ProcessKind, Sink, Source, Split
from .system import (
    Adversary,
    ConformanceReport,
    DeadlockError,
    DelayModel,
    Fabric,
    NOMINAL_DELAY_PS,
    merge_tree_description,
    pipeline_description,
    qdi_conformance,
    split_tree_description,
    throughput,
)
