from .detectors import DetectorOptions, Detectors
from .executor import EngineError, Executor, analyze
from .report import Finding, ReportSet, merge_findings
from .state import Budget, ExecState, SymbolTable, ThreadContext

__all__ = [
    "Budget",
    "DetectorOptions",
    "Detectors",
    "EngineError",
    "ExecState",
    "Executor",
    "Finding",
    "ReportSet",
    "SymbolTable",
    "ThreadContext",
    "analyze",
    "merge_findings",
]
