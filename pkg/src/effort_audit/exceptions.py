"""Exception hierarchy shared by the audit modules."""


class AuditError(Exception):
    """Base class for all errors raised by :mod:`effort_audit`."""


class SchemaError(AuditError, KeyError):
    """A column, node or feature is missing or does not match the schema."""

    def __str__(self):
        return Exception.__str__(self)


class GraphError(AuditError, ValueError):
    """The causal graph is malformed (cycle, dangling parent, ...)."""


class SingularDesignError(AuditError, ValueError):
    """Least-squares fit of a structural equation is underdetermined."""

    def __init__(self, node, message):
        super().__init__(f"regression for node {node!r} failed: {message}")
        self.node = node


class DegenerateLabelError(AuditError, ValueError):
    """Classifier training labels contain a single class."""


class InvalidActionError(AuditError, ValueError):
    """An action references unknown nodes, non-finite deltas or violates feasibility."""


class PreconditionError(AuditError, ValueError):
    """An operation was called outside of its domain (e.g. recourse on a favorable instance)."""


class ConfigError(AuditError, ValueError):
    """Invalid run configuration."""


class IngestionError(AuditError, ValueError):
    """A data file could not be parsed into a dataset."""
