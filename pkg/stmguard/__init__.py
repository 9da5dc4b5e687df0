"""stmguard - static contract checking of STM transactions against transactional invariants."""

__version__ = "1.0.0"
