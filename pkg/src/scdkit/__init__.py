"""Toolkit for set-constrained delivery (SCD) broadcast.

Subpackages cover the message-passing broadcast protocol for minority-crash
asynchronous systems (scd_mp), snapshot objects and registers built on top of
it (shared_objects), the reverse construction of the broadcast from snapshot
objects (scd_from_snapshot), a deterministic fault-injecting simulator (sim),
machine-checkable property and consistency checkers (check), and a command
line front end (cli).
"""

__version__ = "0.1.0"
