from . import (
    algebra_commands,
    group_commands,
    heisenberg_commands,
    metric_commands,
    pansu_commands,
    report_commands,
)

COMMAND_MODULES = [
    algebra_commands,
    group_commands,
    pansu_commands,
    heisenberg_commands,
    metric_commands,
    report_commands,
]

__all__ = ["COMMAND_MODULES"]
