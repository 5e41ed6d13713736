"""Energy-shaping matching verification, control synthesis, and closed-loop
simulation for underactuated mechanical systems."""

try:
    from ._shapestab import *  # noqa: F401,F403  (installed layout)
except ImportError:
    from _shapestab import *  # noqa: F401,F403  (build-tree layout)
