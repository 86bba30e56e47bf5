"""Age-of-information minimization for a UAV collecting status updates.

Modules:

- ``env``: grid environment, channel/energy model, episode runner
- ``bounds``: closed-form and simulated extremes of the total cost
- ``dp``: exact backward induction for micro instances
- ``policies``: policy interface, distance-based and random-walk baselines
- ``qlearning`` / ``dqn``: tabular Q-learning and a numpy deep Q-network
- ``harness``: scenario catalog, comparison runs, CSV output
"""

from .env import (
    Action,
    Cell,
    EnvSpec,
    GridSpec,
    NodeConfig,
    RadioParams,
    SystemState,
    feasible_actions,
    initial_state,
    is_terminal,
    make_spec,
    run_episode,
    step,
)

__version__ = "0.1.0"
