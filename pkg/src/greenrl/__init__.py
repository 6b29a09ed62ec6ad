"""Energy-aware deep reinforcement learning for random-access control.

Subpackages are imported directly: rl_core, neural, compression, rach_env,
cloud_loop, spatial, energy, agents, config, runner, cli.
"""

__version__ = "0.1.0"
