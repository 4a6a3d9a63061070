"""corp_lab: cooperative output regulation lab for unknown linear multi-agent systems.

Model-based Riccati baseline plus four data-driven learners (policy iteration,
value iteration, and their reduced two-stage variants) over leader-follower
digraphs, with a deterministic collection simulator and closed-loop checks.
"""

__version__ = "0.1.0"
