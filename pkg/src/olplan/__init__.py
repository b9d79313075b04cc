"""Object-level planning: language-model plan sketches compiled into PDDL subgoals over a block world."""

__version__ = "0.1.0"
