"""Single-life representation-learning lab.

Generates procedural egocentric "lives", mines frame pairs by temporal and
spatial co-visibility, trains cross-view-completion models on them, measures
cross-model alignment at patch level (CAS), and evaluates depth probing and
zero-shot correspondence.
"""

__version__ = "0.1.0"
