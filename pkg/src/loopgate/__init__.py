"""loopgate: trajectory-change gating of pose-graph loop closures.

Subpackages cover the full pipeline: SE(3)/SIM(3) geometry, pose-graph data
model and file formats, a Levenberg-Marquardt pose-graph solver, similarity
alignment and change scoring, the per-candidate verifier with its sequential
session, a synthetic-scenario simulator, and classification/trajectory
metrics. The `loopgate` CLI wires these into reproducible runs.
"""

__version__ = "0.1.0"
