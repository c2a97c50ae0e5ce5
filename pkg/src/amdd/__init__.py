"""Model-driven generation and verification of multi-agent programs.

The package turns PlantUML-subset agent models, OCL-subset constraints and a
FIPA-style ontology into prompt bundles and agent program IR, then checks the
result structurally (cyclomatic complexity) and behaviourally (a deterministic
mission simulator plus partial-order conformance checking).
"""

__version__ = "0.1.0"
