"""KG-guided chain-of-thought supervision pipeline.

Turns a biomedical knowledge graph, a clinical code vocabulary, and a
longitudinal visit cohort into a KG-anchored reasoning-trace corpus, plus
evaluation tooling (discrimination metrics and a blinded pairwise review
study).
"""

__version__ = "0.1.0"
