"""Vulnerability-reasoning toolkit.

Core pieces: a reasoning-DAG data model with structural validation and
admissibility rules, a hybrid verifiable reward, reasoning-aware evaluation
metrics, a semantic-preserving C/C++ perturbation engine with dual-gate
validation, a dataset-curation pipeline with gold-trace synthesis, and an
annotation review service for open coding.
"""

__version__ = "0.1.0"
