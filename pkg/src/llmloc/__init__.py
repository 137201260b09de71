"""Defect localization for LLM-integrated software.

Builds an LLM-aware code knowledge graph over a repository, fuses three
evidence channels into candidate files, and ranks them by counterfactual
validation.
"""

__version__ = "0.1.0"
