"""Structure-aware summarization of scientific papers."""

__version__ = "0.1.0"

from .labels import LABELS, SectionLabel, SectionWeights  # noqa: E402

__all__ = ["LABELS", "SectionLabel", "SectionWeights", "__version__"]
