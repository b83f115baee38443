"""Sequential symptom checker: belief tracking, questioning policies, evaluation."""

__version__ = "0.1.0"
