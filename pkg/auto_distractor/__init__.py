"""Auto Distractor: training-free distractor generation for extractive cloze questions."""

__version__ = "0.1.0"
