"""Two-stage prompt co-learning for multi-label image classification.

Learnable pseudo-image tensors and text-prompt context vectors are
optimized against a frozen dual encoder; inference fuses visual and
textual cosine similarities per class.
"""

__version__ = "0.1.0"
