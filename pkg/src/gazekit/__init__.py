"""gazekit: post-hoc A/V sync, gaze-to-object mapping, mask quality metrics,
and behavior-annotation normalization for multi-device recording sessions."""

__version__ = "0.1.0"
