"""Sequence models for detecting Parkinson's disease from pen signals.

The package is organized as a pipeline: ``signal_io`` parses raw pen
recordings, ``features`` derives kinematic and pressure channels,
``preprocess`` fixes sequence length and normalizes, ``nn`` holds the
numpy network (1-d convolutions feeding recurrent layers), and
``evaluation`` runs the cross-validation and holdout protocols. ``cli``
binds everything into reproducible command-line experiments.
"""

__version__ = "0.1.0"
