"""Polyphonic sound event detection with a trainable time-frequency front-end.

The package pairs a DFT/mel-initialized feature extraction block with a
convolutional recurrent classifier, both running on a small numpy-based
reverse-mode autodiff core, plus the metrics, toy-data synthesis, grid
search and learned-filter analyses needed to study what the front-end
learns.
"""

__version__ = "0.1.0"
