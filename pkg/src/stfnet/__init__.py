"""Graph network over EEG electrodes and time windows for subject-level depression classification."""

__version__ = "0.1.0"
