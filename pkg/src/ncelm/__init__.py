"""Stacked-LSTM language models trained with exact softmax or NCE."""
__version__ = "0.1.0"
