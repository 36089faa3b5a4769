"""Brain-tumour grade classification from mixed DWT/DCT slice features and
a small LSTM, implemented from scratch on numpy."""

__version__ = "0.1.0"
