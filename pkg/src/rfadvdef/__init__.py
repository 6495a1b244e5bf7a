"""rf-advdef: desk-scale adversarial-RF workbench.

Synthesizes modulated I/Q frames, trains a 1D-CNN modulation classifier with
a hand-rolled autograd engine, attacks it with gradient-sign adversarial
examples, defends it via autoencoder pretraining with frozen weight transfer,
and detects attacks with two-sample KS tests on softmax outputs.
"""

__version__ = "0.1.0"
