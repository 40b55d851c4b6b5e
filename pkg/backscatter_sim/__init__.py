"""Link-level simulator for M-MIMO assisted ambient backscatter communication."""

__version__ = "1.0.0"
