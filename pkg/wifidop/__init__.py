"""Wi-Fi RSS positioning with dilution-of-precision quality estimates."""

__version__ = "0.1.1"
