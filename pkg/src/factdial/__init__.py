"""Knowledge-grounded dialogue response generation and factuality evaluation."""

__version__ = "0.1.0"
