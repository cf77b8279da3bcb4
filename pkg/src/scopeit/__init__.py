"""scopeit: sentence-level relevance scoping for email-sized documents."""

__version__ = "0.1.0"
