"""Client-request classification: 20 Newsgroups benchmark models and a routing gateway."""

__version__ = "0.1.0"
