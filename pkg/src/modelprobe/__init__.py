"""modelprobe: capture deep-learning experiment data in a documented on-disk
format and expose it for systematic debugging — lineage and architecture
graphs over three abstraction levels, a transform pipeline, interestingness
scoring, and a cached HTTP API."""

__version__ = "0.1.0"
