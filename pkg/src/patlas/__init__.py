"""patlas: patent-portfolio analytics.

Reconstructs a full patent-analytics pipeline: corpus ingestion, diagonal
block co-clustering of the patent × IPC-subclass matrix, z-score keyword
labeling, assignee-name resolution, credit allocation, portfolio-entropy
dynamics, and reassignment/licensing statistics, with a batch CLI.
"""

__version__ = "0.1.0"
