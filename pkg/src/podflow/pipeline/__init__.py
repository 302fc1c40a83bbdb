"""Reference news-to-podcast pipeline built on the workflow engine."""
