"""Tools for coding text corpora with LLM annotators.

The pipeline covers the full workflow: define a coding scheme with a
codebook, ingest and filter a sentence corpus, render few-shot prompts,
query a completions endpoint (or a deterministic mock), parse the answers
back into validated labels, score annotators against each other, ensemble
over example orders, and project costs.
"""

__version__ = "0.1.0"
