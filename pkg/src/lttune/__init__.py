"""LLM-driven database knob and index tuning.

Pipeline: ``workload`` extracts join pairs, ``compressor`` packs them into a
token budget, ``prompt`` and ``llm`` sample candidate configurations, and
``selector`` picks the fastest one with bounded-time trial runs driven by
``evaluator``, ``scheduler`` and an ``executor`` backend.
"""

__version__ = "0.1.0"
