"""Propaganda-span detection toolkit: JSONL corpora, BIO projection, a
two-phase structured-perceptron tagger and span-overlap scoring."""

__version__ = "0.1.0"
