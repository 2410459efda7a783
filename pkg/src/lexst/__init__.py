"""Lexicon-guided self-training for few-shot text classification."""
