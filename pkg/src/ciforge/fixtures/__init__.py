"""Bundled data files: miniature statute snapshot, role lexicon, predicates."""
