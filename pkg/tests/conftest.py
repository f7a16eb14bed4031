"""Anchors pytest's rootdir so sibling helper modules import cleanly."""
