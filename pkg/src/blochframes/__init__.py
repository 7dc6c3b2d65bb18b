"""Chern numbers and Bloch frame construction for gapped tight-binding models."""
