"""Numerical toolkit for asymmetric (Finsler) metric geometry."""
