"""Hybrid unary-binary compiler for tiny MLP classifiers."""
