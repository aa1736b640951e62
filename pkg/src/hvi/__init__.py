"""Hierarchical hemi-variational inequalities solved by Tikhonov-regularized extragradient schemes."""
