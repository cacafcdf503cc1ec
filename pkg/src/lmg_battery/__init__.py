"""LMG quantum battery charging simulations."""
