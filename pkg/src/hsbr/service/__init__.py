"""HTTP service exposing the evaluation pipeline."""
