"""Feature Gradients feature selection."""
