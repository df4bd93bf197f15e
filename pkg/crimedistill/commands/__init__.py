"""Command groups loaded by the application as extensions."""
