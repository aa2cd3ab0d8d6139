"""Tests for the intrapulse AMR pipeline."""
