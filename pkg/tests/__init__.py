"""Tests for the GUI Agent."""
