"""Tests for varexp-splus."""
