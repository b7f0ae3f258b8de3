"""Scenario harness: config files, protocol state machines, channel links, runner and reports."""
