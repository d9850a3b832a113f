# End-to-end CLI tests for the sliding simulator
