"""Risk verification of closed-loop systems."""
