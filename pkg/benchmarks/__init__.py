"""Long-running acceptance experiments and the classic TMLE reference."""
