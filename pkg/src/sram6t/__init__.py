"""6T SRAM bit-cell characterization."""
