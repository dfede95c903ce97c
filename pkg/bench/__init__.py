# Bench package initialization
