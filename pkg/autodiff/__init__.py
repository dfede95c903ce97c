# Autodiff package initialization
