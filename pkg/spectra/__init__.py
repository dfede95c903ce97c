# Spectra package initialization
