__version__ = "1.0.0"
__codename__ = "Hippocampus"
