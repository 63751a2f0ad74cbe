"""Unsupervised embeddings of spatial subgraphs with a denoising LSTM sequence autoencoder."""

__version__ = "0.1.0"
