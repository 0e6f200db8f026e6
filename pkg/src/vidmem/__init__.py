"""Video memorability prediction with text-guided motion contrastive learning, and memorability-weighted video summarization."""
