"""Few-shot event detection with N+1-way K-shot episodes."""
from .classifier import FewShotModel, build_model, predict, score
from .corpus import CorpusSplit, EventMention, EventType, Sentence, Token, load_corpus, make_split
from .embedding import Vocabulary, load_pretrained_embeddings
from .encoders import EncoderConfig
from .sampler import Episode, SamplerConfig, episode_stream, sample_episode

__version__ = "0.1.0"

__all__ = [
    "FewShotModel", "build_model", "predict", "score", "CorpusSplit", "EventMention", "EventType", "Sentence",
    "Token", "load_corpus", "make_split", "Vocabulary", "load_pretrained_embeddings", "EncoderConfig", "Episode",
    "SamplerConfig", "episode_stream", "sample_episode",
]
