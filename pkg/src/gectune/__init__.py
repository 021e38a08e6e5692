"""Statistical grammatical error correction tuned toward the M2 metric."""

from .corpus import AnnotatedSentence, Corpus, Edit, parse_m2, read_m2, write_m2
from .decoder import DecoderConfig, Models, decode
from .features import FeatureVec, WeightVec
from .metric import MetricConfig, Stats3, bleu, corpus_m2, prf

__version__ = "0.1.0"
