"""Community well-being forecasting and recovery-pattern modelling for city forums."""

from .affect import Lexicon, LexiconVectorizer, load_lexicon, tokenize, wellbeing_series, znorm
from .corpus import CorpusIndex, Record, RecordStream, load_records, partition_by_day
from .forecast import TrendSeasonalityForecaster
from .interaction import build_daily_graph, build_tree, graph_metrics, tree_metrics
from .model import L2LogisticRegression, SMOTE, loo_cv
from .resilience import RecoveryLabel, classify, deviation_fraction

__version__ = "0.1.0"

__all__ = [
    "CorpusIndex", "L2LogisticRegression", "Lexicon", "LexiconVectorizer", "Record",
    "RecordStream", "RecoveryLabel", "SMOTE", "TrendSeasonalityForecaster", "build_daily_graph",
    "build_tree", "classify", "deviation_fraction", "graph_metrics", "load_lexicon",
    "load_records", "loo_cv", "partition_by_day", "tokenize", "tree_metrics",
    "wellbeing_series", "znorm",
]
