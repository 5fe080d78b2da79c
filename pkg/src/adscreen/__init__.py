"""adscreen: early dementia-risk screening from keyword trajectories in
longitudinal clinical notes, with a built-in synthetic corpus generator.

The pipeline: generate (or load) a longitudinal note corpus, ascertain
cases and match controls, scan notes for lexicon keywords, build
keyword-age TF-IDF features under a clean-window evaluation design, train
classical classifiers, and report discrimination, calibration, Shapley
attributions and occurrence-trend curves.
"""

__version__ = "0.1.0"

from .lexicon import Lexicon, default_lexicon
from .matcher import BACKEND, KeywordMatcher, compile_matcher
from .trajectory import TrajectoryProfile, keyword_rate

__all__ = [
    "BACKEND",
    "KeywordMatcher",
    "Lexicon",
    "TrajectoryProfile",
    "compile_matcher",
    "default_lexicon",
    "keyword_rate",
    "__version__",
]
