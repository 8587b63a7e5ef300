"""Caption robustness benchmark toolkit.

Seeded image corruptions, caption collection over a small HTTP protocol,
caption normalization, from-scratch lexical metrics (BLEU, METEOR,
ROUGE-L, CIDEr), embedding similarity, and a deterministic evaluation
harness with table rendering.
"""

from .corruptions import (CorruptionSpec, MixtureSpec, apply, apply_mixture,
                          corrupt_dataset)
from .datasets import (LengthStats, Manifest, Sample, caption_length_stats,
                       load_manifest)
from .errors import (CapharnessError, CaptionFileError, ConfigError,
                     ManifestError, MetricError, ParameterError, ProviderError,
                     ReportError, UnsupportedCorruptionError)
from .harness import RunConfig, RunResult, compare, load_run, run
from .lexical import (CorpusScores, EvalPair, bleu, cider, evaluate_pairs,
                      meteor, rouge_l, score_corpus, tokenize)
from .normalize import normalize_batch, normalize_caption
from .providers import (CaptionRecord, DecodingParams, PROMPT_TIERS,
                        captions_from_file, captions_from_http)
from .raster import Raster
from .report import (render_length_histogram, render_table1, render_table2)
from .rng import Stream, hash64
from .similarity import (BuiltinHashedNgram, RemoteEmbedder, cosine,
                         make_embedder, similarity_corpus)

__version__ = "0.1.0"
