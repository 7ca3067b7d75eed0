"""Code-switching text generation: corpora, baselines, GAN generator, language models and metrics.

Sentences travel as lines of ``word|h`` / ``word|g`` tokens (host / guest language);
untagged tokens are classified by script.
"""

from ._csgan import (
    AlignmentError,
    CharLM,
    ConfigError,
    Corpus,
    CsganError,
    DomainError,
    Generator,
    KneserNey,
    LifecycleError,
    Lexicon,
    NumericError,
    ParseError,
    PosLexicon,
    RealizationError,
    ShapeError,
    __version__,
    apply_baseline,
    bleu1,
    derive_seed,
    evaluate,
    levenshtein,
    run_experiment,
    synth,
    train_char_lm,
    train_gan,
    wer,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
