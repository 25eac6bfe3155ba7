"""Offensive language detection and categorization, desk scale.

Multilingual joint fine-tuning of a small transformer classifier, soft-label
knowledge distillation from teacher ensembles, ten-fold cross-validation
ensembling and macro-F1 evaluation, with a TSV data pipeline for
hierarchically annotated corpora.
"""

from .corpus import (
    CorpusStats,
    DatasetSplit,
    LabeledExample,
    ParseError,
    SoftDistribution,
    Task,
    ValidationError,
    confidence_to_soft,
    mix_multilingual,
    parse_olid,
    parse_solid_distant,
    stats,
    stratified_kfold,
    validate_hierarchy,
)
from .distillation import (
    CallableTeacher,
    FileTeacher,
    ModelTeacher,
    TeacherEnsemble,
    distill_student,
    ensemble_soft_labels,
)
from .encoder import (
    EncoderConfig,
    EncoderOutput,
    ModelParameters,
    TokenBatch,
    classify,
    forward,
    init_params,
    load_checkpoint,
    mlm_logits,
    save_checkpoint,
)
from .ensemble import CvEnsemble, predict_ensemble, train_cv_ensemble
from .evaluation import (
    ConfusionMatrix,
    MetricsReport,
    compare_runs,
    confusion,
    macro_f1,
    report,
)
from .tokenizer import TokenSequence, Vocabulary, build_vocab, decode, encode
from .training import (
    MaskingPolicy,
    OptimizerState,
    TrainConfig,
    adam_step,
    backward,
    finetune,
    grad_check,
    hard_cross_entropy,
    mask_tokens,
    pretrain_mlm,
    soft_cross_entropy,
)

__version__ = "0.1.0"
