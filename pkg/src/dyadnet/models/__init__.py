from .backbone import Backbone, BackboneConfig, BlockFeatures, ResidualBlock
from .projection import ABSTRACT, TEMPORAL, ProjectionConfig, StreamProjector, TokenSequence
from .gla import CROSS, SELF_ABLATION, ClassificationHead, GlaBlock, GlaConfig, GlaFusion, RefinedTokens
from .network import (
    MODEL_NAMES,
    ArchConfig,
    DualPathModel,
    LateFusionModel,
    PooledConcatModel,
    SingleStreamModel,
    TokenConcatModel,
    build_model,
)

__all__ = [
    "Backbone", "BackboneConfig", "BlockFeatures", "ResidualBlock",
    "ABSTRACT", "TEMPORAL", "ProjectionConfig", "StreamProjector", "TokenSequence",
    "CROSS", "SELF_ABLATION", "ClassificationHead", "GlaBlock", "GlaConfig",
    "GlaFusion", "RefinedTokens",
    "MODEL_NAMES", "ArchConfig", "DualPathModel", "LateFusionModel",
    "PooledConcatModel", "SingleStreamModel", "TokenConcatModel", "build_model",
]
