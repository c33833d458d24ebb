"""graphfam: call-graph familial classification with explanations.

Pipeline: call graph -> sensitive-API centrality profile -> grayscale
feature image -> contrastively trained residual encoder -> linear family
classifier, explained by class-activation heatmaps mapped back to
(API, centrality) features.
"""

from .callgraph import (
    ApiRegistry,
    CallGraph,
    default_registry,
    load_graph,
    load_registry,
    make_registry,
    serialize_graph,
    undirected_view,
)
from .centrality import (
    CentralityProfile,
    KatzParams,
    closeness_centrality,
    degree_centrality,
    harmonic_centrality,
    katz_centrality,
    profile,
)
from .dataset import LabeledDataset
from .explain import Attribution, Heatmap, attribute, gradcam_pp, heatmap_family_matrix, ssim
from .imagegen import FeatureImage, ImageLayout, layout_for, pixel_to_feature, to_image
from .nnet import Checkpoint, EncoderConfig, load_checkpoint, save_checkpoint
from .obfusim import Transform, compose, parse_transform
from .synth import FamilySpec, SynthConfig, gen_dataset, gen_family_specs, gen_variant
from .training import (
    AugmentationPolicy,
    Metrics,
    SupConConfig,
    classify,
    crossvalidate,
    evaluate,
    make_views,
    supcon_loss,
    train_classifier,
    train_encoder,
    train_joint,
)

__version__ = "0.1.0"
