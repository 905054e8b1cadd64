"""foldscorer: contrastively fine-tuned image embeddings served over a socket."""

from .data import BalancedBatchSampler, DegenerateDataset, LabeledImages, make_toy_dataset
from .loss import NoPositivePairs, supcon_loss
from .model import build_model, embed_images, load_checkpoint, save_checkpoint
from .separability import SeparabilityReport, separability
from .server import EmbeddingServer, request_embedding
from .train import TrainConfig, TrainResult, finetune

__version__ = "0.1.0"
