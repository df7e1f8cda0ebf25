"""End-to-end two-pathway action recognition: datasets, training, evaluation."""
from .bundle import ModelBundle
from .config import PipelineConfig
from .dataset import SequenceDataset, Video, load_dataset, split_subjects, write_dataset
from .features import FeatureExtractor
from .inference import ConfusionMatrix, Evaluation, classify_sequence, evaluate, majority_vote
from .synthetic import ACTIONS, make_action_dataset
from .training import train, train_scenario1, train_scenario2, tune_attention

__all__ = [
    "ACTIONS", "ConfusionMatrix", "Evaluation", "FeatureExtractor", "ModelBundle", "PipelineConfig",
    "SequenceDataset", "Video", "classify_sequence", "evaluate", "load_dataset", "majority_vote",
    "make_action_dataset", "split_subjects", "train", "train_scenario1", "train_scenario2", "tune_attention",
    "write_dataset",
]
