from .ban_synth import RssTrace, synth_dataset, synth_trace
from .config import ArchConfig, ExperimentRecipe, SynthConfig, TrainConfig
from .features import PropagationProfile, build_profile, profile_traces, segment_trace
from .feature_store import FeatureDataset, load_dataset, save_dataset
from .adversarial import (
    ModelParams,
    OnOffDistribution,
    load_checkpoint,
    predict,
    train_adversarial,
    train_baseline,
)
from .labels import DeviceLabel, MotionLabel
from .destination.destination import Destination
from pathlib import Path
from typing import Optional, Union


def authenticate_trace(
    trace: RssTrace,
    model: Union[ModelParams, Destination, Path],
    threshold: float = 0.5,
    trace_id: int = 0,
) -> list[OnOffDistribution]:
    """One on/off decision per 5 s segment of the trace"""
    if not isinstance(model, ModelParams):
        model = load_checkpoint(model)
    return [
        predict(model, build_profile(segment), threshold)
        for segment in segment_trace(trace, trace_id)
    ]


def majority_decision(decisions: list[OnOffDistribution]) -> Optional[DeviceLabel]:
    """Label taken by most segments, None on a tie or without segments"""
    on = sum(d.decision == DeviceLabel.OnBody for d in decisions)
    off = len(decisions) - on
    if on == off:
        return None
    return DeviceLabel.OnBody if on > off else DeviceLabel.OffBody
