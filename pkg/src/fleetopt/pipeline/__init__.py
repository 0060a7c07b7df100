"""Telemetry-to-energy pipeline: label, match, sample, fit, predict."""

from .matching import SegmentIndex, evaluate_matching, map_match, random_route
from .network import BUS_LEGAL_CLASSES, RoadNetwork, grid_network, load_network, save_network
from .regression import LinearModel, fit_ols, load_model, predict_trip_energy, save_model
from .samples import EnergySample, FeatureTable, make_samples, read_samples, write_samples
from .telemetry import TelemetryPoint, clean_and_label, read_trace, write_trace

__all__ = [
    "BUS_LEGAL_CLASSES",
    "EnergySample",
    "FeatureTable",
    "LinearModel",
    "RoadNetwork",
    "SegmentIndex",
    "TelemetryPoint",
    "clean_and_label",
    "evaluate_matching",
    "fit_ols",
    "grid_network",
    "load_model",
    "load_network",
    "make_samples",
    "map_match",
    "predict_trip_energy",
    "random_route",
    "read_samples",
    "read_trace",
    "save_model",
    "save_network",
    "write_samples",
    "write_trace",
]
