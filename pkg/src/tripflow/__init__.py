"""Mobility-cluster discovery and Bayesian hypothesis ranking for trip data."""

from .geo import GeoPoint, StateSpace, Tract, haversine_distance, hour_of_week, locate
from .ingest import RawTripRecord, TransitionCounts, Trip, clean_trips, transition_counts
from .tensor import FactorSet, MobilityTensor, NtfOptions, build_tensor, ntf_decompose, \
    reconstruction_error
from .clusters import ClusterSpec, cluster_counts, select_cluster_trips, top_indices
from .hypotheses import CatalogConfig, FeatureVectors, HypothesisMatrix, WeightVector, \
    build_catalog
from .evidence import EvidenceResult, PriorMatrix, elicit_prior, k_sweep, log_evidence, \
    rank_hypotheses
from .synth import GridSpec, PlantedCluster, PropertyRecipe, generate_from_hypothesis, \
    generate_state_space, generate_trips
from .config import PipelineConfig, load_config

__version__ = "0.1.0"
