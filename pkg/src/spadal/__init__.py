"""Single-photon LiDAR simulation, depth reconstruction, and label-efficient
active learning with a diversity-guided uncertainty-inconsistency selector."""

from .photon_sim import (PhotonEvents, RateModel, SceneTruth, SimulationCondition,
                         depth_to_bin, generate_variants, neg_log_likelihood, simulate)
from .recon import DepthImage, ImageQuality, reconstruct, rmse, ssim

__all__ = [
    "PhotonEvents", "RateModel", "SceneTruth", "SimulationCondition",
    "depth_to_bin", "generate_variants", "neg_log_likelihood", "simulate",
    "DepthImage", "ImageQuality", "reconstruct", "rmse", "ssim",
]

__version__ = "0.1.0"
