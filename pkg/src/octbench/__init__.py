"""Evaluation harness for fundus-to-OCT volume synthesis."""

__version__ = "0.1.0"

from .augment import PhotometricParams, collaborative_flip, photometric_augment, sample_photometric
from .baselines import (
    CorruptionSpec,
    NoiseSchedule,
    generate_baseline_submission,
    gaussian_noise_corrupt,
    random_crop_corrupt,
)
from .config import RunConfig, load_config
from .dataset import Manifest, PairingRecord, load_sample, parse_manifest, scan_submission
from .harness import LeaderboardEntry, evaluate, rank
from .imaging import Frame, FundusImage, OctVolume, load_image, save_image
from .metrics import (
    GaussianStats,
    MetricReport,
    SsimParams,
    embed_volume,
    frechet_distance,
    fvd,
    gaussian_stats,
    psnr,
    ssim,
    volume_pixel_scores,
)
