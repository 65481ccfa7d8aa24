from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .sampling import sample, sample_abundances, sample_latents
from .schedule import NoiseSchedule, build_schedule, q_sample, sample_step
from .training import TrainConfig, TrainingLog, configure_threads, train, training_loss
from .unet import UNet, build_denoiser, denoiser_forward

__all__ = [
    "Checkpoint",
    "NoiseSchedule",
    "TrainConfig",
    "TrainingLog",
    "UNet",
    "build_denoiser",
    "build_schedule",
    "configure_threads",
    "denoiser_forward",
    "load_checkpoint",
    "q_sample",
    "sample",
    "sample_abundances",
    "sample_latents",
    "sample_step",
    "save_checkpoint",
    "train",
    "training_loss",
]
