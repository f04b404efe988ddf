from .net import Generator, Discriminator, init_params, save_checkpoint, load_checkpoint
from .losses import discount_weight_map, masked_ce_loss
from .train import TrainConfig, LossReport, train_step, fit
from .infer import infer_inpaint

__all__ = [
    "Generator", "Discriminator", "init_params", "save_checkpoint", "load_checkpoint",
    "discount_weight_map", "masked_ce_loss",
    "TrainConfig", "LossReport", "train_step", "fit",
    "infer_inpaint",
]
