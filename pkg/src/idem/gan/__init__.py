from .mlp import Mlp
from .losses import (pair_batch, sdgan_critic_grad, sdgan_gen_grad,
                     sdgan_losses, triplet_critic_grad, triplet_losses,
                     wgan_critic_grad, wgan_gen_grad, wgan_losses)
from .pool import HardNegativePool, build_negative_pool
from .train import (LatentSpec, SdGanModel, TrainConfig, TrainData, TrainState,
                    build_model, generate_identity_sets, load_model,
                    make_mated_pair_batch, sample_latent_pair,
                    sample_latent_pairs, save_model, train, train_step,
                    write_trace_csv)

__all__ = [
    "Mlp", "pair_batch", "sdgan_critic_grad", "sdgan_gen_grad", "sdgan_losses",
    "triplet_critic_grad", "triplet_losses", "wgan_critic_grad", "wgan_gen_grad",
    "wgan_losses", "HardNegativePool", "build_negative_pool", "LatentSpec",
    "SdGanModel", "TrainConfig", "TrainData", "TrainState", "build_model",
    "generate_identity_sets", "load_model", "make_mated_pair_batch",
    "sample_latent_pair", "sample_latent_pairs", "save_model", "train",
    "train_step", "write_trace_csv",
]
