"""Pretraining, fine-tuning, and checkpointing."""

from .checkpoint import load_checkpoint, restore_params, save_checkpoint
from .finetune import (TUNED_GROUPS, Finetuner, finetune_step,
                       finetuner_from_checkpoint, select_fraction,
                       teacher_forced_metrics)
from .losses import (LossBreakdown, check_finite, combine, critic_losses,
                     gen_loss, rec_loss, summ_loss)
from .pretrain import Pretrainer, model_from_checkpoint, pretrain_step
