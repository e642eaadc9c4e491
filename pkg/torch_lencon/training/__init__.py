from torch_lencon.training.config import TrainConfig
from torch_lencon.training.batching import EncodedPair, Batch, collate, encode_corpus, make_batches
from torch_lencon.training.optim import AdamState, adam_step
from torch_lencon.training.trainer import Trainer, nll_loss, train, write_loss_curve, per_token_loss
