from torch_lencon.model.config import ModelConfig, Variant
from torch_lencon.model.lstm import LSTMBlock, lstm_step
from torch_lencon.model.states import EncoderStates, DecoderState
from torch_lencon.model.length import remaining_length_update
from torch_lencon.model.encoder_decoder import EncoderDecoder
from torch_lencon.model.checkpoint import save_checkpoint, load_checkpoint, read_checkpoint_header
