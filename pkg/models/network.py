"""
Convolutional network: layer parameters, training options and the model itself.

Tensors are numpy float64 arrays laid out (batch, height, width, channels).
"""
from dataclasses import dataclass, field, asdict

import numpy as np

from config.settings import (
    LEARNING_RATE, MOMENTUM, MAX_EPOCHS, BATCH_SIZE, VALIDATION_FREQUENCY,
    CNN_INPUT_SIZE, RELU_CEILING, POOL_SIZE, DEFAULT_SEED,
)


def check_tensor4(x, name='tensor'):
    """Validate a (batch, height, width, channels) array of finite reals."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"{name} must be 4-D (batch, height, width, channels), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or Inf")
    return x


@dataclass(eq=False)
class ConvLayer:
    """Dilated, strided convolution with 'same' padding."""
    kernel: np.ndarray          # (kh, kw, in_ch, out_ch)
    bias: np.ndarray            # (out_ch,)
    stride: tuple = (1, 1)
    dilation: tuple = (1, 1)

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.kernel.ndim != 4 or self.kernel.shape[0] < 1 or self.kernel.shape[1] < 1:
            raise ValueError(f"kernel must be (kh, kw, in, out), got {self.kernel.shape}")
        if self.bias.shape != (self.kernel.shape[3],):
            raise ValueError("bias length must equal the number of output channels")
        if min(self.stride) < 1 or min(self.dilation) < 1:
            raise ValueError("stride and dilation must be >= 1")
        self.stride = tuple(int(s) for s in self.stride)
        self.dilation = tuple(int(d) for d in self.dilation)

    @property
    def in_channels(self):
        return self.kernel.shape[2]

    @property
    def out_channels(self):
        return self.kernel.shape[3]

    @property
    def extent(self):
        """Effective (height, width) footprint of the dilated kernel."""
        kh, kw = self.kernel.shape[:2]
        return (kh - 1) * self.dilation[0] + 1, (kw - 1) * self.dilation[1] + 1


@dataclass(eq=False)
class BatchNormLayer:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = 1e-5
    momentum_stat: float = 0.1

    @classmethod
    def identity(cls, channels):
        return cls(
            gamma=np.ones(channels), beta=np.zeros(channels),
            running_mean=np.zeros(channels), running_var=np.ones(channels),
        )

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if np.any(np.asarray(self.running_var) < 0):
            raise ValueError("running variance must be non-negative")

    @property
    def channels(self):
        return len(self.gamma)


@dataclass(frozen=True)
class PoolLayer:
    window: tuple = (POOL_SIZE, POOL_SIZE)
    stride: tuple = (2, 2)


@dataclass(eq=False)
class DenseLayer:
    weights: np.ndarray         # (flattened input, classes)
    bias: np.ndarray            # (classes,)


@dataclass(frozen=True)
class TrainOptions:
    learning_rate: float = LEARNING_RATE
    momentum: float = MOMENTUM
    max_epochs: int = MAX_EPOCHS
    batch_size: int = BATCH_SIZE
    validation_frequency: int = VALIDATION_FREQUENCY
    shuffle_each_epoch: bool = True
    seed: int = DEFAULT_SEED
    input_size: int = CNN_INPUT_SIZE
    relu_ceiling: float = RELU_CEILING
    pool_size: int = POOL_SIZE

    def validate(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.validation_frequency < 1:
            raise ValueError("validation_frequency must be >= 1")
        if self.input_size < 8:
            raise ValueError("input_size must be >= 8")
        if self.relu_ceiling <= 0:
            raise ValueError("relu_ceiling must be > 0")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainLogEntry:
    iteration: int
    epoch: int
    train_loss: float
    val_accuracy: float


PARAMETER_NAMES = (
    'conv1.kernel', 'conv1.bias', 'bn1.gamma', 'bn1.beta',
    'conv2.kernel', 'conv2.bias', 'bn2.gamma', 'bn2.beta',
    'fc.weights', 'fc.bias',
)


@dataclass(eq=False)
class CnnModel:
    """
    conv(5x5x8, dilation 3) -> BN -> clipped ReLU -> maxpool(5x5, stride 2)
    -> conv(3x3x16, dilation 2, stride 3) -> BN -> clipped ReLU -> FC(2) -> softmax
    """
    conv1: ConvLayer
    bn1: BatchNormLayer
    pool: PoolLayer
    conv2: ConvLayer
    bn2: BatchNormLayer
    fc: DenseLayer
    relu_ceiling: float
    input_shape: tuple          # (height, width, channels)
    input_mean: np.ndarray      # per-channel mean subtracted before conv1
    seed: int = 0
    options: TrainOptions = field(default_factory=TrainOptions)
    epochs_run: int = 0
    final_val_accuracy: float = None
    trained: bool = False

    def _slot(self, name):
        layer, attr = name.split('.')
        return getattr(self, layer), attr

    def parameters(self):
        """name -> array for every learnable parameter."""
        out = {}
        for name in PARAMETER_NAMES:
            layer, attr = self._slot(name)
            out[name] = getattr(layer, attr)
        return out

    def set_parameters(self, params):
        for name in PARAMETER_NAMES:
            layer, attr = self._slot(name)
            value = np.asarray(params[name], dtype=np.float64)
            if value.shape != getattr(layer, attr).shape:
                raise ValueError(f"{name}: expected shape {getattr(layer, attr).shape}, got {value.shape}")
            setattr(layer, attr, value)

    def buffers(self):
        """Non-learned state: batch-norm running statistics and the input mean."""
        return {
            'bn1.running_mean': self.bn1.running_mean,
            'bn1.running_var': self.bn1.running_var,
            'bn2.running_mean': self.bn2.running_mean,
            'bn2.running_var': self.bn2.running_var,
            'input_mean': self.input_mean,
        }

    def set_buffers(self, buffers):
        self.bn1.running_mean = np.asarray(buffers['bn1.running_mean'], dtype=np.float64)
        self.bn1.running_var = np.asarray(buffers['bn1.running_var'], dtype=np.float64)
        self.bn2.running_mean = np.asarray(buffers['bn2.running_mean'], dtype=np.float64)
        self.bn2.running_var = np.asarray(buffers['bn2.running_var'], dtype=np.float64)
        self.input_mean = np.asarray(buffers['input_mean'], dtype=np.float64)
