"""
Defaults for pnkit, with environment overrides for runtime knobs.
"""
import os
from dotenv import load_dotenv

load_dotenv()

# Runtime configuration
LOG_LEVEL = os.getenv('PNKIT_LOG_LEVEL', 'INFO')
DEFAULT_SEED = int(os.getenv('PNKIT_SEED', '0'))
DEFAULT_JOBS = int(os.getenv('PNKIT_JOBS', '1'))
OUTPUT_DIR = os.getenv(
    'PNKIT_OUTPUT_DIR',
    os.path.join(os.path.dirname(os.path.dirname(__file__)), 'output'),
)

# Pigment network extraction
RESIZE_DIMS = (512, 512)            # width, height
CHANNEL_WEIGHTS = (1.0, 0.0, 0.0)   # keeps L*, drops a* and b*
CLAHE_TILES = (8, 8)
CLAHE_BINS = 128
CLAHE_CLIP = 0.01                   # fraction of tile pixels per bin
GAUSSIAN_SIGMA = 2.0
THRESHOLD_BINS = 256                # 8-bit quantization before intermeans
THRESHOLD_OFFSET = 0.008
THRESHOLD_OFFSET_RANGE = (0.0, 0.05)
OVERRIDE_OFFSET_RANGE = (0.001, 0.011)
MIN_COMPONENT_PX = 100
CONNECTIVITY = 8
BACKGROUND_RGB = (255, 255, 255)
INTERMEANS_MAX_ITER = 256

# CNN
CNN_INPUT_SIZE = 280
RELU_CEILING = 10.0
LEARNING_RATE = 0.01
MOMENTUM = 0.9
MAX_EPOCHS = 250
BATCH_SIZE = 16
VALIDATION_FREQUENCY = 25           # optimizer iterations
POOL_SIZE = 5
TRAIN_FRACTION = 0.8

# Bag of features
VOCAB_SIZE = 500
SURF_OCTAVES = 3
SURF_THRESHOLD = 0.0004
KMEANS_MAX_ITER = 100
KMEANS_TOL = 1e-6
BOF_EPOCHS = 200
BOF_LEARNING_RATE = 0.1
BOF_REGULARIZATION = 1e-4

# Labels
CLASS_NAMES = ('typical', 'atypical')   # index 1 is the positive class
IMAGE_EXTENSIONS = ('.png', '.jpg', '.jpeg', '.bmp')
