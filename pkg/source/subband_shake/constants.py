##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Some constants to help keep things tidy and manageable.

"""

# the four emotion classes, in label-index order
EMOTIONS = ('joy', 'anger', 'sadness', 'fear')
CLASS_COUNT = len(EMOTIONS)

# feature chain
SAMPLE_RATE = 16000
WINDOW_MS = 25
HOP_MS = 10
FFT_SIZE = 512
SPECTRAL_BINS = FFT_SIZE // 2 + 1
LEFT_CONTEXT = 10
RIGHT_CONTEXT = 5
CONTEXT = LEFT_CONTEXT + 1 + RIGHT_CONTEXT
DOWNSAMPLE = 8
LOG_FLOOR = 1e-10

# training
LEARNING_RATE = 0.001
BATCH_SIZE = 64
MAX_EPOCHS = 200
PATIENCES = (9, 11, 13, 15, 17, 19, 21, 26, 31, 36, 41, 46, 51)

# files and folders
MANIFEST_NAME = "manifest.csv"
WAV_FOLDER = "wav"
FEATURE_FOLDER = "features"
FEATURE_SUFFIX = ".feat"
REPORT_NAME = "report.jsonl"
CHECKPOINT_NAME = "best.ckpt"
CONFIG_ECHO = "config.txt"
PARTITION_NAME = "partition.txt"

# environment
SEED_ENV = "SUBBAND_SHAKE_SEED"
WORKSPACE_ENV = "SUBBAND_SHAKE_WORKSPACE"
