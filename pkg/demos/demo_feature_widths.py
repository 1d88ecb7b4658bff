"""
How wide is the common feature?
===============================

The common feature extractor turns each electrode's window into one row:
three depthwise-separable pipelines read the signal at different scales,
and two learned embeddings glue each window to its neighbours. The row
width follows from the window length, the depth multiplier and the
interval length alone.
"""
import numpy as np

from stfnet.cfe import feature_dims
from stfnet.config import parse_config
from stfnet.datapipe import extract_intervals, window_subject

cfg = parse_config()
for length, ts in [(12500, 125), (3750, 75)]:
    *per_scale, width = feature_dims(length, cfg.dwcs(), ts)
    print(f"len={length:5d} ts={ts:3d}: per-scale lengths {per_scale} -> width {width}")

# Without the interval embeddings only the convolutional part remains.
print("no interval glue, len=12500:", feature_dims(12500, cfg.dwcs(), 0)[-1])

# An interval is the tail of one window joined to the head of the next.
recording = np.arange(16.0).reshape(1, 16)
windows = window_subject(recording, 4)
intervals, first, last = extract_intervals(windows, 1)
print("windows:\n", windows[:, 0])
print("intervals:\n", intervals[:, 0])
print("unpaired ends:", first[0], last[0])
