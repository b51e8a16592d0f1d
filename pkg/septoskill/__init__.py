"""
septoskill - objective skill assessment from Cottle-elevator motion

Library half of the pipeline: pose ingestion and calibration, head-motion
compensation, stroke segmentation, SCC/SDC/CR features and the SVM/HMM
classifiers. The CLI in `cli/main.py` composes these through `facade`.
"""

import os

# Resolved from the package location so assets are found wherever the
# checkout lives.
SEPTOSKILL_BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
ASSETS_DIR = os.path.join(SEPTOSKILL_BASE_DIR, 'assets')
DEFAULT_CONFIG_PATH = os.path.join(ASSETS_DIR, 'default_config.json')

from .utils import SeptoskillError

__version__ = "1.0.0"

__all__ = [
    "SEPTOSKILL_BASE_DIR",
    "ASSETS_DIR",
    "DEFAULT_CONFIG_PATH",
    "SeptoskillError",
    "__version__",
]
