"""stegwave - steganalysis toolkit

Bit-stream statistical measures with an RBF SVM for file-type and LSB-plane
classification, and a Haar-wavelet forced-embedding detector that estimates how
much of an image's LSB plane carries hidden data.
"""

import sys
from pathlib import Path

# Add the project root to Python path
sys.path.insert(0, str(Path(__file__).parent))

from stegwave.cli import dispatch


if __name__ == "__main__":
    sys.exit(dispatch(sys.argv[1:]))
