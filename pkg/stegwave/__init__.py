"""stegwave - LSB steganalysis with bit-stream measures and wavelet forced embedding"""

__version__ = "0.1.0"
__description__ = "Steganalysis toolkit: statistical measures, kernel SVM and forced-embedding detection"
