import numpy as np
from scipy.special import expit


def sigmoid(x):
    """Logistic function 1 / (1 + exp(-x)); overflow-free for any finite x."""
    out = expit(np.asarray(x, dtype=np.float64))
    return out if out.ndim else float(out)
