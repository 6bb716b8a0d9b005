"""dyadnet: signed ally/enemy dyad graphs from conflict infoboxes, with
dyadic and systemic edge classifiers on a from-scratch autodiff core."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
