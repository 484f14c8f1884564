"""lhsim: system-level simulator for local and hyper-local multicast services."""
from lhsim.kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
