from core.kernels import branching_factor, kernel_integral, kernel_value
from core.settings import settings

__all__ = ["settings", "kernel_value", "kernel_integral", "branching_factor"]
