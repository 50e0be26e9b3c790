"""Indoor mmWave network simulator with moving blockers and learned
beam recovery.

Subpackage map: geometry (arrays/codebooks), channel (stochastic SCM),
blockage (moving screen + edge diffraction), linklayer (SNR/rate/timing),
recovery (the four strategies), prediction (correlated beams, datasets,
MLP), scenario/simulate/pipeline/report/cli (orchestration).
"""

from .kernels import HAVE_COMPILED

__version__ = "0.1.0"
__all__ = ["HAVE_COMPILED", "__version__"]
