"""Grounding of 3D referring expressions over object-centric scene transcripts."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
