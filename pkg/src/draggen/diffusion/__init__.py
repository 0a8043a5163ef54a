from draggen.diffusion.schedule import NoiseSchedule, add_noise
from draggen.diffusion.codec import LatentCodec, space_to_depth, depth_to_space

__all__ = [
    "NoiseSchedule",
    "add_noise",
    "LatentCodec",
    "space_to_depth",
    "depth_to_space",
]
