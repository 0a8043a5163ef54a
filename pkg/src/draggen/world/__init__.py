from draggen.world.parts import Joint, KinematicTree, Part
from draggen.world.kinematics import Transform2D, pose_parts
from draggen.world.animation import AnimationSpec, articulation_at, sample_animation
from draggen.world.camera import Camera2D
from draggen.world.render import RenderedFrame, render

__all__ = [
    "Joint",
    "Part",
    "KinematicTree",
    "Transform2D",
    "pose_parts",
    "AnimationSpec",
    "sample_animation",
    "articulation_at",
    "Camera2D",
    "RenderedFrame",
    "render",
]
