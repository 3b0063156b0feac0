"""Goal-conditioned maneuvering of a double-Ackermann-steering robot with SAC, CrossQ critics and HER."""

from .agent import AgentConfig, CrossQAgent, NetworkConfig
from .environment import DasmrEnv, StepInfo, WorldConfig
from .kinematics import ChassisTwist, RobotParams, WheelState
from .replay import HERConfig, HerReplayBuffer, Transition

__all__ = [
    "AgentConfig", "CrossQAgent", "NetworkConfig", "DasmrEnv", "StepInfo", "WorldConfig",
    "ChassisTwist", "RobotParams", "WheelState", "HERConfig", "HerReplayBuffer", "Transition",
]
__version__ = "0.1.0"
