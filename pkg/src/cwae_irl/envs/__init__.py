from .objectworld import (
    ACTIONS,
    STAY,
    ObjectPlacement,
    Objectworld,
    ObjectworldSpec,
    WorldObject,
    build_objectworld,
    objectworld_features,
    objectworld_true_reward,
)
from .pendulum import Pendulum, PendulumSpec, pendulum_reward, pendulum_step
