"""Differentiable geometry of the constant-curvature models E, H, S, P, D and U.

The free functions below validate their inputs (shapes, base points, tangency)
and then call the unchecked methods on the space objects. Hot loops such as the
VAE forward pass call the methods directly.
"""
from ..errors import ContractError
from . import gyro
from .functions import FLAT_THRESHOLD, as_tensor, curv_trig
from .gyro import gyration, mobius_add
from .spaces import (
    Euclidean,
    Hyperboloid,
    PoincareBall,
    ProjectedSphere,
    Space,
    Sphere,
    Stereographic,
    make_space,
    stereo_project,
    stereo_unproject,
)

__all__ = [
    "FLAT_THRESHOLD",
    "Euclidean",
    "Hyperboloid",
    "PoincareBall",
    "ProjectedSphere",
    "Space",
    "Sphere",
    "Stereographic",
    "curv_trig",
    "distance",
    "exp_map",
    "gyration",
    "gyro_distance",
    "inner",
    "lift_missing_coordinate",
    "log_map",
    "make_space",
    "mobius_add",
    "origin",
    "parallel_transport",
    "project_to_manifold",
    "stereo_project",
    "stereo_unproject",
]


def inner(space, x, u, v):
    x, u, v = as_tensor(x), as_tensor(u), as_tensor(v)
    space.check_point(x)
    space.check_tangent(x, u)
    space.check_tangent(x, v)
    return space.inner(x, u, v)


def distance(space, x, y):
    x, y = as_tensor(x), as_tensor(y)
    space.check_point(x)
    space.check_point(y)
    return space.distance(x, y)


def gyro_distance(k, x, y):
    x, y = as_tensor(x), as_tensor(y)
    if x.shape != y.shape:
        raise ContractError("gyro_distance: shape mismatch")
    return gyro.gyro_distance(k, x, y)


def exp_map(space, x, v):
    x, v = as_tensor(x), as_tensor(v)
    space.check_point(x)
    space.check_tangent(x, v)
    return space.expmap(x, v)


def log_map(space, x, y):
    x, y = as_tensor(x), as_tensor(y)
    space.check_point(x)
    space.check_point(y)
    return space.logmap(x, y)


def parallel_transport(space, x, y, v):
    x, y, v = as_tensor(x), as_tensor(y), as_tensor(v)
    space.check_point(x)
    space.check_point(y)
    space.check_tangent(x, v)
    return space.transp(x, y, v)


def project_to_manifold(space, ambient):
    a = as_tensor(ambient)
    space._check_shape(a)
    return space.proj(a)


def lift_missing_coordinate(space, partial):
    p = as_tensor(partial)
    if p.shape[-1] != space.dim:
        raise ContractError(f"lift expects {space.dim} coordinates, got {p.shape[-1]}")
    return space.lift(p)


def origin(space, *batch):
    return space.origin(*batch)
