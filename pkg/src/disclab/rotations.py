"""SO(2) and SO(3) helpers: angles, unit quaternions, uniform sampling."""
import numpy as np

from .errors import LabError


def angle_matrix(theta):
    """Rotation matrices for angles of shape (...,) -> (..., 2, 2)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def quat_matrix(q):
    """Rotation matrices for unit quaternions (w, x, y, z), shape (..., 4)."""
    q = np.asarray(q, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], -2)


def quat_from_uniform(u):
    """Shoemake's map from three uniforms in [0,1) to Haar-uniform quaternions."""
    u = np.asarray(u, dtype=np.float64)
    u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2]
    a, b = np.sqrt(1 - u1), np.sqrt(u1)
    t2, t3 = 2 * np.pi * u2, 2 * np.pi * u3
    return np.stack([b * np.cos(t3), a * np.sin(t2), a * np.cos(t2), b * np.sin(t3)], -1)


def rotation_dims(d):
    """Number of uniforms needed to draw one rotation in SO(d)."""
    if d == 2:
        return 1
    if d == 3:
        return 3
    raise LabError(f"dimension {d} not supported (only d = 2 or 3)")


def rotations_from_uniform(u, d):
    """Angles (d=2) or quaternions (d=3) from uniforms of shape (n, rotation_dims(d))."""
    u = np.asarray(u, dtype=np.float64).reshape(-1, rotation_dims(d))
    if d == 2:
        return 2 * np.pi * u[:, 0]
    return quat_from_uniform(u)


def rotation_matrices(rot, d):
    if d == 2:
        return angle_matrix(np.asarray(rot, dtype=np.float64))
    if d == 3:
        return quat_matrix(rot)
    raise LabError(f"dimension {d} not supported (only d = 2 or 3)")
