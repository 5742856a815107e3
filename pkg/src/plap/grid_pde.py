"""2-D finite-difference solver and diagnostics for the quasi-linear eigen-equation.

Discretization is the standard 5-point divergence form: face-centered
gradients (normal component by direct difference, transverse component by
averaging the four neighboring centered differences), nonlinear diffusivity
(|grad v|^2 + eps^2)^((p-2)/2) evaluated per face, divergence by face-flux
differences.  The formally linearized operator uses the same face geometry
with the rank-one tensor correction, which makes the damped Newton iteration
and the linearized-operator diagnostics share one discretization.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import DomainError, NoConvergence
from .indicial import ProblemParams, eigen_rate_alpha

PLF2_MAGIC = b"PLF2"
DAMPING_FLOOR = 2.0 ** -30


@dataclass
class Field2D:
    """Positive scalar grid function on a rectangle with uniform spacing h.

    values[i, j] sits at (origin[0] + i*h, origin[1] + j*h).
    """

    nx: int
    ny: int
    h: float
    origin: tuple
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.nx, self.ny):
            raise DomainError("values must have shape (nx, ny)")
        if self.h <= 0.0:
            raise DomainError("h must be positive")
        if not np.all(self.values > 0.0):
            raise DomainError("field values must be positive")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    def x_coords(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    def y_coords(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)


@dataclass(frozen=True)
class SolveStats:
    newton_iters: int
    final_residual: float
    damping_events: int
    epsilon: float


def _check_unit(vec):
    vec = np.asarray(vec, dtype=float)
    if abs(float(np.linalg.norm(vec)) - 1.0) > 1e-14:
        raise DomainError("direction must be a unit vector")
    return vec


def _grid_shape(rect, h):
    x0, y0, x1, y1 = (float(c) for c in rect)
    if not (x1 > x0 and y1 > y0):
        raise DomainError("rectangle must have positive extent")
    nx = int(round((x1 - x0) / h)) + 1
    ny = int(round((y1 - y0) / h)) + 1
    if abs(x0 + (nx - 1) * h - x1) > 1e-9 * max(1.0, abs(x1)) or \
       abs(y0 + (ny - 1) * h - y1) > 1e-9 * max(1.0, abs(y1)):
        raise DomainError("h must divide the rectangle extents")
    if nx < 3 or ny < 3:
        raise DomainError("grid needs at least one interior node per axis")
    return x0, y0, nx, ny


def exponential_field(alpha, xi, rect, h, scale=1.0) -> Field2D:
    """Field scale*exp(alpha*<x, xi>) sampled on the rectangle grid."""
    xi = _check_unit(xi)
    x0, y0, nx, ny = _grid_shape(rect, h)
    x = x0 + h * np.arange(nx)
    y = y0 + h * np.arange(ny)
    phase = alpha * (xi[0] * x[:, None] + xi[1] * y[None, :])
    return Field2D(nx=nx, ny=ny, h=h, origin=(x0, y0), values=scale * np.exp(phase))


def field_from_values(values, rect, h) -> Field2D:
    x0, y0, nx, ny = _grid_shape(rect, h)
    return Field2D(nx=nx, ny=ny, h=h, origin=(x0, y0), values=values)


# --- face machinery -------------------------------------------------------

def _face_gradients(v, h):
    """Normal and transverse gradient components on x- and y-faces."""
    dvx = (v[1:, 1:-1] - v[:-1, 1:-1]) / h                       # (nx-1, ny-2)
    dvy_x = (v[:-1, 2:] - v[:-1, :-2] + v[1:, 2:] - v[1:, :-2]) / (4.0 * h)
    dvy = (v[1:-1, 1:] - v[1:-1, :-1]) / h                       # (nx-2, ny-1)
    dvx_y = (v[2:, :-1] - v[:-2, :-1] + v[2:, 1:] - v[:-2, 1:]) / (4.0 * h)
    return dvx, dvy_x, dvy, dvx_y


def p_laplace_residual(field: Field2D, p, lam, epsilon=0.0) -> np.ndarray:
    """Interior residual of -div((|grad v|^2+eps^2)^((p-2)/2) grad v) + lam v^(p-1).

    Returns an (nx-2, ny-2) array over the interior nodes; O(h^2) consistent
    for smooth positive fields away from critical points when epsilon = 0.
    """
    v, h = field.values, field.h
    dvx, dvy_x, dvy, dvx_y = _face_gradients(v, h)
    kx = (dvx ** 2 + dvy_x ** 2 + epsilon ** 2) ** ((p - 2.0) / 2.0)
    ky = (dvy ** 2 + dvx_y ** 2 + epsilon ** 2) ** ((p - 2.0) / 2.0)
    fx = kx * dvx
    fy = ky * dvy
    div = (fx[1:, :] - fx[:-1, :]) / h + (fy[:, 1:] - fy[:, :-1]) / h
    return -div + lam * v[1:-1, 1:-1] ** (p - 1.0)


def _linearized_face_coeffs(base, p, h, epsilon):
    """Per-face coefficients of the linearized diffusion tensor at `base`.

    On each face the linearized flux in direction g is
        c1 * (normal dg) + c2 * (transverse dg)
    with c1 = k (1 + (p-2) bn^2/s2), c2 = k (p-2) bn bt / s2,
    k = s2^((p-2)/2), s2 = |grad base|^2 + eps^2 at the face.
    """
    dbx, dby_x, dby, dbx_y = _face_gradients(base, h)
    pm2 = p - 2.0

    def coeffs(bn, bt):
        s2 = bn ** 2 + bt ** 2 + epsilon ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            k = s2 ** (pm2 / 2.0)
            c1 = k * (1.0 + pm2 * bn ** 2 / s2)
            c2 = k * pm2 * bn * bt / s2
        flat = s2 == 0.0
        if np.any(flat):
            c1 = np.where(flat, 0.0, c1)
            c2 = np.where(flat, 0.0, c2)
        return c1, c2

    c1x, c2x = coeffs(dbx, dby_x)
    c1y, c2y = coeffs(dby, dbx_y)
    return c1x, c2x, c1y, c2y


def _apply_linearized(base, g, p, h, epsilon):
    """Matrix-free action of the linearized divergence operator on g (interior)."""
    c1x, c2x, c1y, c2y = _linearized_face_coeffs(base, p, h, epsilon)
    dgx, dgy_x, dgy, dgx_y = _face_gradients(g, h)
    gx = c1x * dgx + c2x * dgy_x
    gy = c1y * dgy + c2y * dgx_y
    return (gx[1:, :] - gx[:-1, :]) / h + (gy[:, 1:] - gy[:, :-1]) / h


def _stencil_coefficients(base, p, h, epsilon):
    """3x3 stencil of the linearized operator at each interior node."""
    c1x, c2x, c1y, c2y = _linearized_face_coeffs(base, p, h, epsilon)
    e1, e2 = c1x[1:, :], c2x[1:, :]      # east face of each interior node
    w1, w2 = c1x[:-1, :], c2x[:-1, :]
    n1, n2 = c1y[:, 1:], c2y[:, 1:]
    s1, s2 = c1y[:, :-1], c2y[:, :-1]
    h2 = h * h
    sten = {
        (0, 0): -(e1 + w1 + n1 + s1) / h2,
        (1, 0): (e1 + 0.25 * (n2 - s2)) / h2,
        (-1, 0): (w1 - 0.25 * (n2 - s2)) / h2,
        (0, 1): (n1 + 0.25 * (e2 - w2)) / h2,
        (0, -1): (s1 - 0.25 * (e2 - w2)) / h2,
        (1, 1): 0.25 * (e2 + n2) / h2,
        (-1, -1): 0.25 * (w2 + s2) / h2,
        (1, -1): -0.25 * (e2 + s2) / h2,
        (-1, 1): -0.25 * (w2 + n2) / h2,
    }
    return sten


def _newton_matrix(v, p, lam, h, epsilon):
    """Sparse matrix of delta -> -L_v(delta) + (p-1) lam v^(p-2) delta (interior)."""
    nx, ny = v.shape
    mi, mj = nx - 2, ny - 2
    sten = _stencil_coefficients(v, p, h, epsilon)
    idx = np.arange(mi * mj).reshape(mi, mj)
    rows, cols, vals = [], [], []
    for (di, dj), coef in sten.items():
        # neighbor (i+di, j+dj) in interior coordinates (k+di, l+dj)
        k_lo, k_hi = max(0, -di), mi - max(0, di)
        l_lo, l_hi = max(0, -dj), mj - max(0, dj)
        sub_rows = idx[k_lo:k_hi, l_lo:l_hi]
        sub_cols = idx[k_lo + di:k_hi + di, l_lo + dj:l_hi + dj]
        sub_vals = -coef[k_lo:k_hi, l_lo:l_hi]  # Newton operator is -L_v + mass
        rows.append(sub_rows.ravel())
        cols.append(sub_cols.ravel())
        vals.append(sub_vals.ravel())
    mass = (p - 1.0) * lam * v[1:-1, 1:-1] ** (p - 2.0)
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(mass.ravel())
    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mi * mj, mi * mj),
    )
    return mat.tocsc()


def linearized_apply(field: Field2D, g, p, epsilon=0.0, grad_floor=0.0):
    """Discrete linearized operator L_v(g); masked where |grad v| <= grad_floor.

    g is a full (nx, ny) array (its boundary values enter the stencils).
    Returns a masked (nx-2, ny-2) array over the interior nodes.
    """
    v, h = field.values, field.h
    g = np.asarray(g, dtype=float)
    if g.shape != v.shape:
        raise DomainError("direction field must match the grid shape")
    out = _apply_linearized(v, g, p, h, epsilon)
    wx = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2.0 * h)
    wy = (v[1:-1, 2:] - v[1:-1, :-2]) / (2.0 * h)
    grad_mag = np.sqrt(wx ** 2 + wy ** 2)
    return np.ma.masked_array(out, mask=grad_mag <= grad_floor)


def ellipticity_check(grad_v, grad_g, p) -> float:
    """Rayleigh ratio <A(grad_g), grad_g>/|grad_g|^2 of the linearized tensor.

    Equals 1 + (p-2) cos^2(angle between the gradients); always at least
    min(1, p-1).
    """
    gv = np.asarray(grad_v, dtype=float)
    gg = np.asarray(grad_g, dtype=float)
    nv2 = float(np.dot(gv, gv))
    ng2 = float(np.dot(gg, gg))
    if nv2 <= 0.0 or ng2 <= 0.0:
        raise DomainError("both gradients must be nonzero")
    dot = float(np.dot(gv, gg))
    return 1.0 + (p - 2.0) * dot * dot / (nv2 * ng2)


def solve_dirichlet(params: ProblemParams, xi, rect, h, tol=1e-10,
                    max_iters=40, scale=1.0):
    """Damped Newton solve with boundary data scale*exp(alpha <x, xi>).

    The initial guess is the extension of the boundary data to the whole
    rectangle.  Regularization eps = 1e-8 * alpha * max(boundary data) is
    kept under |grad v| throughout.  Raises NoConvergence when max_iters or
    the damping floor is exhausted before final_residual <= tol.

    Only params.p and params.lam enter; the grid realization is 2-D
    regardless of params.n.
    """
    xi = _check_unit(xi)
    p, lam = params.p, params.lam
    if lam <= 0.0:
        raise DomainError("lam must be positive")
    alpha = eigen_rate_alpha(lam, p)
    fld = exponential_field(alpha, xi, rect, h, scale=scale)
    v = fld.values
    epsilon = 1e-8 * alpha * float(v.max())

    def res_norm(arr):
        return float(np.max(np.abs(arr)))

    resid = p_laplace_residual(fld, p, lam, epsilon)
    res = res_norm(resid)
    iters = 0
    damping_events = 0
    while res > tol:
        if iters >= max_iters:
            raise NoConvergence(
                f"residual {res:g} > tol {tol:g} after {iters} iterations "
                "(h too coarse or damping floor hit)"
            )
        mat = _newton_matrix(v, p, lam, fld.h, epsilon)
        delta = splu(mat).solve(-resid.ravel()).reshape(resid.shape)
        theta = 1.0
        while True:
            if theta < DAMPING_FLOOR:
                raise NoConvergence("damping floor reached without residual decrease")
            v_try = v.copy()
            v_try[1:-1, 1:-1] = v[1:-1, 1:-1] + theta * delta
            if np.all(v_try > 0.0):
                try_field = Field2D(nx=fld.nx, ny=fld.ny, h=fld.h,
                                    origin=fld.origin, values=v_try)
                resid_try = p_laplace_residual(try_field, p, lam, epsilon)
                res_try = res_norm(resid_try)
                if res_try < res or res_try <= tol:
                    break
            theta *= 0.5
            damping_events += 1
        v = v_try
        fld = try_field
        resid, res = resid_try, res_try
        iters += 1
    stats = SolveStats(newton_iters=iters, final_residual=res,
                       damping_events=damping_events, epsilon=epsilon)
    return fld, stats


def gradient_log_sup(field: Field2D, via="log") -> float:
    """Max over interior nodes of |grad log v| by centered differences.

    via='log' differences ln(v) directly (exact for exponential data);
    via='ratio' forms |grad v|/v with differences on v itself, which carries
    the usual O(h^2) stencil error.
    """
    v, h = field.values, field.h
    if via == "log":
        w = np.log(v)
        wx = (w[2:, 1:-1] - w[:-2, 1:-1]) / (2.0 * h)
        wy = (w[1:-1, 2:] - w[1:-1, :-2]) / (2.0 * h)
    elif via == "ratio":
        vx = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2.0 * h)
        vy = (v[1:-1, 2:] - v[1:-1, :-2]) / (2.0 * h)
        wx = vx / v[1:-1, 1:-1]
        wy = vy / v[1:-1, 1:-1]
    else:
        raise DomainError("via must be 'log' or 'ratio'")
    return float(np.max(np.sqrt(wx ** 2 + wy ** 2)))


def directional_range(field: Field2D, nu):
    """(min, max) over interior nodes of <grad log v, nu> for a unit nu."""
    nu = _check_unit(nu)
    w = np.log(field.values)
    h = field.h
    wx = (w[2:, 1:-1] - w[:-2, 1:-1]) / (2.0 * h)
    wy = (w[1:-1, 2:] - w[1:-1, :-2]) / (2.0 * h)
    d = nu[0] * wx + nu[1] * wy
    return float(d.min()), float(d.max())


def kappa(p, lam) -> float:
    """Sharp bound ((p-1)^(p-1) lam)^(2/p) on |grad(-(p-1) log v)|^2."""
    return ((p - 1.0) ** (p - 1.0) * lam) ** (2.0 / p)


def kappa_bound_check(field: Field2D, p, lam):
    """(max of f, kappa) where f = |grad w|^2, w = -(p-1) log v."""
    w = -(p - 1.0) * np.log(field.values)
    h = field.h
    wx = (w[2:, 1:-1] - w[:-2, 1:-1]) / (2.0 * h)
    wy = (w[1:-1, 2:] - w[1:-1, :-2]) / (2.0 * h)
    f = wx ** 2 + wy ** 2
    return float(f.max()), kappa(p, lam)


def bochner_residual(field: Field2D, p, lam, threshold=None) -> float:
    """Max pointwise gap in the second-order identity for f = |grad w|^2.

    With w = -(p-1) log v the identity reads
        L_w(f) = 2 f^(p/2-1) w_ij^2 + (p/2-1) |grad f|^2 f^(p/2-2)
                 + p f^(p/2-1) <grad w, grad f>.
    Both sides are discretized (third derivatives by nested second-order
    stencils, hence O(h) overall) and compared where f > threshold
    (default 1e-6 * kappa).  Returns 0 when the mask is empty.
    """
    if threshold is None:
        threshold = 1e-6 * kappa(p, lam)
    v, h = field.values, field.h
    nx, ny = v.shape
    if nx < 7 or ny < 7:
        raise DomainError("grid too small for nested stencils")
    w = -(p - 1.0) * np.log(v)

    wx = (w[2:, 1:-1] - w[:-2, 1:-1]) / (2.0 * h)      # nodes [1..nx-2]
    wy = (w[1:-1, 2:] - w[1:-1, :-2]) / (2.0 * h)
    f_int = wx ** 2 + wy ** 2                          # shape (nx-2, ny-2)
    f_full = np.full_like(w, np.nan)
    f_full[1:-1, 1:-1] = f_int

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # NaN border rows
        lhs_all = _apply_linearized(w, f_full, p, h, 0.0)
    lhs = lhs_all[1:-1, 1:-1]                          # nodes [2..nx-3]

    wxx = (w[2:, 1:-1] - 2.0 * w[1:-1, 1:-1] + w[:-2, 1:-1]) / h ** 2
    wyy = (w[1:-1, 2:] - 2.0 * w[1:-1, 1:-1] + w[1:-1, :-2]) / h ** 2
    wxy = (w[2:, 2:] - w[2:, :-2] - w[:-2, 2:] + w[:-2, :-2]) / (4.0 * h ** 2)
    wij2 = (wxx ** 2 + 2.0 * wxy ** 2 + wyy ** 2)[1:-1, 1:-1]

    fx = (f_int[2:, 1:-1] - f_int[:-2, 1:-1]) / (2.0 * h)
    fy = (f_int[1:-1, 2:] - f_int[1:-1, :-2]) / (2.0 * h)
    grad_f2 = fx ** 2 + fy ** 2
    wf_dot = wx[1:-1, 1:-1] * fx + wy[1:-1, 1:-1] * fy

    f = f_int[1:-1, 1:-1]
    mask = f > threshold
    if not np.any(mask):
        return 0.0
    fm = f[mask]
    rhs = (2.0 * fm ** (p / 2.0 - 1.0) * wij2[mask]
           + (p / 2.0 - 1.0) * grad_f2[mask] * fm ** (p / 2.0 - 2.0)
           + p * fm ** (p / 2.0 - 1.0) * wf_dot[mask])
    return float(np.max(np.abs(lhs[mask] - rhs)))


def representation_quadrature(atoms, lam, x, p=2.0) -> float:
    """Finite-atom superposition sum_i mu_i exp(alpha <x, xi_i>), p = 2 only.

    Warns and returns 0 for an empty atom list (the result is then not a
    positive field).
    """
    if p != 2.0:
        raise DomainError("representation formula is available for p = 2 only")
    alpha = eigen_rate_alpha(lam, p)
    x = np.asarray(x, dtype=float)
    atoms = list(atoms)
    if not atoms:
        warnings.warn("empty atom list: result is not a positive field",
                      stacklevel=2)
        return 0.0
    total = 0.0
    for xi, weight in atoms:
        xi = _check_unit(xi)
        if weight <= 0.0:
            raise DomainError("atom weights must be positive")
        total += weight * math.exp(alpha * float(np.dot(x, xi)))
    return total


def representation_field(atoms, lam, rect, h) -> Field2D:
    """Grid sampling of the finite-atom superposition (p = 2)."""
    x0, y0, nx, ny = _grid_shape(rect, h)
    alpha = eigen_rate_alpha(lam, 2.0)
    x = x0 + h * np.arange(nx)
    y = y0 + h * np.arange(ny)
    vals = np.zeros((nx, ny))
    for xi, weight in atoms:
        xi = _check_unit(xi)
        vals += weight * np.exp(alpha * (xi[0] * x[:, None] + xi[1] * y[None, :]))
    return Field2D(nx=nx, ny=ny, h=h, origin=(x0, y0), values=vals)


# --- serialization --------------------------------------------------------

def write_field_csv(field: Field2D, path):
    """Columns x,y,v in row-major node order."""
    x = field.x_coords()
    y = field.y_coords()
    with open(path, "w", newline="") as fh:
        fh.write(f"# nx={field.nx} ny={field.ny} h={field.h:.17g} "
                 f"origin=({field.origin[0]:.17g},{field.origin[1]:.17g})\n")
        fh.write("x,y,v\n")
        for i in range(field.nx):
            for j in range(field.ny):
                fh.write(f"{x[i]:.17g},{y[j]:.17g},{field.values[i, j]:.17g}\n")


def write_field_plf2(field: Field2D, path):
    """Compact binary grid: magic 'PLF2', uint32 nx, ny, f64 h, ox, oy, then
    nx*ny little-endian f64 values row-major."""
    header = PLF2_MAGIC + struct.pack("<IIddd", field.nx, field.ny, field.h,
                                      field.origin[0], field.origin[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(field.values.astype("<f8").tobytes(order="C"))


def read_field_plf2(path) -> Field2D:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != PLF2_MAGIC:
            raise DomainError(f"bad magic {magic!r}; not a PLF2 grid file")
        nx, ny, h, ox, oy = struct.unpack("<IIddd", fh.read(32))
        data = np.frombuffer(fh.read(8 * nx * ny), dtype="<f8")
    return Field2D(nx=nx, ny=ny, h=h, origin=(ox, oy),
                   values=data.reshape(nx, ny).copy())
