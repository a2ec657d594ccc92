"""Nonlinear transient heat conduction on hexahedral meshes.

Galerkin finite elements with trilinear shape functions, backward-Euler
time stepping and Newton iteration.  The governing operator is the
divergence form div(k(T) grad T) = rho Cp(T) dT/dt, with

    S1: imposed inward heat flux q(x, y; t) along the outward normal,
    S2: gray-body radiation sigma*eps*(T^4 - T_amb^4) leaving the body
        (optionally replaced by a fixed-temperature condition),
    S3: insulated.

Material properties are evaluated at the current Newton iterate's
quadrature-point temperatures (fully implicit).  The Newton matrix carries
the dk/dT conduction term and the 4*sigma*eps*T^3 radiation term; the
dCp/dT capacity term is omitted (it only affects the convergence rate, not
the converged state, and stays far from dominant at these heating rates).

Volume integrals use 2x2x2 Gauss points, boundary faces 2x2.  All solver
arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry
from .errors import DimensionError, InvertedElementError, SolverError
from .geometry import Mesh, shape_gradients_local, shape_values_local
from .materials import MaterialTable, eval_cp, eval_dk_dT, eval_k

_G = 1.0 / np.sqrt(3.0)

# 2x2x2 Gauss points (unit weights) in the hex reference cube.
VOLUME_QP = np.array(
    [[sx * _G, sy * _G, sz * _G] for sz in (-1, 1) for sy in (-1, 1) for sx in (-1, 1)]
)

# 2x2 Gauss points (unit weights) on the quad reference square.
FACE_QP = np.array([[sx * _G, sy * _G] for sy in (-1, 1) for sx in (-1, 1)])

FACE_CORNERS = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=np.float64)


def _face_shape_values(point) -> np.ndarray:
    xi, eta = point
    return (1.0 + FACE_CORNERS[:, 0] * xi) * (1.0 + FACE_CORNERS[:, 1] * eta) / 4.0


def _face_shape_gradients(point) -> np.ndarray:
    xi, eta = point
    grad = np.empty((4, 2))
    grad[:, 0] = FACE_CORNERS[:, 0] * (1.0 + FACE_CORNERS[:, 1] * eta) / 4.0
    grad[:, 1] = FACE_CORNERS[:, 1] * (1.0 + FACE_CORNERS[:, 0] * xi) / 4.0
    return grad


@dataclass(frozen=True)
class ShapeEval:
    """Trilinear shape data at one quadrature point of one element."""

    N: np.ndarray
    dN_dxyz: np.ndarray
    det_J: float
    weight: float


def shape_eval(element_nodes, local_point, weight: float = 1.0) -> ShapeEval:
    """Shape values and physical-space gradients at a reference point.

    element_nodes: (8, 3) corner coordinates in HEX_CORNERS order.
    local_point: (xi, eta, zeta) in [-1, 1]^3.
    """
    X = np.asarray(element_nodes, dtype=np.float64)
    if X.shape != (8, 3):
        raise DimensionError("element_nodes must have shape (8, 3)")
    N = shape_values_local(local_point)
    dN_local = shape_gradients_local(local_point)
    J = dN_local.T @ X  # J[a, b] = dx_b / dxi_a
    det = float(np.linalg.det(J))
    if det <= 0.0:
        raise InvertedElementError(f"Jacobian determinant {det:.3e} is not positive")
    dN_phys = np.linalg.solve(J, dN_local.T).T
    return ShapeEval(N=N, dN_dxyz=dN_phys, det_J=det, weight=weight)


@dataclass
class SystemMatrices:
    """Assembled global system at one temperature state.

    K: conduction plus linearized-radiation matrix (W/K).
    C: capacity matrix (J/K), row-lumped (diagonal).
    P: load vector (W) = S1 flux load minus the S2 radiation loss
       evaluated at the given temperature (zero at ambient equilibrium).
    """

    K: sp.csr_matrix
    C: sp.csr_matrix
    P: np.ndarray


class _CsrPattern:
    """Fixed sparsity pattern with a scatter map from stacked element entries."""

    def __init__(self, rows: np.ndarray, cols: np.ndarray, n: int):
        keys = rows.astype(np.int64) * n + cols
        unique, inverse = np.unique(keys, return_inverse=True)
        self.scatter = inverse
        self.n = n
        self.nnz = len(unique)
        urows = (unique // n).astype(np.int32)
        ucols = (unique % n).astype(np.int32)
        self.indices = ucols
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, urows + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)

    def build(self, values: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.scatter, weights=values, minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


class MeshQuadrature:
    """Precomputed integration factors for one mesh (geometry-only, reusable)."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        n = mesh.n_nodes
        conn = mesh.elems  # (E, 8)
        coords = mesh.nodes[conn]  # (E, 8, 3)

        self.N_vol = np.stack([shape_values_local(p) for p in VOLUME_QP])  # (8qp, 8)
        dN_local = np.stack([shape_gradients_local(p) for p in VOLUME_QP])  # (8qp, 8, 3)

        J = np.einsum("qia,eib->eqab", dN_local, coords)  # (E, 8qp, 3, 3)
        det = np.linalg.det(J)
        if np.any(det <= 0.0):
            raise InvertedElementError("mesh contains an element with non-positive Jacobian")
        invJ = np.linalg.inv(J)
        self.dN = np.einsum("qia,eqba->eqib", dN_local, invJ)  # (E, 8qp, 8, 3)
        self.detw = det  # unit quadrature weights

        assert np.allclose(self.N_vol.sum(axis=1), 1.0, atol=1e-12)
        assert np.allclose(self.dN.sum(axis=2), 0.0, atol=1e-9)

        # Boundary face factors (S1 flux, S2 radiation).
        self.N_face = np.stack([_face_shape_values(p) for p in FACE_QP])  # (4qp, 4)
        dNf = np.stack([_face_shape_gradients(p) for p in FACE_QP])  # (4qp, 4, 2)

        def face_factors(faces):
            fc = mesh.nodes[faces]  # (F, 4, 3)
            t = np.einsum("qia,eib->eqab", dNf, fc)  # (F, 4qp, 2, 3) tangents
            normal = np.cross(t[:, :, 0, :], t[:, :, 1, :])
            areaw = np.linalg.norm(normal, axis=2)  # (F, 4qp)
            pos = np.einsum("qi,eib->eqb", self.N_face, fc)  # (F, 4qp, 3)
            return areaw, pos

        self.s1_areaw, self.s1_qp_pos = face_factors(mesh.s1_faces)
        self.s2_areaw, _ = face_factors(mesh.s2_faces)

        # Scatter pattern for volume + S2 entries (conduction, radiation,
        # and the Newton matrix share it).
        vr = np.repeat(conn, 8, axis=1).ravel()
        vc = np.tile(conn, (1, 8)).ravel()
        fr = np.repeat(mesh.s2_faces, 4, axis=1).ravel()
        fc_ = np.tile(mesh.s2_faces, (1, 4)).ravel()
        self.pattern_full = _CsrPattern(np.concatenate([vr, fr]), np.concatenate([vc, fc_]), n)
        self._n_vol_entries = vr.size

    def full_values(self, vol_vals: np.ndarray, s2_vals) -> np.ndarray:
        if s2_vals is None:
            s2_vals = np.zeros(self.pattern_full.scatter.size - self._n_vol_entries)
        return np.concatenate([vol_vals.ravel(), np.asarray(s2_vals).ravel()])


def _flux_at_s1_qp(quad: MeshQuadrature, flux_t: np.ndarray) -> np.ndarray:
    """Interpolate a flux-grid slice (G, G) onto S1 quadrature points, (F1, 4qp)."""
    flux_t = np.asarray(flux_t, dtype=np.float64)
    if flux_t.ndim != 2 or flux_t.shape[0] != flux_t.shape[1]:
        raise DimensionError(f"flux slice must be square (G, G), got {flux_t.shape}")
    g = flux_t.shape[0]
    lx, ly = quad.mesh.footprint
    xs = (np.arange(g) + 0.5) * lx / g
    ys = (np.arange(g) + 0.5) * ly / g
    pos = quad.s1_qp_pos
    return geometry.bilinear_sample(flux_t, xs, ys, pos[..., 0], pos[..., 1])


class _Components:
    """Per-iterate integrals shared by the residual and the Newton matrix.

    The capacity matrix is row-lumped (diagonal).  Lumping preserves total
    enthalpy exactly and removes the small below-ambient undershoot that a
    consistent mass matrix produces near sharp heating fronts.
    """

    def __init__(self, quad, material, T, ambient, flux_qp, jacobian_extra=True):
        mesh = quad.mesh
        conn = mesh.elems
        Te = T[conn]  # (E, 8)
        Tq = Te @ quad.N_vol.T  # (E, 8qp)

        k = eval_k(material, Tq)
        cp = eval_cp(material, Tq)

        kw_dN = quad.dN * (k * quad.detw)[:, :, None, None]  # (E, 8qp, 8, 3)
        self.vals_K1 = np.matmul(kw_dN, quad.dN.transpose(0, 1, 3, 2)).sum(axis=1)

        # Row-lumped capacity: int rho cp N_i dOmega per element node.
        self.cap_diag = (material.rho * cp * quad.detw) @ quad.N_vol  # (E, 8)

        if jacobian_extra:
            gradT = np.matmul(quad.dN.transpose(0, 1, 3, 2), Te[:, None, :, None])
            gdn = np.matmul(quad.dN, gradT)[..., 0]  # (E, 8qp, 8) dN_i . grad T
            dkw = eval_dk_dT(material, Tq) * quad.detw
            self.vals_G = np.matmul((dkw[:, :, None] * gdn).transpose(0, 2, 1), quad.N_vol)
        else:
            self.vals_G = None

        # S2 radiation at face quadrature temperatures.
        se = material.sigma * material.emissivity
        Tf = T[mesh.s2_faces] @ quad.N_face.T  # (F2, 4qp)
        self.rad_qp = se * (Tf**4 - ambient**4) * quad.s2_areaw
        drad = 4.0 * se * Tf**3 * quad.s2_areaw
        self.vals_K2 = np.einsum("fq,qi,qj->fij", drad, quad.N_face, quad.N_face)

        # Nodal radiation loss vector and S1 flux load vector.
        n = mesh.n_nodes
        r_face = self.rad_qp @ quad.N_face
        self.r_rad = np.bincount(mesh.s2_faces.ravel(), weights=r_face.ravel(), minlength=n)
        f_face = (flux_qp * quad.s1_areaw) @ quad.N_face
        self.f_flux = np.bincount(mesh.s1_faces.ravel(), weights=f_face.ravel(), minlength=n)

        self._quad = quad
        self._conn = conn

    def residual(self, T, T_old, dt) -> np.ndarray:
        quad, conn = self._quad, self._conn
        n = quad.mesh.n_nodes
        # conduction int k grad(N_i).grad(T) plus lumped capacity int rho cp N_i dT/dt
        cond = np.matmul(self.vals_K1, T[conn][:, :, None])[..., 0]
        cap = self.cap_diag * (T - T_old)[conn] / dt
        r = np.bincount(conn.ravel(), weights=(cond + cap).ravel(), minlength=n)
        return r + self.r_rad - self.f_flux

    def capacity_diagonal(self) -> np.ndarray:
        n = self._quad.mesh.n_nodes
        return np.bincount(self._conn.ravel(), weights=self.cap_diag.ravel(), minlength=n)

    def jacobian(self, dt) -> sp.csr_matrix:
        quad = self._quad
        vol = self.vals_K1 if self.vals_G is None else self.vals_K1 + self.vals_G
        vol = vol.copy()
        idx = np.arange(8)
        vol[:, idx, idx] += self.cap_diag / dt
        return quad.pattern_full.build(quad.full_values(vol, self.vals_K2))


def assemble(
    mesh: Mesh,
    material: MaterialTable,
    T_current: np.ndarray,
    flux_t: np.ndarray,
    ambient: float,
    quad: MeshQuadrature | None = None,
) -> SystemMatrices:
    """Global matrices and load vector at one temperature state.

    K sums conduction (k at quadrature temperatures) and the radiation
    term linearized about T_current; C is the capacity matrix; P is the
    S1 flux load minus the S2 radiation loss at T_current.
    """
    T_current = np.asarray(T_current, dtype=np.float64)
    if T_current.shape != (mesh.n_nodes,):
        raise DimensionError("T_current length must equal the node count")
    quad = quad or MeshQuadrature(mesh)
    flux_qp = _flux_at_s1_qp(quad, flux_t)
    comp = _Components(quad, material, T_current, ambient, flux_qp, jacobian_extra=False)
    K = quad.pattern_full.build(quad.full_values(comp.vals_K1, comp.vals_K2))
    C = sp.diags(comp.capacity_diagonal(), format="csr")
    P = comp.f_flux - comp.r_rad
    return SystemMatrices(K=K, C=C, P=P)


def linear_solve(K_eff, rhs: np.ndarray) -> np.ndarray:
    """Solve one Newton linear system.

    Symmetric positive-definite systems use conjugate gradients with Jacobi
    preconditioning to a relative residual below 1e-10.  Mildly
    non-symmetric systems (the dk/dT Newton term) use Jacobi-preconditioned
    BiCGSTAB with a sparse-LU fallback.
    """
    b = np.asarray(rhs, dtype=np.float64)
    if sp.issparse(K_eff):
        A = K_eff.tocsr()
    else:
        A = sp.csr_matrix(np.asarray(K_eff, dtype=np.float64))
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise DimensionError("matrix must be square with matching rhs length")

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)

    asym = abs(A - A.T).max() if A.nnz else 0.0
    diag = A.diagonal()
    if asym <= 1e-12 * max(abs(A).max(), 1e-300) and np.all(diag > 0.0):
        return _pcg_jacobi(A, b, bnorm, diag)

    if np.all(diag > 0.0):
        M = sp.diags(1.0 / diag)
        x, info = spla.bicgstab(A, b, M=M, rtol=1e-12, atol=0.0, maxiter=n)
        if info == 0 and np.linalg.norm(b - A @ x) <= 1e-10 * bnorm:
            return x

    try:
        lu = spla.splu(A.tocsc())
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SolverError(f"sparse LU factorization failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("linear system is singular or badly scaled")
    return x


def _pcg_jacobi(A, b, bnorm, diag, rtol=1e-11):
    # Iteration cap: exact CG terminates within n steps, but rounding can
    # push practical convergence slightly past n, so allow 2n + 10.
    n = A.shape[0]
    inv_d = 1.0 / diag
    x = np.zeros(n)
    r = b.copy()
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for _ in range(2 * n + 10):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0 or not np.isfinite(pAp):
            raise SolverError("conjugate gradient breakdown: matrix not positive definite")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rtol * bnorm:
            return x
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        "conjugate gradient did not converge within the node count",
        residual_norm=float(np.linalg.norm(r)),
    )


@dataclass
class ThermalState:
    """Nodal temperatures (K) at simulation time t (s)."""

    T: np.ndarray
    t: float


class TransientSolver:
    """Backward-Euler march with Newton iteration on one mesh.

    bottom selects the S2 condition: "radiation" (default) or "fixed",
    which clamps every bottom node to ``bottom_temperature`` (a test and
    verification configuration; radiation is then disabled).
    """

    def __init__(
        self,
        mesh: Mesh,
        material: MaterialTable,
        ambient: float,
        *,
        bottom: str = "radiation",
        bottom_temperature: float | None = None,
        newton_tol: float = 1e-6,
        max_newton_iter: int = 25,
    ):
        if bottom not in ("radiation", "fixed"):
            raise DimensionError(f"unknown bottom condition {bottom!r}")
        if bottom == "fixed" and bottom_temperature is None:
            raise DimensionError("fixed bottom requires bottom_temperature")
        self.mesh = mesh
        self.material = material
        self.ambient = float(ambient)
        self.bottom = bottom
        self.bottom_temperature = bottom_temperature
        self.newton_tol = newton_tol
        self.max_newton_iter = max_newton_iter
        self.last_newton_iterations = 0
        self.quad = MeshQuadrature(mesh)

        if bottom == "fixed":
            nbot = (mesh.nx + 1) * (mesh.ny + 1)  # bottom layer occupies ids [0, nbot)
            self._fixed = np.arange(nbot)
            self._free = np.arange(nbot, mesh.n_nodes)
        else:
            self._fixed = None
            self._free = None

    def _radiation_active(self) -> bool:
        return self.bottom == "radiation"

    def newton_step(self, state: ThermalState, flux_t: np.ndarray, dt: float) -> ThermalState:
        """Advance one backward-Euler step of length dt from ``state``."""
        if dt <= 0.0:
            raise DimensionError("dt must be positive")
        flux_qp = _flux_at_s1_qp(self.quad, flux_t)
        T_new = self._march(state.T, flux_qp, dt)
        return ThermalState(T=T_new, t=state.t + dt)

    def _march(self, T_old: np.ndarray, flux_qp: np.ndarray, dt: float) -> np.ndarray:
        material = self.material if self._radiation_active() else _without_radiation(self.material)
        T = T_old.copy()
        if self._fixed is not None:
            T[self._fixed] = self.bottom_temperature
        residual_norm = np.inf
        for it in range(1, self.max_newton_iter + 1):
            comp = _Components(self.quad, material, T, self.ambient, flux_qp)
            R = comp.residual(T, T_old, dt)
            J = comp.jacobian(dt)
            if self._free is not None:
                free = self._free
                dT = linear_solve(J[free][:, free], -R[free])
                T[free] += dT
            else:
                dT = linear_solve(J, -R)
                T += dT
            if not np.all(np.isfinite(T)):
                raise SolverError("Newton iterate became non-finite")
            residual_norm = float(np.linalg.norm(R))
            if np.max(np.abs(dT)) < self.newton_tol:
                self.last_newton_iterations = it
                return T
        raise SolverError(
            f"Newton did not converge in {self.max_newton_iter} iterations",
            residual_norm=residual_norm,
        )

    def solve(self, flux_history: np.ndarray, T0: float, dt: float):
        """March Nt steps from the uniform initial condition T0.

        flux_history: (Nt, G, G) inward flux on the sampling grid; the slice
        at index k drives step k and produces recorded frame k (the known
        initial frame is not recorded).  Returns (sensor readings
        (Nt, G, G), final ThermalState).
        """
        flux_history = np.asarray(flux_history, dtype=np.float64)
        if flux_history.ndim != 3:
            raise DimensionError("flux_history must have shape (Nt, G, G)")
        if dt <= 0.0:
            raise DimensionError("dt must be positive")
        g = flux_history.shape[1]
        sensors = geometry.sensor_layout(self.mesh, grid=g)

        nt = flux_history.shape[0]
        T = np.full(self.mesh.n_nodes, float(T0))
        state = ThermalState(T=T, t=0.0)
        readings = np.empty((nt, g, g))
        for k in range(nt):
            try:
                state = self.newton_step(state, flux_history[k], dt)
            except SolverError as exc:
                raise SolverError(
                    f"step {k} failed: {exc}",
                    residual_norm=exc.residual_norm,
                    step_index=k,
                ) from exc
            readings[k] = state.T[sensors.node_ids].reshape(g, g)
        return readings, state


def _without_radiation(material: MaterialTable) -> MaterialTable:
    if material.emissivity == 0.0:
        return material
    return MaterialTable(
        k_table=material.k_table,
        cp_table=material.cp_table,
        rho=material.rho,
        emissivity=0.0,
        name=material.name,
    )


def newton_step_transient(
    solver: TransientSolver,
    state: ThermalState,
    flux_t: np.ndarray,
    dt: float,
    tol: float | None = None,
    max_iter: int | None = None,
) -> ThermalState:
    """One implicit step; thin functional wrapper over TransientSolver."""
    if tol is not None:
        solver.newton_tol = tol
    if max_iter is not None:
        solver.max_newton_iter = max_iter
    return solver.newton_step(state, flux_t, dt)


def solve_transient(
    mesh: Mesh,
    material: MaterialTable,
    flux_history: np.ndarray,
    T0: float,
    dt: float,
    *,
    ambient: float | None = None,
    bottom: str = "radiation",
    bottom_temperature: float | None = None,
    newton_tol: float = 1e-6,
    max_newton_iter: int = 25,
):
    """Full transient solve; see TransientSolver.solve for the contract."""
    solver = TransientSolver(
        mesh,
        material,
        ambient=T0 if ambient is None else ambient,
        bottom=bottom,
        bottom_temperature=bottom_temperature,
        newton_tol=newton_tol,
        max_newton_iter=max_newton_iter,
    )
    return solver.solve(flux_history, T0, dt)
