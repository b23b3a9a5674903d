"""Position estimation from labeled arrival times.

Differencing every labeled arrival against the smallest one cancels the
unknown clock offset and leaves range differences to the anchor tiles.  For
anchor sets spanning 3-D the classic two-step linear system applies: solve the
stacked linear equations for the position as an affine function of the
unknown reference range, then close the loop with the scalar quadratic that
the reference-range definition imposes.  Anchor sets that are (nearly)
collinear, such as a linear RIS, make the linear system rank deficient; a
damped Gauss-Newton fit over the ground plane is used instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import SPEED_OF_LIGHT


class PositionEstimationError(RuntimeError):
    """Raised when neither solve path produces an acceptable estimate."""

    def __init__(self, message: str, best_estimate: np.ndarray | None = None):
        super().__init__(message)
        self.best_estimate = best_estimate


@dataclass(frozen=True)
class TdoaSystem:
    """Stacked range-difference equations relative to the reference anchor."""

    a_matrix: np.ndarray  # (rows, 3) anchor offsets from the reference
    c_vector: np.ndarray  # (rows,) negated range differences
    b_vector: np.ndarray  # (rows,) constant terms
    ref_tile: int
    ref_pos: np.ndarray
    anchor_positions: np.ndarray  # (rows, 3) non-reference anchors
    gammas: np.ndarray  # (rows,) range differences of non-reference anchors
    gamma_by_tile: dict[int, float]  # includes the reference at 0.0


def build_system(labels, tile_positions: np.ndarray, p_bs) -> TdoaSystem:
    """Assemble the linear system from labeled arrivals.

    ``labels`` is an iterable of ``(toa_seconds, tile_index)`` pairs (or any
    object exposing such pairs via ``.entries``); ``tile_positions`` holds all
    tile centers with tile index k (1-based) at row k-1.  The reference is the
    labeled tile with the smallest arrival time.  Range differences are formed
    as ``c*(toa_k - toa_ref) - (d_bs_k - d_bs_ref)`` so the clock offset and
    the known BS legs both cancel.
    """
    entries = list(getattr(labels, "entries", labels))
    if len(entries) < 3:
        raise ValueError("need at least 3 labeled arrivals")
    tiles = [int(t) for _, t in entries]
    if len(set(tiles)) != len(tiles):
        raise ValueError("duplicate tile labels")
    p_bs = np.asarray(p_bs, dtype=float)
    tile_positions = np.asarray(tile_positions, dtype=float)

    toas = np.array([t for t, _ in entries])
    ref_i = min(range(len(entries)), key=lambda i: (toas[i], tiles[i]))
    ref_tile = tiles[ref_i]
    ref_pos = tile_positions[ref_tile - 1]
    d_bs_ref = np.linalg.norm(p_bs - ref_pos)

    rows, cvec, bvec, gammas, anchors = [], [], [], [], []
    gamma_by_tile = {ref_tile: 0.0}
    for i, (tau, k) in enumerate(zip(toas, tiles)):
        if i == ref_i:
            continue
        pos = tile_positions[k - 1]
        d_bs_k = np.linalg.norm(p_bs - pos)
        gamma = (tau - toas[ref_i]) * SPEED_OF_LIGHT - (d_bs_k - d_bs_ref)
        gamma_by_tile[k] = gamma
        rows.append(pos - ref_pos)
        cvec.append(-gamma)
        bvec.append(
            0.5
            * (
                np.dot(pos, pos)
                - np.dot(ref_pos, ref_pos)
                - gamma * gamma
            )
        )
        gammas.append(gamma)
        anchors.append(pos)
    return TdoaSystem(
        a_matrix=np.array(rows),
        c_vector=np.array(cvec),
        b_vector=np.array(bvec),
        ref_tile=ref_tile,
        ref_pos=ref_pos,
        anchor_positions=np.array(anchors),
        gammas=np.array(gammas),
        gamma_by_tile=gamma_by_tile,
    )


def _range_diff_residuals(p: np.ndarray, system: TdoaSystem) -> np.ndarray:
    d_ref = np.linalg.norm(p - system.ref_pos)
    d = np.linalg.norm(p - system.anchor_positions, axis=1)
    return system.gammas - (d - d_ref)


def _solve_quadratic_path(
    system: TdoaSystem, room, rtol: float, row_weights: np.ndarray | None = None
) -> np.ndarray | None:
    a_mat = system.a_matrix
    rhs = np.column_stack([system.c_vector, system.b_vector])
    if row_weights is not None:
        w = np.sqrt(row_weights)[:, None]
        a_mat = a_mat * w
        rhs = rhs * w
    sol, *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
    g, h = sol[:, 0], sol[:, 1]
    diff = h - system.ref_pos
    qa = float(np.dot(g, g) - 1.0)
    qb = 2.0 * float(np.dot(g, diff))
    qc = float(np.dot(diff, diff))

    roots = []
    if abs(qa) < 1e-14:
        if abs(qb) > 1e-300:
            roots = [-qc / qb]
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc >= 0.0:
            sq = np.sqrt(disc)
            roots = [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)]
    candidates = []
    for d_ref in roots:
        if d_ref <= 0.0:
            continue
        p = g * d_ref + h
        if room is not None and not _in_room(p, room, rtol):
            continue
        res = float(np.sum(np.abs(_range_diff_residuals(p, system))))
        candidates.append((res, p))
    if not candidates:
        return None
    return min(candidates, key=lambda t: t[0])[1]


def _in_room(p: np.ndarray, room, tol: float) -> bool:
    lo, hi = np.asarray(room[0], dtype=float), np.asarray(room[1], dtype=float)
    return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))


class _ResidualWhitener:
    """Inverse covariance of the range-difference residuals.

    The reference anchor's range error is common to every residual, so the
    covariance is diagonal plus a rank-one term; the inverse is applied with
    the Sherman-Morrison identity.  With no sigmas this is the identity and
    the fit reduces to plain least squares.
    """

    def __init__(self, sigmas: np.ndarray | None, sigma_ref: float, n: int):
        if sigmas is None:
            self._dinv = None
            return
        sigmas = np.asarray(sigmas, dtype=float)
        if sigmas.shape != (n,):
            raise ValueError("sigmas must have one entry per non-reference anchor")
        self._dinv = 1.0 / np.maximum(sigmas, 1e-30) ** 2
        self._s2_ref = float(sigma_ref) ** 2
        self._denom = 1.0 + self._s2_ref * np.sum(self._dinv)

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self._dinv is None:
            return v
        dv = self._dinv * v
        return dv - self._dinv * (self._s2_ref * np.sum(dv) / self._denom)


def _anchor_line_mirror(system: TdoaSystem, xy: np.ndarray) -> np.ndarray | None:
    """Reflect a floor point about the anchor line's floor projection.

    TDoA costs around a near-collinear anchor array are mirror symmetric
    about the array line, so the reflection of a spurious fit often sits in
    the true solution's basin.  Returns None when the anchors' floor
    footprint has no dominant direction.
    """
    points = np.vstack([system.anchor_positions, system.ref_pos[None, :]])[:, :2]
    centroid = points.mean(axis=0)
    centered = points - centroid
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] < 1e-9:
        return None
    e = vt[0]
    delta = xy - centroid
    return centroid + 2.0 * np.dot(delta, e) * e - delta


def _gn_descend(
    system: TdoaSystem,
    start_xy: np.ndarray,
    room,
    ground_z: float,
    max_iter: int,
    whitener: _ResidualWhitener,
) -> tuple[np.ndarray, float, bool]:
    """Clamped, damped Gauss-Newton from one start; returns (p, cost, done)."""
    if room is not None:
        lo = np.asarray(room[0], dtype=float)[:2]
        hi = np.asarray(room[1], dtype=float)[:2]
        start_xy = np.clip(start_xy, lo, hi)
    p = np.array([start_xy[0], start_xy[1], ground_z])

    def cost_of(r):
        return float(np.dot(r, whitener.apply(r)))

    lam = 1e-3
    r = _range_diff_residuals(p, system)
    cost = cost_of(r)
    for _ in range(max_iter):
        d_ref = max(np.linalg.norm(p - system.ref_pos), 1e-12)
        d = np.maximum(np.linalg.norm(p - system.anchor_positions, axis=1), 1e-12)
        # d(residual)/d(p) = -(unit_k - unit_ref), restricted to x, y
        unit_k = (p[None, :2] - system.anchor_positions[:, :2]) / d[:, None]
        unit_ref = (p[:2] - system.ref_pos[:2]) / d_ref
        jac = -(unit_k - unit_ref[None, :])
        jt_si = np.column_stack(
            [whitener.apply(jac[:, 0]), whitener.apply(jac[:, 1])]
        ).T
        jtj = jt_si @ jac
        jtr = jt_si @ r
        accepted = False
        while lam < 1e14:
            try:
                step = np.linalg.solve(jtj + lam * np.eye(2), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p.copy()
            trial[:2] = p[:2] + step
            if room is not None:
                trial[:2] = np.clip(trial[:2], lo, hi)
            r_trial = _range_diff_residuals(trial, system)
            cost_trial = cost_of(r_trial)
            if cost_trial <= cost:
                moved = float(np.linalg.norm(trial - p))
                p, r, cost = trial, r_trial, cost_trial
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                if moved < 1e-11:
                    return p, cost, True
                break
            lam *= 10.0
        if not accepted:
            # damping exhausted: gradient numerically stationary
            return p, cost, True
    return p, cost, False


def _gauss_newton_ground(
    system: TdoaSystem,
    room,
    ground_z: float,
    max_iter: int,
    whitener: _ResidualWhitener,
) -> tuple[np.ndarray, bool]:
    """Ground-plane nonlinear fit: center start plus deterministic restarts.

    The primary descent starts at the room center; its endpoint reflected
    about the anchor line and the four room quadrant midpoints seed further
    descents.  The lowest-cost endpoint wins, which resolves the mirror
    ambiguity of near-collinear anchor geometries that traps a single
    clamped descent on the room boundary.
    """
    if room is not None:
        lo, hi = np.asarray(room[0], dtype=float), np.asarray(room[1], dtype=float)
        center = 0.5 * (lo[:2] + hi[:2])
    else:
        center = np.mean(system.anchor_positions[:, :2], axis=0)
    best_p, best_cost, done = _gn_descend(
        system, center, room, ground_z, max_iter, whitener
    )
    any_done = done

    starts = []
    mirrored = _anchor_line_mirror(system, best_p[:2])
    if mirrored is not None:
        starts.append(mirrored)
    if room is not None:
        qx = (0.75 * lo[0] + 0.25 * hi[0], 0.25 * lo[0] + 0.75 * hi[0])
        qy = (0.75 * lo[1] + 0.25 * hi[1], 0.25 * lo[1] + 0.75 * hi[1])
        starts.extend(np.array([x, y]) for x in qx for y in qy)
    for start in starts:
        p, cost, done = _gn_descend(
            system, np.asarray(start, dtype=float), room, ground_z, max_iter, whitener
        )
        any_done = any_done or done
        if cost < best_cost:
            best_p, best_cost = p, cost
    return best_p, any_done


def solve_position(
    system: TdoaSystem,
    ref_pos=None,
    room=None,
    *,
    sigmas: np.ndarray | None = None,
    sigma_ref: float = 0.0,
    ground_z: float = 0.0,
    cond_threshold: float = 1e8,
    max_iter: int = 100,
    room_tol: float = 1e-6,
) -> np.ndarray:
    """Estimate the source position from a built system.

    The closed-form path runs when the anchor offset matrix has full column
    rank (condition number below ``cond_threshold``); the admissible root is
    the positive reference range whose position falls inside ``room`` (ties
    resolve by range-difference residual).  Rank-deficient geometries and
    root failures fall back to the ground-plane Gauss-Newton fit.  Raises
    :class:`PositionEstimationError` with the best iterate if that fit does
    not converge within ``max_iter`` iterations.

    With ``sigmas`` (per non-reference anchor, ordered like the system rows)
    and ``sigma_ref`` the fit becomes a generalized least squares: the
    reference anchor's range error is common mode across residuals, so the
    covariance is diagonal plus rank one.  Without them the fit is the plain
    unweighted sum of squares.
    """
    if ref_pos is not None and not np.allclose(ref_pos, system.ref_pos):
        raise ValueError("ref_pos does not match the system's reference anchor")
    whitener = _ResidualWhitener(sigmas, sigma_ref, len(system.gammas))
    svals = np.linalg.svd(system.a_matrix, compute_uv=False)
    full_rank = (
        system.a_matrix.shape[0] >= 3
        and svals[-1] > 0
        and svals[0] / svals[-1] < cond_threshold
    )
    if full_rank:
        row_weights = None
        if sigmas is not None:
            row_weights = 1.0 / np.maximum(np.asarray(sigmas, dtype=float), 1e-30) ** 2
        p = _solve_quadratic_path(system, room, room_tol, row_weights)
        if p is not None:
            return p
    p, converged = _gauss_newton_ground(system, room, ground_z, max_iter, whitener)
    if not converged:
        raise PositionEstimationError(
            "position fit did not converge", best_estimate=p
        )
    return p
