"""Angular geometry of residual-steered queries.

The simulator places a unit reference vector and a unit target vector at a
chosen angle, derives the ideal residual (reference to target), and builds a
synthetic residual of controllable relative magnitude and misalignment angle
out of the reference-target plane. Sweeping the scale applied to the
synthetic residual shows how close the steered query can get to the target:
when the misalignment is small the scale is an effective knob, when it nears
90 degrees scaling up stops helping.

The misalignment of a real query is measured the same way: the angle between
the text residual and the vector from the normalised reference text
embedding to the normalised target image embedding.

Angles are computed with the half-chord arctangent form, which is exact at
0 and stable near 0/180 where arccos loses digits.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass

import numpy as np

from .core import QueryBundle, compute_pdv, normalize
from .errors import (
    AllBundlesDegenerate,
    DegenerateComposed,
    InvalidParameter,
    IoFailure,
    ZeroGT,
    ZeroPDV,
)

DEFAULT_THETA0_DEG = 45.0
DEFAULT_MAG_RATIO = 0.5


def angle_between_deg(u, v) -> float:
    """Angle between two non-zero vectors in degrees, in [0, 180]."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu <= 1e-300 or nv <= 1e-300:
        raise InvalidParameter("angle of a zero vector is undefined")
    a = u / nu
    b = v / nv
    rad = 2.0 * math.atan2(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b)))
    return math.degrees(rad)


@dataclass(frozen=True)
class SimConfig:
    """Grid settings for the misalignment/scale sweep."""

    theta0_deg: float = DEFAULT_THETA0_DEG
    mag_ratio: float = DEFAULT_MAG_RATIO
    phi_grid_deg: tuple = ()
    alpha_grid: tuple = ()
    dim: int = 3
    random_completions: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phi_grid_deg", tuple(float(p) for p in self.phi_grid_deg))
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        if not self.phi_grid_deg or not self.alpha_grid:
            raise InvalidParameter("phi and alpha grids must be non-empty")
        vals = self.phi_grid_deg + self.alpha_grid + (self.theta0_deg, self.mag_ratio)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameter("grid values must be finite")
        if not (0.0 < self.theta0_deg < 180.0):
            raise InvalidParameter(f"theta0_deg must be in (0, 180), got {self.theta0_deg}")
        if self.mag_ratio <= 0:
            raise InvalidParameter(f"mag_ratio must be > 0, got {self.mag_ratio}")
        if self.dim < 3:
            raise InvalidParameter(f"dim must be >= 3, got {self.dim}")

    def to_dict(self) -> dict:
        return {
            "theta0_deg": self.theta0_deg,
            "mag_ratio": self.mag_ratio,
            "phi_grid_deg": list(self.phi_grid_deg),
            "alpha_grid": list(self.alpha_grid),
            "dim": self.dim,
            "random_completions": self.random_completions,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class HeatmapCell:
    phi_deg: float
    alpha: float
    theta_deg: float
    valid: bool = True


def _base_vectors(theta0_deg: float, dim: int):
    t0 = math.radians(theta0_deg)
    ref = np.zeros(dim, dtype=np.float64)
    ref[0] = 1.0
    target = np.zeros(dim, dtype=np.float64)
    target[0] = math.cos(t0)
    target[1] = math.sin(t0)
    gt = target - ref
    return ref, target, gt


def _perp_completion(dim: int, rng: np.random.Generator | None) -> np.ndarray:
    """Unit vector orthogonal to the reference-target plane (axes 0 and 1)."""
    perp = np.zeros(dim, dtype=np.float64)
    if rng is None or dim == 3:
        perp[2] = 1.0
        return perp
    raw = rng.standard_normal(dim)
    raw[0] = 0.0
    raw[1] = 0.0
    n = float(np.linalg.norm(raw))
    if n <= 1e-12:
        perp[2] = 1.0
        return perp
    return raw / n


def simulate_theta(
    theta0_deg: float,
    mag_ratio: float,
    phi_deg: float,
    alpha: float,
    *,
    dim: int = 3,
    rng: np.random.Generator | None = None,
) -> float:
    """Angle (degrees) between the steered query and the target vector.

    The synthetic residual has magnitude ``mag_ratio`` times the ideal one
    and sits at ``phi_deg`` from it, rotated out of the reference-target
    plane. Passing ``rng`` draws a random out-of-plane completion instead of
    the fixed axis (only meaningful for dim > 3).
    """
    if not all(math.isfinite(v) for v in (theta0_deg, mag_ratio, phi_deg, alpha)):
        raise InvalidParameter("simulation parameters must be finite")
    if not (0.0 < theta0_deg < 180.0):
        raise InvalidParameter(f"theta0_deg must be in (0, 180), got {theta0_deg}")
    if mag_ratio <= 0:
        raise InvalidParameter(f"mag_ratio must be > 0, got {mag_ratio}")
    if dim < 3:
        raise InvalidParameter(f"dim must be >= 3, got {dim}")

    ref, target, gt = _base_vectors(theta0_deg, dim)
    g = float(np.linalg.norm(gt))
    u_gt = gt / g
    u_perp = _perp_completion(dim, rng)
    phi = math.radians(phi_deg)
    residual = mag_ratio * g * (math.cos(phi) * u_gt + math.sin(phi) * u_perp)
    composed = ref + alpha * residual
    if float(np.linalg.norm(composed)) <= 1e-12:
        raise DegenerateComposed(
            f"composed vector vanished at phi={phi_deg}, alpha={alpha}"
        )
    return angle_between_deg(composed, target)


def theta_heatmap(config: SimConfig) -> list[HeatmapCell]:
    """Full cartesian sweep, row-major: phi outer, alpha inner.

    Degenerate cells are marked invalid instead of aborting the grid. With
    ``random_completions`` > 0 each cell averages that many random
    out-of-plane completions (robustness mode).
    """
    rng = (
        np.random.default_rng(config.seed) if config.random_completions > 0 else None
    )
    cells = []
    for phi in config.phi_grid_deg:
        for alpha in config.alpha_grid:
            try:
                if rng is None:
                    theta = simulate_theta(
                        config.theta0_deg, config.mag_ratio, phi, alpha, dim=config.dim
                    )
                else:
                    draws = [
                        simulate_theta(
                            config.theta0_deg,
                            config.mag_ratio,
                            phi,
                            alpha,
                            dim=config.dim,
                            rng=rng,
                        )
                        for _ in range(config.random_completions)
                    ]
                    theta = sum(draws) / len(draws)
                cells.append(HeatmapCell(phi_deg=phi, alpha=alpha, theta_deg=theta))
            except DegenerateComposed:
                cells.append(
                    HeatmapCell(phi_deg=phi, alpha=alpha, theta_deg=float("nan"), valid=False)
                )
    return cells


def write_heatmap_csv(path, cells, config: SimConfig) -> None:
    """CSV export: one comment line with the full config, then
    phi_deg,alpha,theta_deg rows in grid order."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"# {config.to_dict()}\n")
            writer = csv.writer(fh)
            writer.writerow(["phi_deg", "alpha", "theta_deg"])
            for cell in cells:
                writer.writerow(
                    [repr(cell.phi_deg), repr(cell.alpha), repr(cell.theta_deg)]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write heatmap csv {path}: {exc}") from exc


def measure_phi(bundle: QueryBundle, target_embedding) -> float:
    """Misalignment angle (degrees) between the bundle's text residual and
    the reference-text-to-target direction."""
    ref_text = normalize(bundle.ref_text)
    composed = normalize(bundle.composed_text)
    pdv = compute_pdv(ref_text, composed)
    if float(np.linalg.norm(pdv.astype(np.float64))) <= 1e-12:
        raise ZeroPDV(f"{bundle.query_id}: zero text residual")
    gt = normalize(target_embedding) - ref_text
    if float(np.linalg.norm(gt.astype(np.float64))) <= 1e-12:
        raise ZeroGT(f"{bundle.query_id}: target equals reference text embedding")
    return angle_between_deg(pdv, gt)


@dataclass(frozen=True)
class PhiGroupStats:
    count: int
    skipped: int
    mean_deg: float
    median_deg: float
    std_deg: float

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "skipped": self.skipped,
            "mean_deg": self.mean_deg,
            "median_deg": self.median_deg,
            "std_deg": self.std_deg,
        }


def phi_report(pairs) -> dict[str, PhiGroupStats]:
    """Per-group misalignment statistics over (bundle, target embedding)
    pairs; bundles group by their manifest group (default "all"). Bundles
    with a degenerate residual or target are skipped and counted."""
    by_group: dict[str, list[float]] = {}
    skipped: dict[str, int] = {}
    total_valid = 0
    for bundle, target in pairs:
        group = bundle.group or "all"
        by_group.setdefault(group, [])
        skipped.setdefault(group, 0)
        try:
            phi = measure_phi(bundle, target)
        except (ZeroPDV, ZeroGT):
            skipped[group] += 1
            continue
        by_group[group].append(phi)
        total_valid += 1
    if total_valid == 0:
        raise AllBundlesDegenerate("no bundle produced a measurable angle")
    out = {}
    for group, values in sorted(by_group.items()):
        if values:
            out[group] = PhiGroupStats(
                count=len(values),
                skipped=skipped[group],
                mean_deg=statistics.fmean(values),
                median_deg=statistics.median(values),
                std_deg=statistics.pstdev(values),
            )
        else:
            out[group] = PhiGroupStats(
                count=0,
                skipped=skipped[group],
                mean_deg=float("nan"),
                median_deg=float("nan"),
                std_deg=float("nan"),
            )
    return out
