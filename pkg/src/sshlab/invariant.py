"""Binary topological index of a chain realization, computed three ways.

The flux-winding route accumulates principal-branch phase increments of
det h(phi) around the boundary-phase circle; the closed-form route compares
log|prod u_i| against n*log|w| directly; the Wilson-loop route discretizes
the clean-limit geometric phase of the lower band.  All log-like quantities
are accumulated in log space so chains with hundreds of dimers neither
overflow nor underflow.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import ChainParams, FluxMatrix, Realization, build_flux_matrix

__all__ = [
    "CriticalRealizationError",
    "UnresolvedWindingError",
    "WindingResult",
    "XiValue",
    "winding_integral",
    "winding_closed_form",
    "xi_value",
    "zak_phase_clean",
]

PHASE_SAMPLE_CAP = 4096
# |det| below 1e-300 at any sample counts as a gap closing
_DET_LOG_FLOOR = -300.0 * math.log(10.0)


class CriticalRealizationError(ValueError):
    """The realization sits on the phase boundary; the index is undefined."""


class UnresolvedWindingError(RuntimeError):
    """Phase increments stayed too coarse even at the sample cap."""


@dataclass(frozen=True)
class WindingResult:
    """Winding integer plus the discretization it was resolved on."""

    nu: int
    phase_samples: int
    total_phase: float


@dataclass(frozen=True)
class XiValue:
    """log of the gap-criterion ratio xi = |prod u_i| / |w|^n."""

    log_xi: float

    @property
    def xi(self) -> float:
        return math.exp(self.log_xi)


def xi_value(r: Realization, params: ChainParams) -> XiValue:
    """log xi = n*log|u/w| + sum log|u_i/u|, accumulated in log space."""
    if params.u == 0.0:
        raise ValueError("u must be nonzero to form coupling ratios")
    if params.w == 0.0:
        raise ValueError("w must be nonzero to form xi")
    if r.n != params.n:
        raise ValueError(f"realization has {r.n} couplings, params expect {params.n}")
    n = params.n
    with np.errstate(divide="ignore"):
        acc = float(np.sum(np.log(np.abs(r.couplings / params.u))))
    return XiValue(log_xi=n * math.log(abs(params.u / params.w)) + acc)


def winding_closed_form(r: Realization, params: ChainParams) -> int:
    """Index from the sign of log xi: 1 for log xi < 0, 0 for log xi > 0.

    A coupling that is exactly zero forces xi = 0 < 1, so the index is 1;
    that case is flagged with a warning because the chain is then cut.
    """
    log_xi = xi_value(r, params).log_xi
    if log_xi == -math.inf:
        warnings.warn("zero coupling in realization; xi = 0, returning nu = 1")
        return 1
    if log_xi == 0.0:
        raise CriticalRealizationError("xi = 1 exactly: gapless realization")
    return 1 if log_xi < 0.0 else 0


def _scaled_dets(h: FluxMatrix, phis: np.ndarray) -> tuple[np.ndarray, float]:
    """det h(phi) / e^scale on a phase grid, plus the log scale factor."""
    lp, sp, lq, sq = h.log_terms()
    scale = max(lp, lq)
    if scale == -math.inf:
        return np.zeros(len(phis), dtype=complex), -math.inf
    zp = sp * math.exp(lp - scale) if lp > -math.inf else 0.0
    zq = sq * math.exp(lq - scale) if lq > -math.inf else 0.0
    return zp + zq * np.exp(1j * phis), scale


def winding_integral(
    r: Realization, w: float, m_phi: int = 64, det_method: str = "closed_form"
) -> WindingResult:
    """Winding of det h(phi) over phi in [0, 2pi) by phase-increment summation.

    Every principal-branch increment must stay below pi/2; otherwise the
    grid is doubled (up to 4096 samples) and the sum restarts.  The slower
    det_method="lu" path evaluates each determinant from the assembled
    matrix instead of the structural closed form.
    """
    if m_phi < 16:
        raise ValueError("need at least 16 phase samples")
    m = int(m_phi)
    while True:
        phis = 2.0 * math.pi * np.arange(m) / m
        h0 = build_flux_matrix(r, w, 0.0)
        if det_method == "closed_form":
            dets, scale = _scaled_dets(h0, phis)
        elif det_method == "lu":
            dets = np.array(
                [build_flux_matrix(r, w, p).determinant("lu") for p in phis]
            )
            scale = 0.0
        else:
            raise ValueError(f"unknown det_method {det_method!r}")
        with np.errstate(divide="ignore"):
            log_abs = scale + np.log(np.abs(dets))
        if not np.all(log_abs > _DET_LOG_FLOOR):
            raise CriticalRealizationError(
                "|det h(phi)| fell below 1e-300 on the phase grid"
            )
        rolled = np.roll(dets, -1)
        increments = np.angle(rolled * np.conj(dets))
        if float(np.max(np.abs(increments))) < 0.5 * math.pi:
            total = float(np.sum(increments))
            nu = int(round(total / (2.0 * math.pi)))
            return WindingResult(nu=nu, phase_samples=m, total_phase=total)
        if m >= PHASE_SAMPLE_CAP:
            raise UnresolvedWindingError(
                f"phase increments exceed pi/2 even at {m} samples"
            )
        m = min(2 * m, PHASE_SAMPLE_CAP)


def _lower_band_vectors(u: float, w: float, ks: np.ndarray) -> np.ndarray:
    """Lower-band eigenvectors of the 2x2 Bloch matrix, rows per k."""
    q = u + w * np.exp(-1j * ks)
    mod = np.abs(q)
    vec = np.empty((len(ks), 2), dtype=complex)
    vec[:, 0] = -q / mod
    vec[:, 1] = 1.0
    return vec / math.sqrt(2.0)


def zak_phase_clean(u: float, w: float, m_k: int = 256) -> int:
    """Clean-limit index from the Wilson loop of the lower band.

    The loop product of overlaps <psi_k | psi_{k+dk}> around the Brillouin
    zone is gauge invariant; its phase divided by pi is the index mod 2.
    The grid doubles whenever the off-diagonal q(k) rotates by more than
    pi/2 between neighbouring samples.
    """
    if abs(u) == abs(w):
        raise ValueError("gapless: |u| = |w| has no defined geometric phase")
    if m_k < 64:
        raise ValueError("need at least 64 momentum samples")
    m = int(m_k)
    while True:
        ks = -math.pi + 2.0 * math.pi * np.arange(m) / m
        q = u + w * np.exp(-1j * ks)
        rotation = np.angle(np.roll(q, -1) * np.conj(q))
        if float(np.max(np.abs(rotation))) < 0.5 * math.pi:
            break
        if m >= PHASE_SAMPLE_CAP:
            raise UnresolvedWindingError(
                f"Bloch vector rotates too fast even at {m} samples"
            )
        m = min(2 * m, PHASE_SAMPLE_CAP)
    vec = _lower_band_vectors(u, w, ks)
    overlaps = np.sum(np.conj(vec) * np.roll(vec, -1, axis=0), axis=1)
    loop = complex(np.prod(overlaps / np.abs(overlaps)))
    phase = cmath.phase(loop)
    return int(round(phase / math.pi)) % 2
