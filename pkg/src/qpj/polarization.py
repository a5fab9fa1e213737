"""Polarization operators of a tunnel junction between two BCS leads.

The retarded and Keldysh kernels Pi_n (normal) and Pi_s (anomalous) are
convolutions of lead Green's functions. Units: hbar = 1, frequencies in the
energy unit of the lead gaps, Pi in units of 1/R_J.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import OutOfTableRange, TemperatureMismatch
from .material import LeadParams, coth_safe, spectral_pair
from .quadrature import integrate_batched

#: |omega'| beyond which the integrand is handled by the semi-infinite panels
CUTOFF = 40.0


@dataclass(frozen=True)
class JunctionParams:
    left: LeadParams
    right: LeadParams
    tunnel_resistance: float = 30e3

    def __post_init__(self):
        if not self.tunnel_resistance > 0:
            raise ValueError("tunnel_resistance must be positive")

    @property
    def delta_sigma(self) -> float:
        return self.left.gap + self.right.gap

    @property
    def equal_temperatures(self) -> bool:
        return self.left.temperature == self.right.temperature

    @classmethod
    def symmetric(cls, temperature, gap_ratio=1.0, dynes_rate=0.0, tunnel_resistance=30e3):
        """Junction with Delta_l + Delta_r = 1 and Delta_l / Delta_r = ``gap_ratio``."""
        right = 1.0 / (1.0 + gap_ratio)
        return cls(LeadParams(1.0 - right, dynes_rate, temperature),
                   LeadParams(right, dynes_rate, temperature),
                   tunnel_resistance)


class PolarizationValue(NamedTuple):
    pi_n_ret: complex
    pi_s_ret: complex
    pi_n_kel: complex
    pi_s_kel: complex


@dataclass(frozen=True)
class QuadratureSettings:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    cutoff: float = CUTOFF


def _breakpoints(j: JunctionParams, omega: float, cutoff: float):
    dl, dr = j.left.gap, j.right.gap
    x = max(cutoff, abs(omega) + 2.0)
    pts = np.array([-x, x, -dl, dl, omega - dr, omega + dr, 0.0, omega])
    return np.unique(pts)


def _integrand(j: JunctionParams, omegas, which):
    """Vectorized integrand over (omega', problem index).

    ``which`` selects the retarded pair, the Keldysh pair, or all four.
    """
    def func(x, idx):
        w = omegas[idx]
        gl, fl, rgl, rfl, tl = spectral_pair(j.left, x)
        gr, fr, rgr, rfr, tr = spectral_pair(j.right, x - w)
        out = []
        if which in ("ret", "all"):
            # g_l^R g_r^K + g_l^K g_r^A, and the same with f
            out.append(gl * rgr * tr + rgl * tl * np.conj(gr))
            out.append(fl * rfr * tr + rfl * tl * np.conj(fr))
        if which in ("kel", "all"):
            # g^K g^K + g^R g^A + g^A g^R with the omega-independent
            # g^R g^R + g^A g^A piece removed (it only contributes a
            # divergent constant for g, and integrates to zero for f)
            tt = tl * tr - 1.0
            out.append(rgl * rgr * tt)
            out.append(rfl * rfr * tt)
        return -1j * np.stack(out)
    return func


def _solve(j: JunctionParams, omegas, which, settings: QuadratureSettings):
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    n_out = 4 if which == "all" else 2
    bps = [_breakpoints(j, w, settings.cutoff) for w in omegas]
    values, _ = integrate_batched(_integrand(j, omegas, which), bps, n_out=n_out,
                                  rel_tol=settings.rel_tol, abs_tol=settings.abs_tol)
    return values


def pi_retarded(j: JunctionParams, omega, settings: QuadratureSettings = QuadratureSettings()):
    """Retarded (Pi_n^R, Pi_s^R) at one or many frequencies.

    Raises
    ------
    QuadratureNotConverged
        If the adaptive error estimate misses the tolerance.
    """
    vals = _solve(j, omega, "ret", settings)
    if np.ndim(omega) == 0:
        return vals[0, 0], vals[0, 1]
    return vals[:, 0], vals[:, 1]


def pi_advanced(j: JunctionParams, omega, settings: QuadratureSettings = QuadratureSettings()):
    n, s = pi_retarded(j, omega, settings)
    return np.conj(n), np.conj(s)


def pi_keldysh_direct(j: JunctionParams, omega, settings: QuadratureSettings = QuadratureSettings()):
    """Keldysh (Pi_n^K, Pi_s^K) from the direct convolution."""
    vals = _solve(j, omega, "kel", settings)
    if np.ndim(omega) == 0:
        return vals[0, 0], vals[0, 1]
    return vals[:, 0], vals[:, 1]


def _fdt_factor(temperature, omega):
    omega = np.asarray(omega, dtype=float)
    if temperature == 0:
        return np.sign(omega)
    return coth_safe(omega / (2.0 * temperature))


def pi_keldysh_fdt(j: JunctionParams, omega, settings: QuadratureSettings = QuadratureSettings()):
    """Keldysh components from the retarded ones via the equilibrium FDT.

    At omega = 0 the finite limit 2T d(Pi^R - Pi^A)/d omega is returned.
    """
    if not j.equal_temperatures:
        raise TemperatureMismatch(
            f"FDT needs equal lead temperatures, got {j.left.temperature} and {j.right.temperature}")
    temp = j.left.temperature
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    eps = 1e-3 * min(j.left.nu, j.right.nu)
    tiny = np.abs(w) < eps
    w_eval = np.where(tiny, eps, w)
    n, s = pi_retarded(j, w_eval, settings)
    if temp == 0:
        factor = np.where(tiny, 0.0, np.sign(w))
    else:
        # omega -> 0: (Pi^R - Pi^A)(eps) coth(eps/2T) is already the limit
        factor = _fdt_factor(temp, w_eval)
    kn = 2j * n.imag * factor
    ks = 2j * s.imag * factor
    if np.ndim(omega) == 0:
        return kn[0], ks[0]
    return kn, ks


@dataclass(frozen=True)
class GridSpec:
    """Frequency grid for a polarization table.

    Uniform spacing ``step`` up to ``dense_max``, spacing ``coarse_step``
    out to ``omega_max``, plus geometric clusters (ratio ``ratio``, from
    ``finest`` out to ``window``) on both sides of every singular frequency.
    """
    omega_max: float = 6.0
    step: float = 0.01
    dense_max: float = 3.0
    coarse_step: float = 0.05
    window: float = 0.05
    finest: float = 1e-6
    ratio: float = 1.1

    def nodes(self, singular_points) -> np.ndarray:
        dense_max = min(self.dense_max, self.omega_max)
        pos = [np.arange(0.0, dense_max + 0.5 * self.step, self.step)]
        if self.omega_max > dense_max:
            n_coarse = max(1, int(np.ceil((self.omega_max - dense_max) / self.coarse_step)))
            pos.append(np.linspace(dense_max, self.omega_max, n_coarse + 1))
        n_geo = int(np.ceil(np.log(self.window / self.finest) / np.log(self.ratio))) + 1
        offsets = self.finest * self.ratio ** np.arange(n_geo)
        offsets = offsets[offsets <= self.window]
        for c in singular_points:
            c = abs(c)
            pos.append(np.concatenate([[c], c + offsets, c - offsets]))
        grid = np.concatenate(pos)
        grid = grid[(grid >= 0) & (grid <= self.omega_max)]
        grid = np.unique(np.round(grid, 15))
        # drop near-duplicates produced by overlapping clusters
        keep = np.concatenate([[True], np.diff(grid) > 0.25 * self.finest])
        grid = grid[keep]
        return np.concatenate([-grid[:0:-1], grid])


@dataclass(frozen=True)
class PolarizationTable:
    """Tabulated polarization operators with linear interpolation.

    Only omega >= 0 is integrated; negative frequencies follow from
    Pi^R(-w) = conj Pi^R(w) and Pi^K(-w) = Pi^K(w). For equal lead
    temperatures :meth:`keldysh` applies the FDT to the interpolated
    retarded values so that equilibrium detailed balance holds exactly
    between nodes.
    """

    grid: np.ndarray
    pi_n_ret: np.ndarray
    pi_s_ret: np.ndarray
    pi_n_kel: np.ndarray
    pi_s_kel: np.ndarray
    junction: JunctionParams
    settings: QuadratureSettings = field(default_factory=QuadratureSettings)

    @property
    def omega_max(self) -> float:
        return float(self.grid[-1])

    @property
    def meta_hash(self) -> str:
        blob = json.dumps({"junction": asdict(self.junction), "settings": asdict(self.settings),
                           "n": len(self.grid), "range": self.omega_max}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def _check(self, omega):
        w = np.asarray(omega, dtype=float)
        if w.size and np.max(np.abs(w)) > self.omega_max * (1 + 1e-12):
            raise OutOfTableRange(
                f"|omega| = {np.max(np.abs(w)):.6g} exceeds table range {self.omega_max:.6g}")
        return w

    def retarded(self, omega):
        """Interpolated (Pi_n^R, Pi_s^R)."""
        w = self._check(omega)
        n = np.interp(w, self.grid, self.pi_n_ret.real) + 1j * np.interp(w, self.grid, self.pi_n_ret.imag)
        s = np.interp(w, self.grid, self.pi_s_ret.real) + 1j * np.interp(w, self.grid, self.pi_s_ret.imag)
        return n, s

    def keldysh(self, omega):
        """Interpolated (Pi_n^K, Pi_s^K)."""
        w = self._check(omega)
        if not self.junction.equal_temperatures:
            n = 1j * np.interp(w, self.grid, self.pi_n_kel.imag)
            s = 1j * np.interp(w, self.grid, self.pi_s_kel.imag)
            return n, s
        temp = self.junction.left.temperature
        im_n = np.interp(w, self.grid, self.pi_n_ret.imag)
        im_s = np.interp(w, self.grid, self.pi_s_ret.imag)
        if temp == 0:
            factor = np.sign(w)
            return 2j * im_n * factor, 2j * im_s * factor
        zero = w == 0
        w_safe = np.where(zero, 1.0, w)
        factor = _fdt_factor(temp, w_safe)
        n = 2j * im_n * factor
        s = 2j * im_s * factor
        if np.any(zero):
            # linear interpolation near 0: Im Pi = slope * w, so the limit is 2T * slope
            k = np.searchsorted(self.grid, 0.0)
            dw = self.grid[k + 1] - self.grid[k]
            slope_n = (self.pi_n_ret.imag[k + 1] - self.pi_n_ret.imag[k]) / dw
            slope_s = (self.pi_s_ret.imag[k + 1] - self.pi_s_ret.imag[k]) / dw
            n = np.where(zero, 4j * temp * slope_n, n)
            s = np.where(zero, 4j * temp * slope_s, s)
        return n, s

    def value(self, omega) -> PolarizationValue:
        n, s = self.retarded(omega)
        kn, ks = self.keldysh(omega)
        return PolarizationValue(n, s, kn, ks)

    # -- CSV ---------------------------------------------------------------
    def to_csv(self, path_or_buffer):
        """Write the table as CSV with '#'-prefixed metadata lines."""
        own = isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__")
        fh = open(path_or_buffer, "w", newline="") if own else path_or_buffer
        try:
            meta = {"junction": asdict(self.junction), "settings": asdict(self.settings),
                    "hash": self.meta_hash}
            fh.write("# qpj polarization table\n")
            fh.write("# meta " + json.dumps(meta, sort_keys=True) + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["omega", "re_pi_n_ret", "im_pi_n_ret", "re_pi_s_ret", "im_pi_s_ret",
                             "re_pi_n_kel", "im_pi_n_kel", "re_pi_s_kel", "im_pi_s_kel"])
            for row in zip(self.grid, self.pi_n_ret, self.pi_s_ret, self.pi_n_kel, self.pi_s_kel):
                w, a, b, c, d = row
                writer.writerow([repr(float(v)) for v in
                                 (w, a.real, a.imag, b.real, b.imag, c.real, c.imag, d.real, d.imag)])
        finally:
            if own:
                fh.close()

    @classmethod
    def from_csv(cls, path_or_buffer) -> "PolarizationTable":
        if isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__"):
            with open(path_or_buffer) as fh:
                text = fh.read()
        else:
            text = path_or_buffer.read()
        meta = None
        body = []
        for line in text.splitlines():
            if line.startswith("# meta "):
                meta = json.loads(line[len("# meta "):])
            elif not line.startswith("#"):
                body.append(line)
        if meta is None:
            raise ValueError("missing '# meta' header line")
        rows = list(csv.reader(io.StringIO("\n".join(body))))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        jm = meta["junction"]
        junction = JunctionParams(LeadParams(**jm["left"]), LeadParams(**jm["right"]),
                                  jm["tunnel_resistance"])
        table = cls(data[:, 0], data[:, 1] + 1j * data[:, 2], data[:, 3] + 1j * data[:, 4],
                    data[:, 5] + 1j * data[:, 6], data[:, 7] + 1j * data[:, 8],
                    junction, QuadratureSettings(**meta["settings"]))
        if table.meta_hash != meta["hash"]:
            raise ValueError("table hash mismatch: file does not match its header")
        return table


def singular_frequencies(j: JunctionParams):
    return sorted({j.delta_sigma, abs(j.left.gap - j.right.gap)})


def build_table(j: JunctionParams, grid_spec: GridSpec = GridSpec(),
                settings: QuadratureSettings = QuadratureSettings(), chunk=256) -> PolarizationTable:
    """Integrate the polarization operators on a singularity-clustered grid.

    Raises
    ------
    QuadratureNotConverged
        Propagated from the node integrals.
    """
    grid = grid_spec.nodes(singular_frequencies(j))
    pos = grid[grid >= 0]
    which = "ret" if j.equal_temperatures else "all"
    parts = [_solve(j, pos[i:i + chunk], which, settings) for i in range(0, len(pos), chunk)]
    vals = np.concatenate(parts)
    ret_n, ret_s = vals[:, 0].copy(), vals[:, 1].copy()
    # exact symmetry at the origin
    ret_n[0] = ret_n[0].real
    ret_s[0] = ret_s[0].real
    if which == "all":
        kel_n, kel_s = 1j * vals[:, 2].imag, 1j * vals[:, 3].imag
    else:
        kel_n = kel_s = None

    def mirror_ret(a):
        return np.concatenate([np.conj(a[:0:-1]), a])

    def mirror_kel(a):
        return np.concatenate([a[:0:-1], a])

    table = PolarizationTable(grid, mirror_ret(ret_n), mirror_ret(ret_s),
                              np.zeros(len(grid), complex), np.zeros(len(grid), complex), j, settings)
    if kel_n is None:
        kn, ks = table.keldysh(grid)
    else:
        kn, ks = mirror_kel(kel_n), mirror_kel(kel_s)
    return PolarizationTable(grid, table.pi_n_ret, table.pi_s_ret, kn, ks, j, settings)


def pi_tilde(table: PolarizationTable, omega, omega_prime, kind: str):
    """Shorthand combinations entering the admittance.

    normal:    [Pi_n^R(w + w') - Pi_n^R(w')] / 4
    anomalous: [Pi_s^R(w + w') + Pi_s^R(w')] / 4
    """
    omega = np.asarray(omega, dtype=float)
    omega_prime = np.asarray(omega_prime, dtype=float)
    n1, s1 = table.retarded(omega + omega_prime)
    n0, s0 = table.retarded(omega_prime)
    if kind == "normal":
        return (n1 - n0) / 4.0
    if kind == "anomalous":
        return (s1 + s0) / 4.0
    raise ValueError(f"kind must be 'normal' or 'anomalous', got {kind!r}")


def hilbert_real_part(grid, imag, chunk=512):
    """Real part reconstructed from a piecewise-linear imaginary part.

    Computes (1/pi) PV int Im(w') / (w' - w) dw' over the grid span, exactly
    for the piecewise-linear interpolant, evaluated at the grid nodes.
    """
    x = np.asarray(grid, dtype=float)
    f = np.asarray(imag, dtype=float)
    dx = np.diff(x)
    beta = np.diff(f) / dx
    alpha = f[:-1] - beta * x[:-1]
    out = np.empty(len(x))
    for start in range(0, len(x), chunk):
        w = x[start:start + chunk, None]
        fw = f[start:start + chunk, None]
        coef = alpha[None, :] + beta[None, :] * w - fw
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.log(np.abs((x[None, 1:] - w) / (x[None, :-1] - w)))
        # segments touching the evaluation node have coef == 0 exactly
        adjacent = (x[None, 1:] == w) | (x[None, :-1] == w)
        with np.errstate(invalid="ignore"):
            term = np.where(adjacent, 0.0, coef * logs)
        regular = np.sum(beta[None, :] * dx[None, :] + term, axis=1)
        with np.errstate(divide="ignore"):
            ends = np.log(np.abs((x[-1] - w[:, 0]) / (x[0] - w[:, 0])))
        ends = np.where(np.isfinite(ends), ends, 0.0)
        out[start:start + chunk] = (regular + fw[:, 0] * ends) / np.pi
    return out


def _tail_model(grid, imag):
    """Coefficients (a, b) of Im ~ a w + b / w matched at the table edge X and at X / 2."""
    x = grid[-1]
    half = np.interp(0.5 * x, grid, imag)
    return np.linalg.solve([[x, 1.0 / x], [0.5 * x, 2.0 / x]], [imag[-1], half])


def kramers_kronig_residual(table: PolarizationTable) -> float:
    """Worst relative mismatch between Re Pi^R and its Hilbert reconstruction.

    Beyond the table edge X the imaginary part is extrapolated as
    a w + b / w. The odd linear piece carries no real part and is removed
    before the discrete transform; the b / w tail beyond +-X is added in
    closed form, (b / pi w) ln((X + w) / (X - w)).
    """
    worst = 0.0
    w = table.grid
    x = table.omega_max
    inner = np.abs(w) < x
    for arr in (table.pi_n_ret, table.pi_s_ret):
        scale = np.max(np.abs(arr.real))
        if scale == 0:
            continue
        a, b = _tail_model(w, arr.imag)
        recon = hilbert_real_part(w, arr.imag - a * w)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = b / (np.pi * w) * np.log((x + w) / (x - w))
        recon = recon + np.where(w == 0, 2.0 * b / (np.pi * x), tail)
        # the end nodes carry the log divergence of the truncated transform
        resid = np.max(np.abs(arr.real[inner] - recon[inner])) / scale
        worst = max(worst, resid)
    return worst
