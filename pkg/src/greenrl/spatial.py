"""Spatially correlated load fields and correlation-gated parameter transfer.

A latent field z over a fixed grid of sites evolves by a discretised
integro-difference step: z'(s_i) = sum_j k(s_i, s_j) f(z(s_j)) dx + noise,
i.e. a rectangle-rule quadrature of the kernel integral.  Traffic at each
site is Poisson with log-linked intensity mu * exp(z), which makes nearby
sites see correlated load.  Agents whose sites show correlated traffic can
blend parameters; the blend weight is gated by the estimated correlation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConfigError, InvalidInputError
from .neural import DenseNet

__all__ = [
    "SpatialField",
    "Kernel",
    "FieldNoise",
    "TrafficIntensity",
    "CorrelationMatrix",
    "KernelFit",
    "quadrature_matrix",
    "side_step",
    "sample_traffic",
    "FieldTrafficSource",
    "estimate_correlation",
    "fit_kernel",
    "transfer_weights",
    "MIN_LENGTH_SCALE",
]

MIN_LENGTH_SCALE = 1e-6

_SQUASH_FNS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda z: z,
    "squash": np.tanh,
}


@dataclass(frozen=True)
class Kernel:
    """Gaussian interaction kernel a * exp(-d^2 / (2 l^2))."""

    amplitude: float
    length_scale: float

    def __post_init__(self):
        if self.amplitude < 0 or not np.isfinite(self.amplitude):
            raise ConfigError(f"amplitude must be finite and >= 0, got {self.amplitude}")
        if self.length_scale <= 0 or not np.isfinite(self.length_scale):
            raise ConfigError(f"length_scale must be positive, got {self.length_scale}")

    def __call__(self, dist: np.ndarray) -> np.ndarray:
        d = np.asarray(dist, dtype=float)
        return self.amplitude * np.exp(-(d**2) / (2.0 * self.length_scale**2))


@dataclass(frozen=True)
class SpatialField:
    """Field values z over fixed site coordinates with cell width dx."""

    sites: np.ndarray
    z: np.ndarray
    dx: float

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if sites.ndim == 1:
            sites = sites[:, None]
        if sites.ndim != 2 or sites.shape[0] < 1:
            raise ConfigError("sites must be (n,) or (n, d) with n >= 1")
        if z.shape != (sites.shape[0],):
            raise ConfigError("z must be one value per site")
        if not np.all(np.isfinite(z)) or not np.all(np.isfinite(sites)):
            raise InvalidInputError("sites and z must be finite")
        if self.dx <= 0:
            raise ConfigError("dx must be positive")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "z", z)

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    @classmethod
    def line(cls, n_sites: int, length: float, z0: np.ndarray | float = 0.0) -> "SpatialField":
        """Evenly spaced midpoints of [0, length] split into n_sites cells."""
        if n_sites < 1 or length <= 0:
            raise ConfigError("need n_sites >= 1 and length > 0")
        dx = length / n_sites
        sites = (np.arange(n_sites) + 0.5) * dx
        z = np.full(n_sites, float(z0)) if np.isscalar(z0) else np.asarray(z0, dtype=float)
        return cls(sites, z, dx)


@dataclass
class FieldNoise:
    """Independent per-site Gaussian innovations; sigma 0 is exactly silent."""

    sigma: float
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        self._rng = np.random.default_rng(self.seed)

    def draw(self, n: int) -> np.ndarray:
        if self.sigma == 0:
            return np.zeros(n)
        return self._rng.normal(0.0, self.sigma, size=n)


def _pairwise_distances(sites: np.ndarray) -> np.ndarray:
    diff = sites[:, None, :] - sites[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def quadrature_matrix(field: SpatialField, kernel: Kernel) -> np.ndarray:
    """Kernel evaluated on all site pairs; row i integrates against site i."""
    return kernel(_pairwise_distances(field.sites))


def side_step(
    field: SpatialField,
    kernel: Kernel,
    f: str | Callable[[np.ndarray], np.ndarray] = "squash",
    noise: FieldNoise | None = None,
) -> SpatialField:
    """One field update z' = (K f(z)) dx + e; returns a new field."""
    fn = _SQUASH_FNS.get(f) if isinstance(f, str) else f
    if fn is None:
        raise ConfigError(f"unknown squash tag {f!r}; use one of {sorted(_SQUASH_FNS)}")
    k_mat = quadrature_matrix(field, kernel)
    z_new = (k_mat @ fn(field.z)) * field.dx
    if noise is not None:
        z_new = z_new + noise.draw(field.n_sites)
    if not np.all(np.isfinite(z_new)):
        raise InvalidInputError("field update produced non-finite values")
    return SpatialField(field.sites, z_new, field.dx)


@dataclass(frozen=True)
class TrafficIntensity:
    """Per-site Poisson rates mu * exp(z) for one field snapshot."""

    base_rate: float
    z: np.ndarray

    def __post_init__(self):
        if self.base_rate <= 0 or not np.isfinite(self.base_rate):
            raise ConfigError(f"base_rate must be positive, got {self.base_rate}")
        z = np.asarray(self.z, dtype=float)
        object.__setattr__(self, "z", z)
        if not np.all(np.isfinite(self.rates)):
            raise InvalidInputError("intensity overflowed; field values too large")

    @property
    def rates(self) -> np.ndarray:
        return self.base_rate * np.exp(self.z)


def sample_traffic(intensity: TrafficIntensity, rng: np.random.Generator) -> np.ndarray:
    """Independent Poisson draw per site at the current rates."""
    return rng.poisson(intensity.rates)


class FieldTrafficSource:
    """Advances a field one step per slot on demand and serves site counts.

    Multiple consumers can pull arrivals for different sites in any order;
    each slot's field step and Poisson draw happen exactly once and are
    cached, so all consumers see one consistent realisation.
    """

    def __init__(
        self,
        field: SpatialField,
        kernel: Kernel,
        squash: str | Callable[[np.ndarray], np.ndarray],
        noise: FieldNoise,
        base_rate: float,
        seed: int = 0,
        burn_in: int = 0,
    ):
        for _ in range(int(burn_in)):
            field = side_step(field, kernel, squash, noise)
        self.field = field
        self.kernel = kernel
        self.squash = squash
        self.noise = noise
        self.base_rate = float(base_rate)
        self._rng = np.random.default_rng(seed)
        self._counts: list[np.ndarray] = []

    def counts_at(self, slot: int) -> np.ndarray:
        if slot < 0:
            raise InvalidInputError("slot must be >= 0")
        while len(self._counts) <= slot:
            self.field = side_step(self.field, self.kernel, self.squash, self.noise)
            intensity = TrafficIntensity(self.base_rate, self.field.z)
            self._counts.append(sample_traffic(intensity, self._rng))
        return self._counts[slot]

    def stream(self, site: int) -> Callable[[int], int]:
        """Per-slot arrival callable for one site, env-traffic compatible."""
        if not 0 <= site < self.field.n_sites:
            raise InvalidInputError(f"site {site} out of range")
        return lambda slot: int(self.counts_at(slot)[site])

    def stream_region(self, sites) -> Callable[[int], int]:
        """Per-slot arrivals summed over a cell of sites (one station's view)."""
        idx = [int(s) for s in sites]
        if not idx:
            raise InvalidInputError("region needs at least one site")
        for s in idx:
            if not 0 <= s < self.field.n_sites:
                raise InvalidInputError(f"site {s} out of range")
        return lambda slot: int(self.counts_at(slot)[idx].sum())

    def history(self) -> np.ndarray:
        """All counts sampled so far, shape (slots, n_sites)."""
        if not self._counts:
            return np.zeros((0, self.field.n_sites), dtype=int)
        return np.asarray(self._counts)

    def region_history(self, cells) -> np.ndarray:
        """Summed count series per cell, shape (slots, n_cells)."""
        hist = self.history()
        return np.stack([hist[:, [int(s) for s in cell]].sum(axis=1) for cell in cells], axis=1)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pairwise Pearson correlations with degenerate series flagged.

    Rows/columns of zero-variance series are zeroed (including the diagonal)
    and listed in ``zero_variance_sites``.
    """

    values: np.ndarray
    zero_variance_sites: tuple[int, ...] = ()


def estimate_correlation(history: np.ndarray) -> CorrelationMatrix:
    """Pearson correlation of per-site count series, shape (T, n_sites)."""
    h = np.asarray(history, dtype=float)
    if h.ndim != 2 or h.shape[0] < 2:
        raise InvalidInputError("history must be (T >= 2, n_sites)")
    if not np.all(np.isfinite(h)):
        raise InvalidInputError("history must be finite")
    n = h.shape[1]
    stds = h.std(axis=0)
    degenerate = tuple(int(i) for i in np.flatnonzero(stds == 0))
    values = np.zeros((n, n))
    ok = stds > 0
    if ok.any():
        sub = np.corrcoef(h[:, ok], rowvar=False)
        sub = np.atleast_2d(sub)
        idx = np.flatnonzero(ok)
        values[np.ix_(idx, idx)] = sub
    return CorrelationMatrix(values, degenerate)


@dataclass(frozen=True)
class KernelFit:
    kernel: Kernel
    degenerate: bool
    rss: float


def fit_kernel(corr: CorrelationMatrix | np.ndarray, sites: np.ndarray) -> KernelFit:
    """Least-squares Gaussian fit to clipped off-diagonal correlations.

    Negative correlations clip to 0 before fitting.  If nothing positive
    remains the fit is flagged degenerate and a zero-amplitude kernel at the
    minimal length scale is returned.
    """
    values = corr.values if isinstance(corr, CorrelationMatrix) else np.asarray(corr, dtype=float)
    sites = np.asarray(sites, dtype=float)
    if sites.ndim == 1:
        sites = sites[:, None]
    n = values.shape[0]
    if values.shape != (n, n) or sites.shape[0] != n:
        raise InvalidInputError("correlation matrix and sites disagree on n")
    if n < 2:
        raise InvalidInputError("need at least two sites to fit a kernel")
    dists = _pairwise_distances(sites)
    iu = np.triu_indices(n, k=1)
    d = dists[iu]
    c = np.clip(values[iu], 0.0, None)
    if not np.any(c > 0):
        return KernelFit(Kernel(0.0, MIN_LENGTH_SCALE), True, float((c**2).sum()))

    def model(dd, a, ell):
        return a * np.exp(-(dd**2) / (2.0 * ell**2))

    a0 = float(c.max())
    ell0 = float(np.median(d[c > 0])) if np.any(d[c > 0] > 0) else 1.0
    ell0 = max(ell0, MIN_LENGTH_SCALE)
    params, _ = curve_fit(
        model,
        d,
        c,
        p0=(a0, ell0),
        bounds=([0.0, MIN_LENGTH_SCALE], [np.inf, np.inf]),
        maxfev=10000,
    )
    a_hat, ell_hat = float(params[0]), float(params[1])
    rss = float(((model(d, a_hat, ell_hat) - c) ** 2).sum())
    return KernelFit(Kernel(a_hat, ell_hat), False, rss)


def transfer_weights(
    nets: Sequence[DenseNet],
    corr: CorrelationMatrix | np.ndarray,
    beta: float,
) -> list[DenseNet]:
    """Correlation-gated convex blend of per-agent network parameters.

    For agent i let Z_i be the sum of clipped correlations c+_ij over j != i
    and w_i = Z_i / (1 + Z_i).  The update

        theta_i' = (1 - beta w_i) theta_i + beta w_i sum_j (c+_ij / Z_i) theta_j

    is a convex combination (coefficients sum to 1).  beta = 0, or no
    positive correlation, leaves the agent unchanged.  With two agents at
    correlation 1 and beta 1 both land on the elementwise average.  Each
    agent's own sparsity mask is re-applied to the blend.
    """
    values = corr.values if isinstance(corr, CorrelationMatrix) else np.asarray(corr, dtype=float)
    n = len(nets)
    if values.shape != (n, n):
        raise InvalidInputError(f"correlation matrix {values.shape} does not match {n} agents")
    if not 0.0 <= beta <= 1.0:
        raise InvalidInputError(f"beta must lie in [0, 1], got {beta!r}")
    dims = nets[0].layer_dims
    if any(net.layer_dims != dims for net in nets):
        raise InvalidInputError("all agents must share one architecture")

    def copy_of(net: DenseNet) -> DenseNet:
        return DenseNet(
            net.layer_dims,
            [w.copy() for w in net.weights],
            [b.copy() for b in net.biases],
            net.activation,
            [m.copy() for m in net.mask] if net.mask is not None else None,
            None,
        )

    out: list[DenseNet] = []
    pos = np.clip(values, 0.0, None)
    np.fill_diagonal(pos, 0.0)
    for i, net in enumerate(nets):
        z_i = float(pos[i].sum())
        if beta == 0.0 or z_i == 0.0:
            out.append(copy_of(net))
            continue
        w_i = z_i / (1.0 + z_i)
        self_coeff = 1.0 - beta * w_i
        weights, biases = [], []
        for layer in range(net.n_layers):
            w_mix = self_coeff * net.weights[layer]
            b_mix = self_coeff * net.biases[layer]
            for j, other in enumerate(nets):
                if j == i or pos[i, j] == 0.0:
                    continue
                share = beta * w_i * (pos[i, j] / z_i)
                w_mix = w_mix + share * other.weights[layer]
                b_mix = b_mix + share * other.biases[layer]
            if net.mask is not None:
                w_mix = w_mix * net.mask[layer]
            weights.append(w_mix.astype(net.dtype))
            biases.append(b_mix.astype(net.dtype))
        out.append(
            DenseNet(
                net.layer_dims,
                weights,
                biases,
                net.activation,
                [m.copy() for m in net.mask] if net.mask is not None else None,
                None,
            )
        )
    return out
