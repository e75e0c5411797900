"""Frequency grids, vectorized Fourier transforms and matrix-valued PSDs.

A band-limited function with CTFT ``P(xi)`` supported on ``[-B, B]`` is
represented, for every ``f`` in the Nyquist interval
``[-1/(2T), 1/(2T))``, by the vector of its samples at the shifted
frequencies ``f + n/T`` with ``n = -L, ..., L`` and ``L = ceil(beta / 2)``,
``beta = 2BT - 1``. The *effective* VFT drops the first entry when
``f <= L/T - B`` and the last one when ``f >= B - L/T`` so that only
in-band frequencies are kept; its length is written ``n_eff(f)``.

Throughout, vectors and matrices are plain numpy arrays.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import backward_identity

__all__ = ['InvalidSpec', 'ShapeMismatch', 'NotProper', 'NonCommensurateRates',
           'GridSpec', 'FrequencyGrid', 'CtftFunction', 'build_grid',
           'retained_shifts', 'vft', 'matrix_psd_linear_mod',
           'interferer_matrix_psd', 'noise_matrix_psd', 'augment',
           'read_ctft_csv']


class InvalidSpec(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class NotProper(ValueError):
    pass


class NonCommensurateRates(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """
    Bandwidth / symbol-rate pair plus the discretization density.

    Parameters
    ----------
    B : float
        One-sided bandwidth (Hz) shared by transmitter and receiver.
    T : float
        Symbol period (s).
    N : int
        Number of bins in the half Nyquist interval ``[0, 1/(2T))``.
    """
    B: float
    T: float
    N: int

    def __post_init__(self):
        if not (self.B > 0 and self.T > 0):
            raise InvalidSpec("B and T must be positive")
        if int(self.N) != self.N or self.N < 2:
            raise InvalidSpec("N must be an integer >= 2")
        if self.beta < 0:
            raise InvalidSpec(f"excess bandwidth beta = {self.beta:g} < 0; "
                              "the band must cover the Nyquist rate")

    @property
    def beta(self):
        # snap rounding residue, e.g. B = 0.5/T with T = 0.1
        beta = 2.0 * self.B * self.T - 1.0
        return 0.0 if abs(beta) < 1e-12 else beta

    @property
    def L(self):
        return int(math.ceil(self.beta / 2.0 - 1e-12))

    @property
    def df(self):
        """Bin width ``1/(2NT)``."""
        return 1.0 / (2.0 * self.N * self.T)


def retained_shifts(spec, f):
    """
    Shift indices ``n`` (``-L..L``) kept by the effective VFT at ``f``.

    Boundary equality removes the entry (closed removal intervals).
    """
    L, T, B = spec.L, spec.T, spec.B
    n = np.arange(-L, L + 1)
    keep = np.ones(n.size, dtype=bool)
    tol = 1e-12 / T
    if f <= L / T - B + tol:
        keep[0] = False
    if f >= B - L / T - tol:
        keep[-1] = False
    return n[keep]


@dataclass(frozen=True)
class FrequencyGrid:
    """
    Paired midpoint discretization of the Nyquist interval.

    ``xi[i] = (i + 1/2) / (2 N T)`` for ``i = 0..N-1``; bin ``i`` is always
    handled together with its mirror ``-xi[i]``.
    """
    spec: GridSpec
    xi: np.ndarray
    shifts_pos: tuple = field(repr=False)
    shifts_neg: tuple = field(repr=False)

    @property
    def N(self):
        return self.spec.N

    @property
    def T(self):
        return self.spec.T

    @property
    def df(self):
        return self.spec.df

    @property
    def n_pos(self):
        return np.array([s.size for s in self.shifts_pos])

    @property
    def n_neg(self):
        return np.array([s.size for s in self.shifts_neg])

    def shifts(self, i, sign):
        return self.shifts_pos[i] if sign > 0 else self.shifts_neg[i]

    def frequencies(self, i, sign):
        """CTFT sample frequencies of the effective VFT at ``sign * xi[i]``."""
        f = sign * self.xi[i]
        return f + self.shifts(i, sign) / self.T


def build_grid(spec):
    """Construct the paired frequency grid for `spec`."""
    T, N = spec.T, spec.N
    i = np.arange(1, N + 1)
    xi = i / (2.0 * N * T) - 1.0 / (4.0 * N * T)
    pos = tuple(retained_shifts(spec, f) for f in xi)
    neg = tuple(retained_shifts(spec, -f) for f in xi)
    return FrequencyGrid(spec=spec, xi=xi, shifts_pos=pos, shifts_neg=neg)


class CtftFunction:
    """
    Vectorized evaluator of a band-limited CTFT.

    Parameters
    ----------
    func : callable
        Maps an array of frequencies (Hz) to complex values.
    support : (float, float)
        Closed frequency interval outside of which the function is zero.
    """

    def __init__(self, func, support):
        lo, hi = support
        if hi < lo:
            raise ValueError("empty support")
        self._func = func
        self.support = (float(lo), float(hi))

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape, dtype=complex)
        inside = (xi >= self.support[0]) & (xi <= self.support[1])
        if np.any(inside):
            out[inside] = self._func(xi[inside])
        return out

    @classmethod
    def flat(cls, level, support):
        level = complex(level)
        return cls(lambda xi: np.full(xi.shape, level), support)

    @classmethod
    def tabulated(cls, freqs, values):
        """Linear interpolation (real and imaginary parts) of samples."""
        freqs = np.asarray(freqs, dtype=float)
        values = np.asarray(values, dtype=complex)
        if freqs.ndim != 1 or freqs.size != values.size or freqs.size < 2:
            raise ValueError("need matching 1-D frequency and value arrays")
        if np.any(np.diff(freqs) <= 0):
            raise ValueError("tabulated frequencies must be increasing")

        def interp(xi):
            return (np.interp(xi, freqs, values.real)
                    + 1j * np.interp(xi, freqs, values.imag))
        return cls(interp, (freqs[0], freqs[-1]))

    def shifted(self, offset):
        """CTFT of ``p(t) exp(j 2 pi offset t)``."""
        lo, hi = self.support
        return CtftFunction(lambda xi: self(xi - offset),
                            (lo + offset, hi + offset))

    def scaled(self, gain):
        gain = complex(gain)
        return CtftFunction(lambda xi: gain * self(xi), self.support)

    def conj_time(self):
        """CTFT of ``p(t)^*``, i.e. ``P(-xi)^*``."""
        lo, hi = self.support
        return CtftFunction(lambda xi: np.conj(self(-xi)), (-hi, -lo))

    def truncated(self, band):
        """Restrict the support to ``[-band, band]``."""
        lo, hi = self.support
        return CtftFunction(self._func, (max(lo, -band), min(hi, band)))


def read_ctft_csv(path):
    """
    Read a tabulated CTFT.

    Each row is ``frequency, "re,im"`` (the complex value quoted as one
    field) or, equivalently, ``frequency, re, im``. Lines starting with
    ``#`` and a non-numeric header row are skipped. Frequencies must be
    increasing; values should be zero-padded at the support edges.
    """
    freqs, vals = [], []
    with open(path, newline='') as fh:
        for row in csv.reader(fh):
            row = [c.strip() for c in row if c.strip() != '']
            if not row or row[0].startswith('#'):
                continue
            try:
                fr = float(row[0])
            except ValueError:
                if not freqs:
                    continue  # header
                raise
            if len(row) == 2:
                re_, im_ = row[1].split(',')
            elif len(row) == 3:
                re_, im_ = row[1], row[2]
            else:
                raise ValueError(f"malformed CTFT row: {row!r}")
            freqs.append(fr)
            vals.append(complex(float(re_), float(im_)))
    return CtftFunction.tabulated(freqs, vals)


def vft(fn, grid, f):
    """
    Effective VFT of `fn` at frequency `f` of the Nyquist interval.

    Entries are ordered by increasing shift index.
    """
    spec = grid.spec if isinstance(grid, FrequencyGrid) else grid
    n = retained_shifts(spec, f)
    return fn(f + n / spec.T)


def matrix_psd_linear_mod(psd, comp_psd, p_f, p_negf, T):
    """
    Matrix-valued PSD and complementary PSD of a linearly modulated SOS
    sequence at ``f``.

    Parameters
    ----------
    psd, comp_psd : float, complex
        ``M(fT)`` and ``M~(fT)`` of the symbol sequence.
    p_f, p_negf : complex arrays
        Effective VFTs of the overall pulse at ``f`` and ``-f``.
    T : float

    Returns
    -------
    auto : ``(1/T) M p(f) p(f)^H``
    comp : ``(1/T) M~ p(f) (J p(-f)^*)^H``
    """
    p_f = np.asarray(p_f, dtype=complex)
    p_negf = np.asarray(p_negf, dtype=complex)
    auto = (psd / T) * np.outer(p_f, p_f.conj())
    conj_vft = p_negf[::-1].conj()  # J p(-f)^*, the VFT of p(t)^* at f
    comp = (comp_psd / T) * np.outer(p_f, conj_vft.conj())
    return auto, comp


def interferer_matrix_psd(pulse_vft, shifts, symbol_energy, symbol_period,
                          T):
    """
    Matrix PSD of one proper linearly modulated interferer with white
    symbols of energy `symbol_energy` and period ``T0 = T / D``.

    Only cyclic components at multiples of ``1/T0 = D/T`` exist, so entry
    ``(k, l)`` is ``(Es/T0) q_k q_l^*`` when ``D`` divides the shift
    difference and zero otherwise.
    """
    ratio = T / symbol_period
    D = int(round(ratio))
    if D < 1 or abs(ratio - D) > 1e-9 * max(1.0, ratio):
        raise NonCommensurateRates(
            f"T / T0 = {ratio:g} is not a positive integer")
    q = np.asarray(pulse_vft, dtype=complex)
    shifts = np.asarray(shifts)
    mask = ((shifts[:, None] - shifts[None, :]) % D) == 0
    return (symbol_energy / symbol_period) * np.outer(q, q.conj()) * mask


def noise_matrix_psd(noise, grid, f):
    """
    Effective matrix PSD of white noise plus proper cyclostationary
    interferers at ``f``.

    `noise` needs attributes ``N0`` and ``interferers``; every interferer
    needs ``pulse`` (a :class:`CtftFunction`), ``symbol_energy``,
    ``symbol_period`` and optionally ``comp_energy`` (must be zero).
    """
    spec = grid.spec if isinstance(grid, FrequencyGrid) else grid
    if not noise.N0 > 0:
        raise ValueError("N0 must be positive")
    n = retained_shifts(spec, f)
    r = noise.N0 * np.eye(n.size, dtype=complex)
    for intf in noise.interferers:
        if getattr(intf, 'comp_energy', 0.0) != 0:
            raise NotProper("interferers must carry proper symbol sequences")
        q = intf.pulse(f + n / spec.T)
        r += interferer_matrix_psd(q, n, intf.symbol_energy,
                                   intf.symbol_period, spec.T)
    return r


def augment(auto_f, auto_negf, comp_f):
    """
    Augmented matrix ``[[R(f), R~(f)], [R~(f)^H, J R(-f)^* J]]``.
    """
    auto_f = np.asarray(auto_f, dtype=complex)
    auto_negf = np.asarray(auto_negf, dtype=complex)
    comp_f = np.asarray(comp_f, dtype=complex)
    n1, n2 = auto_f.shape[0], auto_negf.shape[0]
    if (auto_f.shape != (n1, n1) or auto_negf.shape != (n2, n2)
            or comp_f.shape != (n1, n2)):
        raise ShapeMismatch(
            f"incompatible blocks {auto_f.shape}, {auto_negf.shape}, "
            f"{comp_f.shape}")
    J = backward_identity(n2)
    lower = J @ auto_negf.conj() @ J
    return np.block([[auto_f, comp_f], [comp_f.conj().T, lower]])
