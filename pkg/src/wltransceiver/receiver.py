"""Optimal widely linear receiver and the two MSE evaluations.

The receiver filters ``Z(t)`` with ``w1(-t)^*`` and ``Z(t)^*`` with
``w2(-t)^*``. Per frequency ``f`` its effective VFTs are stacked into
``wbar(f) = [w1(f); w2(f)]`` and the transmit VFT is augmented to
``sbar(f) = [s(f); J s(-f)^*]``. For fixed ``sbar`` the MSE integrand

    T M(fT) + wbar^H Rbar wbar - 2 Re(wbar^H d),   d = Hbar Mbar sbar

is minimized by ``wbar = Rbar^{-1} d`` and the minimum is
``T M(fT) - d^H Rbar^{-1} d``.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import hermitian_solve
from .spectra import ShapeMismatch, augment, matrix_psd_linear_mod

__all__ = ['NegativeIntegrand', 'Waveform', 'ReceiverSolution', 'MseReport',
           'augment_tx', 'augmented_model', 'optimal_receiver',
           'receiver_mse', 'gain_c', 'mse_matrix', 'mse_scalar',
           'scalar_integrand']


class NegativeIntegrand(ArithmeticError):
    """An MSE integrand came out negative: the model is inconsistent."""


@dataclass
class Waveform:
    """Per-bin effective VFTs of a waveform at ``+xi[i]`` and ``-xi[i]``."""
    pos: list
    neg: list

    @classmethod
    def zeros(cls, link):
        return cls([np.zeros(len(n), dtype=complex) for n in link.pos.shifts],
                   [np.zeros(len(n), dtype=complex) for n in link.neg.shifts])

    @classmethod
    def from_ctft(cls, fn, link):
        T = link.T
        return cls([fn(f + n / T) for f, n in zip(link.pos.f, link.pos.shifts)],
                   [fn(f + n / T) for f, n in zip(link.neg.f, link.neg.shifts)])

    def side(self, sign):
        return self.pos if sign > 0 else self.neg

    def energy_density(self):
        return (np.array([np.vdot(v, v).real for v in self.pos]),
                np.array([np.vdot(v, v).real for v in self.neg]))

    def max_abs(self):
        return max((np.max(np.abs(v), initial=0.0)
                    for v in self.pos + self.neg), default=0.0)


@dataclass
class ReceiverSolution:
    w1: Waveform
    w2: Waveform


@dataclass
class MseReport:
    """
    Total MSE and its integrand on both sides of the paired grid.

    ``total = sum_i (eps_pos[i] + eps_neg[i]) * df``.
    """
    total: float
    eps_pos: np.ndarray
    eps_neg: np.ndarray
    method: str


def augment_tx(s_f, s_negf):
    """``[s(f); J s(-f)^*]``."""
    s_f = np.asarray(s_f, dtype=complex)
    s_negf = np.asarray(s_negf, dtype=complex)
    if s_f.ndim != 1 or s_negf.ndim != 1:
        raise ShapeMismatch("VFTs must be vectors")
    return np.concatenate([s_f, s_negf[::-1].conj()])


def augmented_model(link, s, i, sign):
    """
    ``(Rbar, d, T M(fT))`` at ``sign * xi[i]`` for transmit waveform `s`.

    ``d = Hbar(f) Mbar(fT) sbar(f)`` is the cross-correlation between the
    augmented observation and the symbol.
    """
    a, b = link.side(sign), link.side(-sign)
    T = link.T
    s_a, s_b = s.side(sign)[i], s.side(-sign)[i]
    h_a, h_b = a.h[i], b.h[i]
    if s_a.shape != h_a.shape or s_b.shape != h_b.shape:
        raise ShapeMismatch(f"waveform and channel VFT lengths differ at "
                            f"bin {i}")
    p_a, p_b = h_a * s_a, h_b * s_b
    rx_a, rt_a = matrix_psd_linear_mod(a.M[i], a.Mc[i], p_a, p_b, T)
    rx_b, _ = matrix_psd_linear_mod(b.M[i], b.Mc[i], p_b, p_a, T)
    rbar = augment(a.RN[i] + rx_a, b.RN[i] + rx_b, rt_a)
    # Hbar Mbar sbar = [M h s(f); M~^* J (h s)(-f)^*]
    d = np.concatenate([a.M[i] * p_a, np.conj(a.Mc[i]) * p_b[::-1].conj()])
    return rbar, d, T * a.M[i]


def optimal_receiver(link, s):
    """Widely linear MMSE receiver ``wbar = Rbar^{-1} Hbar Mbar sbar``."""
    out = {}
    for sign in (1, -1):
        w1, w2 = [], []
        for i in range(link.N):
            n1 = link.side(sign).shifts[i].size
            rbar, d, _ = augmented_model(link, s, i, sign)
            w = hermitian_solve(rbar, d)
            w1.append(w[:n1])
            w2.append(w[n1:])
        out[sign] = (w1, w2)
    return ReceiverSolution(w1=Waveform(out[1][0], out[-1][0]),
                            w2=Waveform(out[1][1], out[-1][1]))


def receiver_mse(link, s, rx):
    """MSE of an arbitrary receiver `rx` for transmit waveform `s`."""
    eps = {}
    for sign in (1, -1):
        vals = np.empty(link.N)
        for i in range(link.N):
            rbar, d, tm = augmented_model(link, s, i, sign)
            w = np.concatenate([rx.w1.side(sign)[i], rx.w2.side(sign)[i]])
            vals[i] = (tm + np.vdot(w, rbar @ w).real
                       - 2 * np.vdot(w, d).real)
        eps[sign] = vals
    return float(np.sum(eps[1] + eps[-1]) * link.df)


def mse_matrix(link, s, check=True):
    """MSE of the optimal receiver from the augmented block matrices."""
    eps = {}
    for sign in (1, -1):
        vals = np.zeros(link.N)
        for i in range(link.N):
            rbar, d, tm = augmented_model(link, s, i, sign)
            if tm == 0:
                continue
            vals[i] = tm - np.vdot(d, hermitian_solve(rbar, d)).real
        eps[sign] = vals
    if check:
        worst = min(eps[1].min(), eps[-1].min())
        if worst < -1e-10:
            raise NegativeIntegrand(f"MSE integrand {worst:g} < 0")
    total = float(np.sum(eps[1] + eps[-1]) * link.df)
    return MseReport(total, eps[1], eps[-1], 'matrix')


def gain_c(link, s):
    """``c(f) = (M(fT)/T) s^H H^H R_N^{-1} H s`` on both sides."""
    out = {}
    for sign in (1, -1):
        side = link.side(sign)
        vals = np.empty(link.N)
        for i in range(link.N):
            p = side.h[i] * s.side(sign)[i]
            q = np.vdot(p, hermitian_solve(side.RN[i], p)).real
            vals[i] = side.M[i] / link.T * q
        out[sign] = vals
    return out[1], out[-1]


def scalar_integrand(TM, k, c_self, c_mirror):
    """``T M / (1 + c(f) + k^2 c(-f) / (1 + c(-f) (1 - k^2)))``."""
    k2 = np.asarray(k, dtype=float) ** 2
    c_self = np.asarray(c_self, dtype=float)
    c_mirror = np.asarray(c_mirror, dtype=float)
    denom = 1 + c_self + k2 * c_mirror / (1 + c_mirror * (1 - k2))
    return np.where(np.asarray(TM) == 0, 0.0, TM / denom)


def mse_scalar(link, c_pos, c_neg):
    """MSE from the per-frequency gains ``c(f)`` and the impropriety."""
    c_pos = np.asarray(c_pos, dtype=float)
    c_neg = np.asarray(c_neg, dtype=float)
    T = link.T
    eps_pos = scalar_integrand(T * link.pos.M, link.k, c_pos, c_neg)
    eps_neg = scalar_integrand(T * link.neg.M, link.k, c_neg, c_pos)
    total = float(np.sum(eps_pos + eps_neg) * link.df)
    return MseReport(total, eps_pos, eps_neg, 'scalar')
