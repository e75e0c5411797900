"""Time-domain Monte Carlo check of the analytic MSE.

The link is simulated at ``Q`` samples per symbol in independent blocks
of ``K`` symbols, each extended anti-periodically (``x(t + KT) = -x(t)``).
Filtering such a signal by a band-limited response is an exact product on
the half-bin offset DFT grid ``xi_q = (q + 1/2) / (K T)``, so nothing is
lost to edge effects and no burn-in is needed. The offset keeps every grid
point off ``f = 0``, ``f = 1/(2T)`` and the optimizer's bin edges, where
a frequency would be its own mirror image. Transmit and receive responses are rebuilt from their per-bin
VFTs by holding each bin's value constant over the bin; by default the
channel and interferer pulses are held the same way.

With ``dt = T / Q`` the DFT of the samples of ``x(t) = sum_l b[l] s(t-lT)``
is ``S(xi_q) B[q mod K] / dt`` where ``B`` is the offset DFT of the
symbols, and the receiver output ``int w1(t-lT)^* Z(t) dt`` is sample
``lQ`` of the inverse offset DFT of ``W1(xi_q)^* Z[q]``.
"""

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .receiver import Waveform, receiver_mse
from .scenario import link_bins

__all__ = ['SimConfig', 'TapSet', 'SimReport', 'TailEnergyExceeded',
           'DenseGrid', 'dense_grid', 'waveform_on_grid', 'waveform_to_taps',
           'ctft_to_taps', 'build_tapset', 'draw_symbols', 'run_link']

log = logging.getLogger(__name__)


class TailEnergyExceeded(ValueError):
    """Truncating the taps to the filter span drops too much energy."""


@dataclass(frozen=True)
class SimConfig:
    """
    Monte Carlo settings.

    Parameters
    ----------
    Q : int
        Samples per symbol; ``Q / T`` must be at least ``2B``.
    num_symbols : int
    burn_in : int
        Symbols dropped at both ends of every block. Circular blocks need
        none, so the default is 0.
    rng_seed : int
    filter_span : int
        FIR length in symbols used by :func:`waveform_to_taps`.
    block_symbols : int
        Symbols per circular block, rounded up to a multiple of ``2N``.
    batch_symbols : int
        Batch length for the batch-means standard error.
    hold_spectra : bool
        Hold the channel, the interferer pulses and a colored source's
        spectra constant across each optimizer bin, as the transmit and
        receive responses are, so the simulated link is exactly the
        discretized one. With False the true spectra are used and the result carries the discretization
        error, which is first order in ``1/N`` when a bin straddles a
        spectral edge.
    """
    Q: int = 8
    num_symbols: int = 100_000
    burn_in: int = 0
    rng_seed: int = 0
    filter_span: int = 32
    block_symbols: int = 4096
    batch_symbols: int = 1000
    hold_spectra: bool = True

    def __post_init__(self):
        if self.Q < 2 or self.num_symbols < 1 or self.burn_in < 0:
            raise ValueError("need Q >= 2, num_symbols >= 1, burn_in >= 0")
        if self.num_symbols < 10 * self.burn_in:
            raise ValueError("num_symbols must be at least 10 * burn_in")


@dataclass
class TapSet:
    """
    FIR taps at rate ``Q / T``; ``delay`` is the index of ``t = 0``.

    Taps are samples ``g(m T/Q)`` of the impulse responses, so
    ``sum |g|^2 T/Q`` approximates the waveform energy.
    """
    s: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    h: np.ndarray
    delay: int
    rate: float
    tail_energy: dict


@dataclass
class SimReport:
    empirical_mse: float
    std_err: float
    analytic_mse: float
    empirical_power: float
    num_symbols: int
    seed: int

    def as_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.as_dict(), **kw)


@dataclass(frozen=True)
class DenseGrid:
    """
    Half-bin offset DFT frequencies of a ``K``-symbol block.

    ``xi = (q + 1/2) / (K T)`` for the ``K Q`` DFT indices ``q``; each point
    is tagged with its optimizer bin, side and spectral shift. No point
    falls on ``0``, on ``1/(2T)`` or on a bin edge, and ``-xi`` is always
    a grid point of the mirror bin.
    """
    K: int
    Q: int
    T: float
    q: np.ndarray
    xi: np.ndarray
    side: np.ndarray
    bin: np.ndarray
    shift: np.ndarray


def dense_grid(grid, K, Q):
    """Map every point of the offset DFT grid onto the optimizer bins."""
    N, T = grid.N, grid.T
    if K % (2 * N):
        raise ValueError("K must be a multiple of 2N")
    q = np.fft.fftfreq(K * Q, 1.0 / (K * Q)).round().astype(np.int64)
    # integer bookkeeping in half steps: xi = u / (2 K T) with u odd
    u = 2 * q + 1
    r = np.mod(u + K, 2 * K) - K
    shift = (u - r) // (2 * K)
    side = np.where(r > 0, 1, -1)
    bin_ = np.abs(r) // (K // N)
    return DenseGrid(K=K, Q=Q, T=T, q=q, xi=u / (2.0 * K * T), side=side,
                     bin=bin_, shift=shift)


def _ramp(n):
    return np.exp(-1j * np.pi * np.arange(n) / n)


def _fft_odd(x):
    """DFT at half-bin offset frequencies ``(q + 1/2) / n``."""
    return np.fft.fft(x * _ramp(x.shape[-1]))


def _ifft_odd(X):
    return np.fft.ifft(X) * _ramp(X.shape[-1]).conj()


def waveform_on_grid(wave, link, dense):
    """Piecewise-constant CTFT of a per-bin waveform on `dense`."""
    L = link.grid.spec.L
    table = np.zeros((2, link.N, 2 * L + 1), dtype=complex)
    for k, sign in enumerate((1, -1)):
        shifts = link.side(sign).shifts
        for i, vals in enumerate(wave.side(sign)):
            table[k, i, shifts[i] + L] = vals
    out = np.zeros(dense.xi.shape, dtype=complex)
    ok = np.abs(dense.shift) <= L
    k = np.where(dense.side[ok] > 0, 0, 1)
    out[ok] = table[k, dense.bin[ok], dense.shift[ok] + L]
    return out


def _taps_from_spectrum(spec_vals, Q, T, span, tail_tol):
    dt = T / Q
    g = _ifft_odd(spec_vals) / dt
    n = g.size
    half = span * Q // 2
    # the block response is anti-periodic: g[m - n] = -g[m]
    m = np.arange(-half, half)
    taps = np.where(m >= 0, g[m % n], -g[m % n])
    total = np.sum(np.abs(g) ** 2)
    tail = 0.0 if total == 0 else 1.0 - np.sum(np.abs(taps) ** 2) / total
    if tail_tol is not None and tail > tail_tol:
        raise TailEnergyExceeded(
            f"truncation to {span} symbols drops {tail:.3g} of the tap "
            f"energy (limit {tail_tol:g}); increase filter_span")
    return taps, half, max(tail, 0.0)


def _long_block(N, span):
    return 2 * N * max(4, -(-4 * span // (2 * N)))


def waveform_to_taps(wave, link, cfg, tail_tol=1e-6):
    """
    FIR taps of a per-bin waveform.

    The bin values are held constant across each bin on a DFT grid several
    times longer than the span, inverse transformed and cut to
    ``cfg.filter_span`` symbols centred on ``t = 0``.

    Returns
    -------
    taps : complex array of length ``filter_span * Q``
    delay : int
        Index of ``t = 0`` in `taps`.
    tail : float
        Fraction of energy discarded by the truncation.
    """
    dense = dense_grid(link.grid, _long_block(link.N, cfg.filter_span),
                       cfg.Q)
    vals = waveform_on_grid(wave, link, dense)
    return _taps_from_spectrum(vals, cfg.Q, link.T, cfg.filter_span,
                               tail_tol)


def ctft_to_taps(fn, link, cfg, tail_tol=1e-6):
    """Like :func:`waveform_to_taps` for a continuous CTFT."""
    dense = dense_grid(link.grid, _long_block(link.N, cfg.filter_span),
                       cfg.Q)
    return _taps_from_spectrum(fn(dense.xi), cfg.Q, link.T, cfg.filter_span,
                               tail_tol)


def build_tapset(scenario, tx, rx, cfg, link=None, tail_tol=1e-6):
    """Taps of ``s``, ``w1``, ``w2`` and ``h`` for export."""
    link = link if link is not None else link_bins(scenario)
    out, tails = {}, {}
    for name, w in (('s', tx.s), ('w1', rx.w1), ('w2', rx.w2)):
        out[name], delay, tails[name] = waveform_to_taps(w, link, cfg,
                                                         tail_tol)
    out['h'], _, tails['h'] = ctft_to_taps(scenario.channel.ctft, link, cfg,
                                           tail_tol)
    return TapSet(delay=delay, rate=cfg.Q / link.T, tail_energy=tails, **out)


def draw_symbols(source, K, rng, hold_bins=None):
    """
    ``K`` symbols with the second-order statistics of `source`.

    Uncorrelated QAM sources draw independent Gaussian I and Q parts.
    Colored sources are synthesized on the offset DFT grid, where
    ``nu_k = (k + 1/2) / K`` and ``-nu_k`` belongs to index ``K - 1 - k``;
    the pair ``(B[k], B[K-1-k]^*)`` gets covariance
    ``K [[M(nu), M~(nu)], [M~(nu)^*, M(-nu)]]``. With `hold_bins` set to
    ``N`` the spectra are taken at the centre of the enclosing one of the
    ``2N`` optimizer bins.
    """
    if source.is_white:
        return (np.sqrt(source.var_i) * rng.standard_normal(K)
                + 1j * np.sqrt(source.var_q) * rng.standard_normal(K))
    if K % 2:
        raise ValueError("K must be even")
    k = np.arange(K // 2)
    nu = (k + 0.5) / K
    if hold_bins:
        nu = (np.floor(nu * 2 * hold_bins) + 0.5) / (2 * hold_bins)
    M, Mn, Mc = source.M(nu), source.M(-nu), source.Mc(nu)
    cov = K * np.stack([np.stack([M, Mc], -1),
                        np.stack([Mc.conj(), Mn], -1)], -2)
    w, v = np.linalg.eigh(cov)
    root = v * np.sqrt(np.clip(w, 0, None))[..., None, :]
    g = rng.standard_normal((k.size, 2)) + 1j * rng.standard_normal(
        (k.size, 2))
    pair = np.einsum('kij,kj->ki', root, g / np.sqrt(2))
    Bk = np.empty(K, dtype=complex)
    Bk[k] = pair[:, 0]
    Bk[K - 1 - k] = pair[:, 1].conj()
    return _ifft_odd(Bk)


def _batch_se(x, batch):
    n = x.size
    batch = min(batch, max(1, n // 10))
    nb = n // batch
    if nb < 2:
        return float('nan')
    means = x[:nb * batch].reshape(nb, batch).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(nb))


def run_link(scenario, tx, rx, cfg, link=None):
    """
    Simulate the link and compare against the analytic MSE.

    Parameters
    ----------
    scenario : Scenario
        The scenario `tx` and `rx` were designed for.
    tx : TxSolution or Waveform
        Transmit waveform (``tx.s`` is used when present).
    rx : ReceiverSolution
        Any widely linear receiver; the analytic figure is the MSE of this
        receiver, so e.g. a zeroed ``w2`` is compared against its own value.
    cfg : SimConfig

    Returns
    -------
    SimReport
    """
    link = link if link is not None else link_bins(scenario)
    s = tx.s if hasattr(tx, 's') else tx
    grid = link.grid
    T, N, Q = grid.T, grid.N, cfg.Q
    if Q < 2 * (grid.spec.B + grid.df) * T:
        raise ValueError(f"Q = {Q} aliases the band: need Q/T >= 2(B + df)")
    K = 2 * N * max(1, -(-cfg.block_symbols // (2 * N)))
    dense = dense_grid(grid, K, Q)
    dt = T / Q
    S = waveform_on_grid(s, link, dense)
    W1c = waveform_on_grid(rx.w1, link, dense).conj()
    W2c = waveform_on_grid(rx.w2, link, dense).conj()
    if cfg.hold_spectra:
        def spectrum(fn):
            return waveform_on_grid(Waveform.from_ctft(fn, link), link, dense)
    else:
        def spectrum(fn):
            return fn(dense.xi)
    HS = spectrum(scenario.channel.ctft) * S / dt
    q = dense.q
    intf = []
    for it in scenario.noise.interferers:
        D = int(round(T / it.symbol_period))
        intf.append((D, spectrum(it.pulse) / dt,
                     np.sqrt(it.symbol_energy / 2)))
    noise_sd = np.sqrt(scenario.noise.N0 / dt / 2)

    keep = K - 2 * cfg.burn_in
    n_blocks = -(-cfg.num_symbols // keep)
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(n_blocks)
    errs, power = [], 0.0
    for ss in seeds:
        rng = np.random.default_rng(ss)
        b = draw_symbols(scenario.source, K, rng,
                         hold_bins=N if cfg.hold_spectra else None)
        Bq = _fft_odd(b)[np.mod(q, K)]
        power += np.mean(np.abs(_ifft_odd(S * Bq / dt)) ** 2)
        Zf = HS * Bq
        for D, Qd, amp in intf:
            d = amp * (rng.choice([-1.0, 1.0], K * D)
                       + 1j * rng.choice([-1.0, 1.0], K * D))
            Zf = Zf + Qd * _fft_odd(d)[np.mod(q, K * D)]
        z = _ifft_odd(Zf) + noise_sd * (rng.standard_normal(K * Q)
                                        + 1j * rng.standard_normal(K * Q))
        z1 = _ifft_odd(W1c * _fft_odd(z))[::Q]
        z2 = _ifft_odd(W2c * _fft_odd(z.conj()))[::Q]
        e = np.abs(z1 + z2 - b) ** 2
        errs.append(e[cfg.burn_in:K - cfg.burn_in])
    err = np.concatenate(errs)[:cfg.num_symbols]
    analytic = receiver_mse(link, s, rx)
    return SimReport(empirical_mse=float(err.mean()),
                     std_err=_batch_se(err, cfg.batch_symbols),
                     analytic_mse=float(analytic),
                     empirical_power=float(power / n_blocks),
                     num_symbols=int(err.size), seed=int(cfg.rng_seed))
