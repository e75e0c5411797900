"""Source, channel and noise models plus the scenario JSON loader.

Source statistics are given directly in the frequency domain: the PSD
``M(f)`` and complementary PSD ``M~(f)`` are vectorized callables over the
normalized frequency ``f`` (period 1). Channels and pulses are
:class:`~wltransceiver.spectra.CtftFunction` objects.
"""

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .spectra import (CtftFunction, GridSpec, build_grid, noise_matrix_psd,
                      read_ctft_csv, retained_shifts)

__all__ = ['SosSequenceSpec', 'ChannelSpec', 'InterfererSpec', 'NoiseSpec',
           'PowerConstraint', 'Scenario', 'ScenarioError', 'LinkBins',
           'unbalanced_qam', 'improper_qam', 'from_lag_sequences',
           'srrc_ctft', 'srrc_impulse', 'impropriety_function',
           'flat_channel', 'srrc_interferer', 'link_bins', 'load_scenario',
           'random_scenario', 'esn0_to_power', 'example_scenario']


class ScenarioError(ValueError):
    """Invalid scenario description; the message names the field."""


@dataclass(frozen=True)
class SosSequenceSpec:
    """
    Second-order statistics of a zero-mean SOS symbol sequence.

    Parameters
    ----------
    psd : callable
        ``M(f)``, real and non-negative.
    comp_psd : callable
        ``M~(f)``, even in ``f``.
    power : float
        ``m[0] = E|b|^2``, the integral of ``M`` over one period.
    var_i, var_q : float or None
        In-phase / quadrature variances when the sequence is an
        uncorrelated unbalanced QAM sequence (needed for simulation).
    """
    psd: object
    comp_psd: object
    power: float
    var_i: float = None
    var_q: float = None

    def M(self, f):
        return np.real(np.asarray(self.psd(np.asarray(f, dtype=float)),
                                  dtype=complex))

    def Mc(self, f):
        return np.asarray(self.comp_psd(np.asarray(f, dtype=float)),
                          dtype=complex)

    def k(self, f):
        return impropriety_function(self, f)

    def phase(self, f):
        return np.mod(np.angle(self.Mc(f)), 2 * np.pi)

    @property
    def is_white(self):
        return self.var_i is not None


def _flat(value, dtype):
    return lambda f: np.full(np.shape(f), value, dtype=dtype)


def unbalanced_qam(var_i, var_q):
    """Uncorrelated QAM symbols with uncorrelated I/Q of given variances."""
    if var_i < 0 or var_q < 0 or var_i + var_q <= 0:
        raise ValueError("need var_i, var_q >= 0 with positive sum")
    var_i, var_q = float(var_i), float(var_q)
    return SosSequenceSpec(psd=_flat(var_i + var_q, float),
                           comp_psd=_flat(complex(var_i - var_q), complex),
                           power=var_i + var_q, var_i=var_i, var_q=var_q)


def improper_qam(power, k):
    """Unbalanced QAM with total power `power` and impropriety `k`."""
    if not 0 <= k <= 1:
        raise ValueError("k must lie in [0, 1]")
    return unbalanced_qam(power * (1 + k) / 2, power * (1 - k) / 2)


def from_lag_sequences(m, mc):
    """
    Build a spec from finite covariance sequences by direct DTFT.

    ``m[k] = E{b[l+k] b[l]^*}`` and ``mc[k] = E{b[l+k] b[l]}`` for
    ``k = 0..K``; negative lags follow from ``m[-k] = m[k]^*`` and
    ``mc[-k] = mc[k]``.
    """
    m = np.asarray(m, dtype=complex)
    mc = np.asarray(mc, dtype=complex)

    def psd(f):
        f = np.asarray(f, dtype=float)
        out = np.full(f.shape, m[0].real)
        for k in range(1, m.size):
            out = out + 2 * np.real(m[k] * np.exp(-2j * np.pi * f * k))
        return out

    def comp(f):
        f = np.asarray(f, dtype=float)
        out = np.full(f.shape, mc[0], dtype=complex)
        for k in range(1, mc.size):
            out = out + 2 * mc[k] * np.cos(2 * np.pi * f * k)
        return out

    return SosSequenceSpec(psd=psd, comp_psd=comp, power=float(m[0].real))


def impropriety_function(spec, f):
    """``|M~(f)| / sqrt(M(f) M(-f))``, or 0 where ``M(f) M(-f) = 0``."""
    f = np.asarray(f, dtype=float)
    prod = spec.M(f) * spec.M(-f)
    mag = np.abs(spec.Mc(f))
    with np.errstate(divide='ignore', invalid='ignore'):
        k = np.where(prod > 0, mag / np.sqrt(np.where(prod > 0, prod, 1.0)),
                     0.0)
    # rounding can push |M~| a hair above the Cauchy-Schwarz bound
    return np.clip(k, 0.0, 1.0)


def srrc_ctft(rolloff, T):
    """Unit-energy square-root raised-cosine spectrum for period `T`."""
    if not 0 <= rolloff <= 1:
        raise ValueError("rolloff must lie in [0, 1]")
    f1 = (1 - rolloff) / (2 * T)
    f2 = (1 + rolloff) / (2 * T)

    def spectrum(xi):
        a = np.abs(xi)
        rc = np.ones(a.shape)
        if rolloff > 0:
            trans = a > f1
            rc[trans] = 0.5 * (1 + np.cos(np.pi * T / rolloff
                                          * (a[trans] - f1)))
        return np.sqrt(T * rc)

    return CtftFunction(spectrum, (-f2, f2))


def srrc_impulse(t, rolloff, T):
    """Closed-form unit-energy SRRC impulse response."""
    t = np.asarray(t, dtype=float) / T
    a = rolloff
    out = np.empty(t.shape)
    zero = np.abs(t) < 1e-12
    if a > 0:
        sing = np.abs(np.abs(t) - 1 / (4 * a)) < 1e-9
    else:
        sing = np.zeros(t.shape, dtype=bool)
    reg = ~(zero | sing)
    tr = t[reg]
    out[reg] = ((np.sin(np.pi * tr * (1 - a))
                 + 4 * a * tr * np.cos(np.pi * tr * (1 + a)))
                / (np.pi * tr * (1 - (4 * a * tr) ** 2)))
    out[zero] = 1 - a + 4 * a / np.pi
    if np.any(sing):
        out[sing] = a / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * a))
                                      + (1 - 2 / np.pi)
                                      * np.cos(np.pi / (4 * a)))
    return out / np.sqrt(T)


@dataclass(frozen=True)
class ChannelSpec:
    ctft: CtftFunction


def flat_channel(gain, B):
    return ChannelSpec(CtftFunction.flat(gain, (-B, B)))


@dataclass(frozen=True)
class InterfererSpec:
    """
    Proper linearly modulated interferer.

    ``pulse`` is the received pulse CTFT, ``symbol_energy`` the symbol
    variance and ``symbol_period`` its symbol period ``T0`` (the desired
    symbol period must be an integer multiple of it).
    """
    pulse: CtftFunction
    symbol_energy: float
    symbol_period: float
    comp_energy: float = 0.0

    def __post_init__(self):
        if self.comp_energy != 0:
            raise ValueError("interferer symbols must be proper")


def srrc_interferer(rolloff, esn0_db, N0, T, rate_divisor=1, shift=0.0):
    """
    SRRC/QPSK interferer with ``Es/N0 = esn0_db`` and period ``T / D``.

    `shift` is a carrier offset in units of ``1/T``.
    """
    D = int(rate_divisor)
    if D != rate_divisor or D < 1:
        raise ValueError("rate_divisor must be a positive integer")
    T0 = T / D
    pulse = srrc_ctft(rolloff, T0)
    if shift:
        pulse = pulse.shifted(shift / T)
    return InterfererSpec(pulse=pulse, symbol_energy=N0 * 10 ** (esn0_db / 10),
                          symbol_period=T0)


@dataclass(frozen=True)
class NoiseSpec:
    N0: float
    interferers: tuple = ()

    def __post_init__(self):
        if not self.N0 > 0:
            raise ValueError("N0 must be positive")


@dataclass(frozen=True)
class PowerConstraint:
    P_T: float

    def __post_init__(self):
        if not self.P_T > 0:
            raise ValueError("P_T must be positive")


def esn0_to_power(esn0_db, N0, T):
    """Average power giving transmit symbol energy ``P_T T = Es``."""
    return N0 * 10 ** (esn0_db / 10) / T


@dataclass(frozen=True)
class Scenario:
    grid: GridSpec
    source: SosSequenceSpec
    channel: ChannelSpec
    noise: NoiseSpec
    power: PowerConstraint
    meta: dict = field(default_factory=dict, compare=False)

    def with_power(self, P_T):
        return replace(self, power=PowerConstraint(P_T))

    def with_source(self, source):
        return replace(self, source=source)

    def with_grid_n(self, N):
        return replace(self, grid=GridSpec(self.grid.B, self.grid.T, N))


@dataclass
class SideBins:
    """Per-bin statistics on one side (``+xi`` or ``-xi``) of the grid."""
    f: np.ndarray
    shifts: tuple
    h: list
    RN: list
    M: np.ndarray
    Mc: np.ndarray


@dataclass
class LinkBins:
    """Everything the optimizer needs, evaluated on the paired grid."""
    grid: object
    pos: SideBins
    neg: SideBins
    k: np.ndarray

    @property
    def T(self):
        return self.grid.T

    @property
    def df(self):
        return self.grid.df

    @property
    def N(self):
        return self.grid.N

    def side(self, sign):
        return self.pos if sign > 0 else self.neg


def link_bins(scenario, grid=None):
    """Evaluate channel VFTs, noise matrix PSDs and source spectra."""
    grid = grid if grid is not None else build_grid(scenario.grid)
    T = grid.T
    sides = []
    for sign in (1, -1):
        f = sign * grid.xi
        shifts, hs, rns = [], [], []
        for fi in f:
            n = retained_shifts(grid.spec, fi)
            shifts.append(n)
            hs.append(scenario.channel.ctft(fi + n / T))
            rns.append(noise_matrix_psd(scenario.noise, grid.spec, fi))
        sides.append(SideBins(f=f, shifts=tuple(shifts), h=hs, RN=rns,
                              M=scenario.source.M(f * T),
                              Mc=scenario.source.Mc(f * T)))
    k = impropriety_function(scenario.source, grid.xi * T)
    return LinkBins(grid=grid, pos=sides[0], neg=sides[1], k=k)


# -- JSON --------------------------------------------------------------------

_TYPE_NAMES = {int: 'a number', float: 'a number', str: 'a string',
               list: 'a list', dict: 'an object'}


def _get(d, key, path, kind=(int, float), default=None, required=True):
    if not isinstance(d, dict):
        raise ScenarioError(f"{path}: expected an object")
    if key not in d:
        if required:
            raise ScenarioError(f"{path}.{key}: missing")
        return default
    val = d[key]
    if kind is not None and (not isinstance(val, kind)
                             or isinstance(val, bool)):
        names = kind if isinstance(kind, tuple) else (kind,)
        want = ' or '.join(dict.fromkeys(_TYPE_NAMES.get(k, k.__name__) for k in names))
        raise ScenarioError(f"{path}.{key}: expected {want}, got {val!r}")
    return val


def _positive(val, name):
    if not (isinstance(val, (int, float)) and val > 0 and math.isfinite(val)):
        raise ScenarioError(f"{name}: must be a positive number")
    return float(val)


def _tabulated_source(tab, path):
    f = np.asarray(_get(tab, 'f', path, list), dtype=float)
    M = np.asarray(_get(tab, 'M', path, list), dtype=float)
    mc_raw = _get(tab, 'M_comp', path, list)
    try:
        mc = np.array([complex(v[0], v[1]) if isinstance(v, list)
                       else complex(v) for v in mc_raw])
    except (TypeError, IndexError, ValueError):
        raise ScenarioError(f"{path}.M_comp: entries must be numbers "
                            "or [re, im] pairs") from None
    if not (f.size == M.size == mc.size and f.size >= 2):
        raise ScenarioError(f"{path}: f, M and M_comp must have equal length")
    if np.any(np.diff(f) <= 0) or f[0] < -0.5 or f[-1] > 0.5:
        raise ScenarioError(f"{path}.f: must increase within [-0.5, 0.5]")
    if np.any(M < 0):
        raise ScenarioError(f"{path}.M: must be non-negative")

    def wrap(x):
        return np.mod(np.asarray(x, dtype=float) + 0.5, 1.0) - 0.5

    def psd(x):
        return np.interp(wrap(x), f, M, period=1.0)

    def comp(x):
        x = wrap(x)
        return (np.interp(x, f, mc.real, period=1.0)
                + 1j * np.interp(x, f, mc.imag, period=1.0))

    probe = np.linspace(-0.5, 0.5, 2001)
    if np.max(np.abs(comp(probe) - comp(-probe))) > 1e-9 * (1 + np.max(M)):
        raise ScenarioError(f"{path}.M_comp: must be even in f")
    if np.any(np.abs(comp(probe)) ** 2
              > psd(probe) * psd(-probe) * (1 + 1e-9) + 1e-15):
        raise ScenarioError(f"{path}.M_comp: violates |M~(f)|^2 <= "
                            "M(f) M(-f)")
    power = float(np.mean(psd(np.arange(4096) / 4096 - 0.5)))
    return SosSequenceSpec(psd=psd, comp_psd=comp, power=power)


def _parse_source(src):
    path = 'source'
    if not isinstance(src, dict):
        raise ScenarioError("source: expected an object")
    if 'tabulated' in src:
        return _tabulated_source(src['tabulated'], 'source.tabulated')
    if 'k' in src:
        power = _positive(_get(src, 'power', path, default=1.0,
                               required=False), 'source.power')
        k = _get(src, 'k', path)
        if not 0 <= k <= 1:
            raise ScenarioError("source.k: must lie in [0, 1]")
        return improper_qam(power, k)
    vi = _get(src, 'var_i', path)
    vq = _get(src, 'var_q', path)
    if vi < 0 or vq < 0 or vi + vq <= 0:
        raise ScenarioError("source.var_i/var_q: must be >= 0 with "
                            "positive sum")
    return unbalanced_qam(vi, vq)


def _parse_channel(ch, B, base_dir):
    if ch is None:
        return flat_channel(1.0, B)
    typ = _get(ch, 'type', 'channel', str)
    gain = _get(ch, 'gain', 'channel', (int, float), default=1.0,
                required=False)
    if typ == 'flat':
        return flat_channel(gain, B)
    if typ == 'tabulated':
        p = _get(ch, 'path', 'channel', str)
        if base_dir and not os.path.isabs(p):
            p = os.path.join(base_dir, p)
        try:
            fn = read_ctft_csv(p)
        except (OSError, ValueError) as exc:
            raise ScenarioError(f"channel.path: {exc}") from None
        return ChannelSpec(fn.scaled(gain).truncated(B))
    raise ScenarioError(f"channel.type: unknown type {typ!r}")


def _parse_noise(nz, T):
    N0 = _positive(_get(nz, 'N0', 'noise'), 'noise.N0')
    raw = _get(nz, 'interferers', 'noise', list, default=[], required=False)
    intfs = []
    for j, it in enumerate(raw):
        p = f'noise.interferers[{j}]'
        rolloff = _get(it, 'rolloff', p)
        if not 0 <= rolloff <= 1:
            raise ScenarioError(f"{p}.rolloff: must lie in [0, 1]")
        esn0 = _get(it, 'EsN0_dB', p)
        D = _get(it, 'rate_divisor', p, int, default=1, required=False)
        if D < 1:
            raise ScenarioError(f"{p}.rate_divisor: must be a positive "
                                "integer")
        shift = _get(it, 'shift', p, default=0.0, required=False)
        intfs.append(srrc_interferer(rolloff, esn0, N0, T, D, shift))
    return NoiseSpec(N0=N0, interferers=tuple(intfs))


def load_scenario(obj, base_dir=None):
    """
    Build a :class:`Scenario` from a JSON path, string or parsed dict.

    Schema::

        {
          "T": 1.0,                                   # optional
          "grid": {"B_times_T": 0.625, "N": 256},
          "source": {"var_i": 0.9, "var_q": 0.1}
                  | {"power": 1.0, "k": 0.8}
                  | {"tabulated": {"f": [...], "M": [...],
                                   "M_comp": [[re, im], ...]}},
          "channel": {"type": "flat", "gain": 1.0}
                   | {"type": "tabulated", "path": "h.csv", "gain": 1.0},
          "noise": {"N0": 1.0,
                    "interferers": [{"rolloff": 0.25, "EsN0_dB": 10,
                                     "rate_divisor": 1, "shift": 0.0}]},
          "power": {"P_T": 3.16} | {"EsN0_dB": 5}
        }

    ``rate_divisor`` is the integer ``D = T / T0`` (interferer symbols per
    desired symbol) and ``shift`` a carrier offset in units of ``1/T``.
    ``power.EsN0_dB`` sets ``P_T = N0 10^(EsN0/10) / T`` so that the
    transmitted energy per symbol ``P_T T`` equals ``Es``.
    """
    if isinstance(obj, (str, os.PathLike)) and os.path.exists(obj):
        base_dir = base_dir or os.path.dirname(os.path.abspath(obj))
        with open(obj) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"invalid JSON: {exc}") from None
    elif isinstance(obj, str):
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ScenarioError("scenario: expected a JSON object")

    T = _positive(_get(obj, 'T', 'scenario', default=1.0, required=False),
                  'T')
    g = _get(obj, 'grid', 'scenario', dict)
    BT = _positive(_get(g, 'B_times_T', 'grid'), 'grid.B_times_T')
    N = _get(g, 'N', 'grid', int, default=256, required=False)
    try:
        grid = GridSpec(B=BT / T, T=T, N=N)
    except ValueError as exc:
        raise ScenarioError(f"grid: {exc}") from None

    source = _parse_source(_get(obj, 'source', 'scenario', dict))
    channel = _parse_channel(obj.get('channel'), grid.B, base_dir)
    noise = _parse_noise(_get(obj, 'noise', 'scenario', dict), T)

    pw = _get(obj, 'power', 'scenario', dict)
    if 'P_T' in pw:
        P_T = _positive(pw['P_T'], 'power.P_T')
    elif 'EsN0_dB' in pw:
        esn0 = _get(pw, 'EsN0_dB', 'power')
        P_T = esn0_to_power(esn0, noise.N0, T)
    else:
        raise ScenarioError("power: need P_T or EsN0_dB")
    return Scenario(grid=grid, source=source, channel=channel, noise=noise,
                    power=PowerConstraint(P_T), meta={'raw': obj})


# -- random scenarios ---------------------------------------------------------

def _random_source(rng):
    p0 = rng.uniform(0.5, 2.0)
    a, b = rng.uniform(-0.4, 0.4, size=2)
    kind = rng.integers(4)
    if kind == 0:
        k0, k1 = 0.0, 0.0
    elif kind == 1:
        k0, k1 = 1.0, 0.0
    else:
        k0 = rng.uniform(0, 1)
        k1 = rng.uniform(-1, 1) * min(k0, 1 - k0)
    ph0, ph1 = rng.uniform(0, 2 * np.pi), rng.uniform(-1, 1)

    def psd(f):
        f = np.asarray(f, dtype=float)
        return p0 * (1 + a * np.cos(2 * np.pi * f) + b * np.sin(2 * np.pi * f))

    def comp(f):
        f = np.asarray(f, dtype=float)
        kk = k0 + k1 * np.cos(2 * np.pi * f)
        ph = ph0 + ph1 * np.cos(2 * np.pi * f)
        return kk * np.sqrt(psd(f) * psd(-f)) * np.exp(1j * ph)

    return SosSequenceSpec(psd=psd, comp_psd=comp, power=p0)


def _random_channel(rng, B):
    n = 3
    amp = rng.normal(size=n) + 1j * rng.normal(size=n)
    mu = rng.uniform(-B, B, size=n)
    width = rng.uniform(0.2, 1.0, size=n) * B
    base = complex(rng.normal(), rng.normal())

    def H(xi):
        xi = np.asarray(xi, dtype=float)[..., None]
        return base + np.sum(amp * np.exp(-((xi - mu) / width) ** 2), axis=-1)
    return ChannelSpec(CtftFunction(H, (-B, B)))


def random_scenario(rng, L=None, N=8, n_interferers=None, T=1.0):
    """
    Random valid scenario used by property tests and ``check --random``.

    ``L`` picks the excess-bandwidth regime (``beta = 0`` for 0, ``beta`` in
    ``(2L-2, 2L]`` otherwise); smooth random channel, 1-3 SRRC interferers
    with random rates, offsets and powers, and a random colored improper
    source.
    """
    if L is None:
        L = int(rng.integers(3))
    beta = 0.0 if L == 0 else rng.uniform(2 * L - 2 + 0.05, 2 * L)
    B = (1 + beta) / (2 * T)
    grid = GridSpec(B=B, T=T, N=N)
    N0 = rng.uniform(0.05, 1.0)
    if n_interferers is None:
        n_interferers = int(rng.integers(1, 4))
    intfs = tuple(
        srrc_interferer(rng.uniform(0, 1), rng.uniform(-5, 15), N0, T,
                        int(rng.integers(1, 3)), rng.uniform(-0.5, 0.5))
        for _ in range(n_interferers))
    return Scenario(grid=grid, source=_random_source(rng),
                    channel=_random_channel(rng, B),
                    noise=NoiseSpec(N0, intfs),
                    power=PowerConstraint(rng.uniform(0.1, 10.0) / T))


def example_scenario(k, esn0_db=5.0, n_interferers=2, shifts=(0.0, 0.3),
                     N=256, T=1.0, N0=1.0, excess=0.25, intf_rolloff=0.25,
                     intf_esn0_db=10.0):
    """
    Reference link used by the demos and the acceptance tests.

    Flat unit channel over ``B = (1 + excess) / (2T)``, white noise ``N0``
    and `n_interferers` uncorrelated SRRC/QPSK interferers at the desired
    symbol rate with ``Es/N0 = intf_esn0_db``; the ``j``-th is carrier
    shifted by ``shifts[j] / T``. The source is unbalanced QAM with unit
    power and impropriety `k`, sent with ``P_T T = N0 10^(esn0_db/10)``.
    """
    B = (1 + excess) / (2 * T)
    intfs = tuple(srrc_interferer(intf_rolloff, intf_esn0_db, N0, T, 1,
                                  shifts[j])
                  for j in range(n_interferers))
    return Scenario(grid=GridSpec(B=B, T=T, N=N),
                    source=improper_qam(1.0, k),
                    channel=flat_channel(1.0, B),
                    noise=NoiseSpec(N0, intfs),
                    power=PowerConstraint(esn0_to_power(esn0_db, N0, T)))
