"""Transmit energy allocation and the optimal transmit waveform.

For a given energy density ``a(f) = ||s(f)||^2`` the best transmit VFT is
the top eigenvector of ``H^H R_N^{-1} H`` scaled by ``sqrt(a(f))``; the
gain it buys is ``c(f) = M(fT) lambda(f) a(f) / T``. What remains is a
strictly convex allocation of ``a`` over the paired bins. With

    m = M(xi T)/T, mh = M(-xi T)/T, lam = lambda(xi), lamh = lambda(-xi),
    kb = 1 - k^2,  g(a) = 1 + m lam a kb,  gh(ah) = 1 + mh lamh ah kb,
    h(a, ah) = 1 + m lam a + mh lamh ah + m lam a mh lamh ah kb,

the per-bin objective is

    F(a, ah) = (mh g(a) + m gh(ah)) / h(a, ah)

and the KKT conditions read ``nu_i(a, ah) = nu`` on active entries, where
``nu_i = lam (mh k^2 + m gh^2) / h^2`` (and symmetrically for ``ah``).
A multiplier ``nu`` fixes a candidate density through alternating
updates of ``a`` and ``ah``; a bracketed search on ``nu`` then meets the
power budget.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .numerics import hermitian_solve, top_eigenpair
from .receiver import (Waveform, gain_c, mse_matrix, mse_scalar,
                       optimal_receiver)
from .scenario import link_bins

__all__ = ['NoConvergence', 'DegenerateProblem', 'Infeasible',
           'BinChannelData', 'EnergyDensity', 'KktState', 'TxSolution',
           'Design', 'bin_channel_data', 'alternating_update',
           'candidate_density', 'nu_max', 'stationarity', 'density_power',
           'density_mse', 'outer_solve', 'kkt_state', 'assemble_tx',
           'optimize_link', 'optimize_scenario', 'KKT_TOL', 'kkt_violations']

log = logging.getLogger(__name__)

#: Certificate thresholds: relative stationarity ``|nu - nu_i| / nu`` on
#: active entries, dual feasibility ``mu >= -dual``, absolute
#: complementary slackness ``|mu a|`` and relative primal power residual.
KKT_TOL = {'stationarity': 1e-8, 'dual': 1e-12, 'slackness': 1e-10,
           'power': 1e-9}


class NoConvergence(RuntimeError):
    pass


class DegenerateProblem(ValueError):
    pass


class Infeasible(ValueError):
    pass


@dataclass
class BinChannelData:
    """Per paired bin scalars of the allocation problem."""
    lam: np.ndarray
    lam_hat: np.ndarray
    m: np.ndarray
    m_hat: np.ndarray
    k: np.ndarray
    v_pos: list
    v_neg: list
    T: float
    df: float

    @property
    def kbar(self):
        return 1.0 - self.k ** 2

    @classmethod
    def from_arrays(cls, m, m_hat, lam, lam_hat, k, T=1.0, df=1.0):
        """Scalar-only data (no eigenvectors), for allocation studies."""
        arrs = [np.atleast_1d(np.asarray(x, dtype=float))
                for x in (m, m_hat, lam, lam_hat, k)]
        m, m_hat, lam, lam_hat, k = np.broadcast_arrays(*arrs)
        return cls(lam=lam.copy(), lam_hat=lam_hat.copy(), m=m.copy(),
                   m_hat=m_hat.copy(), k=k.copy(), v_pos=None, v_neg=None,
                   T=T, df=df)


@dataclass
class EnergyDensity:
    a: np.ndarray
    a_hat: np.ndarray
    iterations: np.ndarray = None


@dataclass
class KktState:
    nu: float
    mu: np.ndarray
    mu_hat: np.ndarray
    stationarity: float
    dual_feasibility: float
    slackness: float
    power_residual: float
    iterations: int
    line_search_evals: int

    def violations(self, tol=None):
        return kkt_violations(self, tol)

    def as_dict(self):
        return {'nu': self.nu, 'stationarity': self.stationarity,
                'dual_feasibility': self.dual_feasibility,
                'slackness': self.slackness,
                'power_residual': self.power_residual,
                'max_inner_iterations': self.iterations,
                'line_search_evals': self.line_search_evals}


@dataclass
class TxSolution:
    density: EnergyDensity
    s: Waveform
    nu: float
    mse: float
    power: float
    power_residual: float
    kkt: KktState


def bin_channel_data(link):
    """Top eigenpairs of ``H^H R_N^{-1} H`` and source scalars per bin."""
    out = {}
    for sign in (1, -1):
        side = link.side(sign)
        lams, vs = np.empty(link.N), []
        for i in range(link.N):
            hd = np.diag(side.h[i])
            g = hd.conj().T @ hermitian_solve(side.RN[i], hd)
            lam, v = top_eigenpair(g)
            lams[i] = lam
            vs.append(v)
        out[sign] = (lams, vs)
    T = link.T
    return BinChannelData(lam=out[1][0], lam_hat=out[-1][0],
                          m=link.pos.M / T, m_hat=link.neg.M / T,
                          k=np.asarray(link.k, dtype=float),
                          v_pos=out[1][1], v_neg=out[-1][1], T=T,
                          df=link.df)


# -- per-bin KKT machinery ---------------------------------------------------

def _u(a_other, nu, m, m_o, lam, lam_o, k2, kb):
    """Best response of one side given the other side's energy."""
    g_o = 1 + m_o * lam_o * a_other * kb
    with np.errstate(divide='ignore', invalid='ignore'):
        root = np.sqrt(lam * (m_o * k2 + m * g_o ** 2) / nu)
        val = np.maximum(root - (1 + m_o * lam_o * a_other), 0.0) / (
            lam * m * g_o)
    return np.where((m > 0) & (lam > 0), val, 0.0)


def alternating_update(nu, m, m_hat, lam, lam_hat, k, tol=1e-12,
                       max_iter=200, switch_after=50):
    """
    Solve the per-bin KKT pair for multiplier `nu` (arrays broadcast).

    Starting from ``ah = 0`` the updates ``a = u1(ah)``, ``ah = u2(a)`` are
    applied alternately. ``ah`` then increases monotonically towards the
    fixed point of the increasing map ``u2(u1(.))``, which is bracketed by
    the current iterate and ``u2(0)``; bins still moving after
    `switch_after` sweeps finish with Brent's method on that bracket.
    ``k = 1`` bins are solved in closed form. Returns ``(a, ah, iters)``.
    """
    m, m_hat, lam, lam_hat, k = np.broadcast_arrays(
        *[np.asarray(x, dtype=float) for x in (m, m_hat, lam, lam_hat, k)])
    shape = m.shape
    m, m_hat, lam, lam_hat, k = [np.atleast_1d(x).ravel()
                                 for x in (m, m_hat, lam, lam_hat, k)]
    k2 = k ** 2
    kb = 1 - k2
    n = m.shape
    a = np.zeros(n)
    ah = np.zeros(n)
    iters = np.zeros(n, dtype=int)

    ones = k >= 1.0
    if np.any(ones):
        # all energy to the side with the larger lambda (ties: +f side)
        act = (m > 0) & (lam > 0)
        act_h = (m_hat > 0) & (lam_hat > 0)
        pos = ones & act & (~act_h | (lam >= lam_hat))
        neg = ones & act_h & ~pos
        tot = m + m_hat
        with np.errstate(divide='ignore', invalid='ignore'):
            a = np.where(pos, np.maximum(np.sqrt(lam * tot / nu) - 1, 0)
                         / (m * lam), a)
            ah = np.where(neg, np.maximum(np.sqrt(lam_hat * tot / nu) - 1, 0)
                          / (m_hat * lam_hat), ah)
        iters[ones] = 1

    def u1(x):
        return _u(x, nu, m, m_hat, lam, lam_hat, k2, kb)

    def u2(x):
        return _u(x, nu, m_hat, m, lam_hat, lam, k2, kb)

    live = ~ones
    for it in range(1, switch_after + 1):
        if not np.any(live):
            break
        a_new = np.where(live, u1(ah), a)
        ah_new = np.where(live, u2(a_new), ah)
        done = (live & (np.abs(a_new - a) <= tol * (1 + np.abs(a_new)))
                & (np.abs(ah_new - ah) <= tol * (1 + np.abs(ah_new))))
        a, ah = a_new, ah_new
        iters[live] = it
        live &= ~done

    for idx in zip(*np.nonzero(live)):
        a[idx], ah[idx], extra = _bracketed_fixed_point(
            ah[idx], nu, m[idx], m_hat[idx], lam[idx], lam_hat[idx],
            k2[idx], kb[idx], tol)
        iters[idx] += extra
        if iters[idx] > max_iter:
            raise NoConvergence(f"bin {idx}: {iters[idx]} iterations")
    if shape == ():
        return float(a[0]), float(ah[0]), int(iters[0])
    return a.reshape(shape), ah.reshape(shape), iters.reshape(shape)


def _bracketed_fixed_point(ah0, nu, m, mh, lam, lamh, k2, kb, tol):
    def u1(x):
        return float(_u(x, nu, m, mh, lam, lamh, k2, kb))

    def u2(x):
        return float(_u(x, nu, mh, m, lamh, lam, k2, kb))

    def gap(x):
        return u2(u1(x)) - x

    hi = u2(0.0)
    lo = min(ah0, hi)
    if gap(lo) <= 0 or hi <= lo:
        ah = lo
        calls = 1
    else:
        ah, res = optimize.brentq(gap, lo, hi, xtol=tol * 1e-3,
                                  rtol=4 * np.finfo(float).eps,
                                  full_output=True)
        calls = res.function_calls
    a = u1(ah)
    ah_next = u2(a)
    if abs(ah_next - ah) > tol * (1 + abs(ah)):
        raise NoConvergence(f"fixed point residual {abs(ah_next - ah):g}")
    return a, ah_next, calls


def stationarity(a, a_hat, m, m_hat, lam, lam_hat, k):
    """``(nu_i, nuhat_i)``: the multiplier each side's KKT row implies."""
    kb = 1 - k ** 2
    x = m * lam * a
    y = m_hat * lam_hat * a_hat
    h = 1 + x + y + x * y * kb
    g = 1 + x * kb
    gh = 1 + y * kb
    return (lam * (m_hat * k ** 2 + m * gh ** 2) / h ** 2,
            lam_hat * (m * k ** 2 + m_hat * g ** 2) / h ** 2)


def nu_max(data):
    """Largest multiplier for which some bin is still active."""
    nu0, nu0_hat = stationarity(0.0, 0.0, data.m, data.m_hat, data.lam,
                                data.lam_hat, data.k)
    act = (data.m > 0) & (data.lam > 0)
    act_h = (data.m_hat > 0) & (data.lam_hat > 0)
    vals = np.concatenate([nu0[act], nu0_hat[act_h]])
    top = float(vals.max()) if vals.size else 0.0
    if not top > 0:
        raise DegenerateProblem("no bin can carry signal (nu_max = 0)")
    return top


def candidate_density(nu, data, tol=1e-12, max_iter=200):
    """Energy density satisfying the per-bin KKT rows for multiplier `nu`."""
    a, ah, it = alternating_update(nu, data.m, data.m_hat, data.lam,
                                   data.lam_hat, data.k, tol=tol,
                                   max_iter=max_iter)
    return EnergyDensity(a, ah, it)


def density_power(density, data):
    """Average transmit power ``sum_i (m a + mh ah) df``."""
    return float(np.sum(data.m * density.a + data.m_hat * density.a_hat)
                 * data.df)


def density_mse(density, data):
    """``T^2 df sum_i F(a_i, ah_i)``."""
    x = data.m * data.lam * density.a
    y = data.m_hat * data.lam_hat * density.a_hat
    kb = data.kbar
    num = data.m_hat * (1 + x * kb) + data.m * (1 + y * kb)
    den = 1 + x + y + x * y * kb
    return float(data.T ** 2 * data.df * np.sum(num / den))


def kkt_state(density, nu, data, P_T, evals=0):
    """Multipliers and residuals of the KKT system at `density`."""
    nu_i, nu_h = stationarity(density.a, density.a_hat, data.m, data.m_hat,
                              data.lam, data.lam_hat, data.k)
    act = (data.m > 0) & (data.lam > 0)
    act_h = (data.m_hat > 0) & (data.lam_hat > 0)
    mu = np.where(act, data.m * (nu - nu_i), 0.0)
    mu_h = np.where(act_h, data.m_hat * (nu - nu_h), 0.0)
    on = act & (density.a > 0) & (data.k < 1)
    on_h = act_h & (density.a_hat > 0) & (data.k < 1)
    stat = max(np.max(np.abs(nu - nu_i[on]) / nu, initial=0.0),
               np.max(np.abs(nu - nu_h[on_h]) / nu, initial=0.0))
    # k = 1 bins: the active side must sit at nu, the other at or below
    one = data.k >= 1
    if np.any(one):
        top = np.where(density.a > 0, nu_i, np.where(density.a_hat > 0,
                                                     nu_h, np.nan))
        sel = one & ~np.isnan(top)
        stat = max(stat, np.max(np.abs(nu - top[sel]) / nu, initial=0.0))
    # on active bins mu is pure rounding noise; slackness is judged there
    mu_c = np.where(density.a > 0, 0.0, mu)
    mu_hc = np.where(density.a_hat > 0, 0.0, mu_h)
    dual = min(np.min(mu_c, initial=0.0), np.min(mu_hc, initial=0.0))
    slack = max(np.max(np.abs(mu[on] * density.a[on]), initial=0.0),
                np.max(np.abs(mu_h[on_h] * density.a_hat[on_h]), initial=0.0))
    power = density_power(density, data)
    it = int(np.max(density.iterations)) if density.iterations is not None \
        else 0
    return KktState(nu=nu, mu=mu_c, mu_hat=mu_hc, stationarity=float(stat),
                    dual_feasibility=float(dual), slackness=float(slack),
                    power_residual=abs(power - P_T) / P_T, iterations=it,
                    line_search_evals=evals)


def kkt_violations(state, tol=None):
    """Names of the certificate entries of `state` that exceed `tol`."""
    tol = {**KKT_TOL, **(tol or {})}
    bad = []
    if not state.stationarity <= tol['stationarity']:
        bad.append('stationarity')
    if not state.dual_feasibility >= -tol['dual']:
        bad.append('dual_feasibility')
    if not state.slackness <= tol['slackness']:
        bad.append('slackness')
    if not state.power_residual <= tol['power']:
        bad.append('power_residual')
    return bad


def outer_solve(data, P_T, tol_power=1e-9, tol=1e-12):
    """
    Find the multiplier whose candidate density spends exactly `P_T`.

    The spent power is continuous and non-increasing in ``nu``, zero at
    ``nu_max`` and unbounded as ``nu -> 0``; Brent's method on ``log nu``
    over ``[eps nu_max, nu_max]`` (with the lower end pushed down until it
    brackets) locates the root.

    Returns
    -------
    density : EnergyDensity
    nu : float
    kkt : KktState
    """
    if not P_T > 0:
        raise ValueError("P_T must be positive")
    top = nu_max(data)
    evals = [0]

    def excess(log_nu):
        evals[0] += 1
        d = candidate_density(np.exp(log_nu), data, tol=tol)
        return density_power(d, data) - P_T

    hi = np.log(top)
    lo = np.log(top * 1e-12)
    while excess(lo) < 0:
        lo -= np.log(1e6)
        if lo < np.log(np.finfo(float).tiny) + 50:
            raise Infeasible("power budget cannot be spent")
    log_nu = optimize.brentq(excess, lo, hi, xtol=1e-15,
                             rtol=4 * np.finfo(float).eps, maxiter=200)
    nu = float(np.exp(log_nu))
    density = candidate_density(nu, data, tol=tol)
    state = kkt_state(density, nu, data, P_T, evals[0])
    if state.power_residual > tol_power:
        log.warning("power residual %.3g exceeds %.3g", state.power_residual,
                    tol_power)
    return density, nu, state


def assemble_tx(density, data, nu=None, P_T=None, kkt=None):
    """Transmit VFTs ``sqrt(a) v`` (zero phase) plus summary figures."""
    s_pos = [np.sqrt(a) * v if m > 0 else np.zeros_like(v)
             for a, v, m in zip(density.a, data.v_pos, data.m)]
    s_neg = [np.sqrt(a) * v if m > 0 else np.zeros_like(v)
             for a, v, m in zip(density.a_hat, data.v_neg, data.m_hat)]
    power = density_power(density, data)
    resid = abs(power - P_T) / P_T if P_T else float('nan')
    return TxSolution(density=density, s=Waveform(s_pos, s_neg), nu=nu,
                      mse=density_mse(density, data), power=power,
                      power_residual=resid, kkt=kkt)


@dataclass
class Design:
    """Jointly optimal transmitter and receiver for one scenario."""
    link: object
    data: BinChannelData
    tx: TxSolution
    rx: object
    mse: object
    mse_check: object = None


def optimize_link(link, P_T, tol_power=1e-9, matrix_check=False):
    """Run the full optimization on precomputed per-bin statistics."""
    data = bin_channel_data(link)
    density, nu, state = outer_solve(data, P_T, tol_power=tol_power)
    tx = assemble_tx(density, data, nu=nu, P_T=P_T, kkt=state)
    rx = optimal_receiver(link, tx.s)
    report = mse_scalar(link, *gain_c(link, tx.s))
    check = mse_matrix(link, tx.s) if matrix_check else None
    return Design(link=link, data=data, tx=tx, rx=rx, mse=report,
                  mse_check=check)


def optimize_scenario(scenario, N=None, tol_power=1e-9, matrix_check=False):
    """Optimize the transmitter and receiver of `scenario`."""
    if N is not None:
        scenario = scenario.with_grid_n(N)
    link = link_bins(scenario)
    return optimize_link(link, scenario.power.P_T, tol_power=tol_power,
                         matrix_check=matrix_check)
