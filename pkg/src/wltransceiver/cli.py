"""Command line front end.

Subcommands
-----------
optimize  scenario.json -> solution.json, spectra.csv
sweep     scenario.json --axis esn0|k --values ... -> mse_curve.csv
simulate  scenario.json -> sim_report.json
check     [scenario.json ...] [--random n] -> check_report.json

Every run also writes ``manifest.json`` listing its outputs. Exit codes:
0 ok, 1 input error, 2 numerical failure, 3 invariant failure.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .numerics import NotPositiveDefinite
from .receiver import (NegativeIntegrand, ReceiverSolution, Waveform,
                       receiver_mse, gain_c, mse_matrix)
from .scenario import (ScenarioError, esn0_to_power, improper_qam, link_bins,
                       load_scenario, random_scenario)
from .simulate import SimConfig, TailEnergyExceeded, run_link
from .spectra import InvalidSpec, NonCommensurateRates, NotProper
from .transmitter import (KKT_TOL, DegenerateProblem, Infeasible,
                          NoConvergence, optimize_link)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INVARIANT = 0, 1, 2, 3

NUMERIC_ERRORS = (NoConvergence, NotPositiveDefinite, DegenerateProblem,
                  Infeasible, NegativeIntegrand, TailEnergyExceeded,
                  np.linalg.LinAlgError, FloatingPointError)
INPUT_ERRORS = (ScenarioError, InvalidSpec, NotProper, NonCommensurateRates,
                OSError, ValueError)


class InvariantFailure(Exception):
    pass


def _fmt(x):
    return format(float(x), '.17g')


def write_csv(path, header, rows):
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path, obj):
    with open(path, 'w') as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write('\n')


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def scenario_hash(raw):
    blob = json.dumps(raw, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(blob.encode()).hexdigest()


# -- helpers ----------------------------------------------------------------

def _load(args):
    sc = load_scenario(args.scenario)
    if args.grid_n is not None:
        sc = sc.with_grid_n(args.grid_n)
    return sc


def _design(sc, args):
    link = link_bins(sc)
    return optimize_link(link, sc.power.P_T, tol_power=args.tol_power,
                         matrix_check=args.matrix_mse)


def _kkt_tol(args):
    return {**KKT_TOL, 'stationarity': args.tol_kkt, 'power': args.tol_power}


def spectra_rows(sc, design):
    """Squared magnitudes of s, w1, w2 and the interference PSD per CTFT
    frequency retained by the grid, in increasing frequency order."""
    link, tx, rx = design.link, design.tx, design.rx
    T = link.T
    rows = []
    for sign in (1, -1):
        side = link.side(sign)
        for i in range(link.N):
            n = side.shifts[i]
            xi = side.f[i] + n / T
            intf = np.zeros(n.size)
            for it in sc.noise.interferers:
                intf += (it.symbol_energy / it.symbol_period
                         * np.abs(it.pulse(xi)) ** 2)
            for j in range(n.size):
                rows.append((xi[j], abs(tx.s.side(sign)[i][j]) ** 2,
                             abs(rx.w1.side(sign)[i][j]) ** 2,
                             abs(rx.w2.side(sign)[i][j]) ** 2, intf[j]))
    rows.sort(key=lambda r: r[0])
    return rows


def solution_dict(design):
    tx = design.tx
    out = {'nu': tx.nu, 'mse': design.mse.total, 'mse_density': tx.mse,
           'power': tx.power, 'power_residual': tx.power_residual,
           'kkt': tx.kkt.as_dict(),
           'grid': {'B': design.link.grid.spec.B, 'T': design.link.T,
                    'N': design.link.N, 'beta': design.link.grid.spec.beta,
                    'L': design.link.grid.spec.L}}
    if design.mse_check is not None:
        out['mse_matrix'] = design.mse_check.total
        out['mse_form_residual'] = (abs(design.mse_check.total
                                      - design.mse.total)
                                  / (1 + design.mse_check.total))
    return out


def _check_kkt(design, args):
    bad = design.tx.kkt.violations(_kkt_tol(args))
    if bad:
        raise InvariantFailure("KKT certificate failed: " + ", ".join(bad))


# -- subcommands --------------------------------------------------------------

def cmd_optimize(args, outputs):
    sc = _load(args)
    design = _design(sc, args)
    sol = solution_dict(design)
    p = os.path.join(args.out_dir, 'solution.json')
    write_json(p, sol)
    outputs.append(p)
    p = os.path.join(args.out_dir, 'spectra.csv')
    write_csv(p, ['xi_hz', 'S_sq', 'W1_sq', 'W2_sq', 'interference_psd'],
              spectra_rows(sc, design))
    outputs.append(p)
    print(json.dumps({'mse': sol['mse'], 'nu': sol['nu']}))
    _check_kkt(design, args)
    return sc


def _parse_values(text):
    try:
        vals = [float(v) for v in text.replace(' ', '').split(',') if v]
    except ValueError:
        raise ScenarioError(f"--values: cannot parse {text!r}") from None
    if not vals:
        raise ScenarioError("--values: empty")
    return vals


def sweep_point(sc, axis, value):
    if axis == 'esn0':
        return sc.with_power(esn0_to_power(value, sc.noise.N0, sc.grid.T))
    if not 0 <= value <= 1:
        raise ScenarioError(f"--values: k = {value} outside [0, 1]")
    if not sc.source.is_white:
        raise ScenarioError("source: a k sweep needs a var_i/var_q or "
                            "power/k source")
    return sc.with_source(improper_qam(sc.source.power, value))


def cmd_sweep(args, outputs):
    sc = _load(args)
    values = _parse_values(args.values)
    header = ['axis_value', 'analytic_mse']
    if args.simulate:
        header += ['empirical_mse', 'std_err', 'empirical_power']
    rows, failures = [], []
    for v in values:
        pt = sweep_point(sc, args.axis, v)
        design = _design(pt, args)
        row = [v, design.mse.total]
        if args.simulate:
            cfg = SimConfig(num_symbols=args.num_symbols, rng_seed=args.seed)
            rep = run_link(pt, design.tx, design.rx, cfg, link=design.link)
            row += [rep.empirical_mse, rep.std_err, rep.empirical_power]
        rows.append(row)
        failures += design.tx.kkt.violations(_kkt_tol(args))
    p = os.path.join(args.out_dir, 'mse_curve.csv')
    write_csv(p, header, rows)
    outputs.append(p)
    for r in rows:
        print(' '.join(_fmt(x) for x in r))
    if failures:
        raise InvariantFailure("KKT certificate failed: "
                               + ", ".join(sorted(set(failures))))
    return sc


def cmd_simulate(args, outputs):
    sc = _load(args)
    design = _design(sc, args)
    cfg = SimConfig(num_symbols=args.num_symbols, rng_seed=args.seed)
    rep = run_link(sc, design.tx, design.rx, cfg, link=design.link)
    p = os.path.join(args.out_dir, 'sim_report.json')
    write_json(p, rep.as_dict())
    outputs.append(p)
    print(rep.to_json())
    return sc


def check_design(design, rng, n_perturb=20):
    """Measured invariant residuals of one optimized design."""
    link, tx = design.link, design.tx
    res = {}
    mat = mse_matrix(link, tx.s)
    res['mse_form_residual'] = abs(mat.total - design.mse.total) / (
        1 + mat.total)
    res.update({k: v for k, v in tx.kkt.as_dict().items()
                if k in ('stationarity', 'dual_feasibility', 'slackness',
                         'power_residual')})
    # c(f) recomputed from s_opt against M lambda a / T
    c_pos, c_neg = gain_c(link, tx.s)
    d = design.data
    ref_p = d.m * d.lam * tx.density.a
    ref_n = d.m_hat * d.lam_hat * tx.density.a_hat
    scale = 1 + max(np.max(ref_p), np.max(ref_n))
    res['gain_residual'] = max(np.max(np.abs(c_pos - ref_p)),
                               np.max(np.abs(c_neg - ref_n))) / scale
    # optimal receiver beats nearby receivers
    base = receiver_mse(link, tx.s, design.rx)
    worst = 0.0
    for _ in range(n_perturb):
        rx = _perturbed(design.rx, rng, 1e-3)
        worst = min(worst, receiver_mse(link, tx.s, rx) - base)
    res['receiver_gap'] = worst
    return res


def _perturbed(rx, rng, rel):
    def jiggle(vs):
        out = []
        for v in vs:
            e = rng.standard_normal(v.shape) + 1j * rng.standard_normal(
                v.shape)
            out.append(v + rel * (np.linalg.norm(v) + 1e-30) * e
                       / max(np.linalg.norm(e), 1e-300))
        return out
    return ReceiverSolution(Waveform(jiggle(rx.w1.pos), jiggle(rx.w1.neg)),
                            Waveform(jiggle(rx.w2.pos), jiggle(rx.w2.neg)))


CHECK_TOL = {'mse_form_residual': 1e-10, 'gain_residual': 1e-10,
             'receiver_gap': -1e-12}


def cmd_check(args, outputs):
    rng = np.random.default_rng(args.seed)
    scenarios = []
    for path in args.scenario:
        sc = load_scenario(path)
        if args.grid_n is not None:
            sc = sc.with_grid_n(args.grid_n)
        scenarios.append((path, sc))
    for j in range(args.random):
        scenarios.append((f'random[{j}]', random_scenario(
            rng, N=args.grid_n or 16)))
    tol = {**_kkt_tol(args), **CHECK_TOL}
    limits = {'mse_form_residual': ('<=', tol['mse_form_residual']),
              'stationarity': ('<=', tol['stationarity']),
              'dual_feasibility': ('>=', -tol['dual']),
              'slackness': ('<=', tol['slackness']),
              'power_residual': ('<=', tol['power']),
              'gain_residual': ('<=', tol['gain_residual']),
              'receiver_gap': ('>=', tol['receiver_gap'])}
    entries = []
    for name, sc in scenarios:
        design = _design(sc, args)
        res = check_design(design, rng)
        for key, val in res.items():
            op, lim = limits[key]
            ok = val <= lim if op == '<=' else val >= lim
            entries.append({'scenario': name, 'invariant': key,
                            'value': float(val), 'limit': f'{op} {lim:g}',
                            'pass': bool(ok)})
    report = {'passed': all(e['pass'] for e in entries),
              'n_scenarios': len(scenarios), 'checks': entries}
    p = os.path.join(args.out_dir, 'check_report.json')
    write_json(p, report)
    outputs.append(p)
    n_bad = sum(not e['pass'] for e in entries)
    print(f"{len(entries) - n_bad}/{len(entries)} checks passed "
          f"over {len(scenarios)} scenarios")
    for e in entries:
        if not e['pass']:
            print(f"FAIL {e['scenario']} {e['invariant']} = "
                  f"{e['value']:.3g} (need {e['limit']})")
    if n_bad:
        raise InvariantFailure(f"{n_bad} invariant checks failed")
    return None


# -- entry point --------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog='wltransceiver',
        description="Joint widely linear transmitter/receiver design.")
    p.add_argument('--version', action='version', version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--grid-n', type=int, default=None,
                        help="bins per half Nyquist interval (overrides "
                             "the scenario)")
    common.add_argument('--tol-power', type=float, default=KKT_TOL['power'])
    common.add_argument('--tol-kkt', type=float,
                        default=KKT_TOL['stationarity'])
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--matrix-mse', action='store_true',
                        help="also evaluate the MSE from the augmented "
                             "block matrices")
    common.add_argument('--out-dir', default='.')
    common.add_argument('-v', '--verbose', action='store_true')
    sub = p.add_subparsers(dest='command', required=True)

    s = sub.add_parser('optimize', parents=[common])
    s.add_argument('scenario')

    s = sub.add_parser('sweep', parents=[common])
    s.add_argument('scenario')
    s.add_argument('--axis', choices=('esn0', 'k'), required=True)
    s.add_argument('--values', required=True,
                   help="comma separated axis values")
    s.add_argument('--simulate', action='store_true')
    s.add_argument('--num-symbols', type=int, default=100_000)

    s = sub.add_parser('simulate', parents=[common])
    s.add_argument('scenario')
    s.add_argument('--num-symbols', type=int, default=100_000)

    s = sub.add_parser('check', parents=[common])
    s.add_argument('scenario', nargs='*')
    s.add_argument('--random', type=int, default=0, metavar='N')
    return p


COMMANDS = {'optimize': cmd_optimize, 'sweep': cmd_sweep,
            'simulate': cmd_simulate, 'check': cmd_check}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose
                        else logging.WARNING)
    t0 = time.time()
    outputs = []
    code = EXIT_OK
    sc = None
    try:
        os.makedirs(args.out_dir, exist_ok=True)
        sc = COMMANDS[args.command](args, outputs)
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        code = EXIT_INVARIANT
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        code = EXIT_NUMERIC
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    manifest = {
        'subcommand': args.command,
        'library_version': __version__,
        'scenario_hash': (scenario_hash(sc.meta['raw'])
                          if sc is not None and 'raw' in sc.meta else None),
        'grid': ({'B': sc.grid.B, 'T': sc.grid.T, 'N': sc.grid.N}
                 if sc is not None else None),
        'tolerances': {'power': args.tol_power, 'kkt': args.tol_kkt},
        'seed': args.seed,
        'outputs': sorted(outputs),
        'wall_clock_s': time.time() - t0,
        'exit_code': code,
    }
    write_json(os.path.join(args.out_dir, 'manifest.json'), manifest)
    return code


if __name__ == '__main__':
    sys.exit(main())
