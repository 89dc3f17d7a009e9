"""Command-line front end: ``analyze``, ``simulate``, ``verify`` and ``report``.

Exit codes for ``analyze``: 0 Holds, 1 Fails, 2 Unknown, 3 runtime error,
4 usage error.  ``verify`` exits 0 when every Holds certificate checks out.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (FRAMEWORKS, Certificate, ControlSpec, Verdict, certify, check_certificate,
                       verdict_table)
from .analysis.certificate import Framework
from .analysis.driver import nominal_values, parse_framework
from .model import ReactionNetwork, load_network, parse_network

log = logging.getLogger("ergocert")

EXIT_ERROR = 3
EXIT_USAGE = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with Unknown
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_control(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("antithetic controller")
    g.add_argument("--actuated", help="actuated species (name or 1-based index)")
    g.add_argument("--controlled", help="controlled species (name or 1-based index)")
    g.add_argument("--mu", type=float, default=1.0, help="reference rate")
    g.add_argument("--theta", type=float, default=1.0, help="measurement rate")
    g.add_argument("--eta", type=float, default=1.0, help="comparison rate")
    g.add_argument("--k", type=float, default=1.0, help="actuation rate")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ergocert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="certify ergodicity, controllability and AIC")
    a.add_argument("network", help="reaction network file")
    a.add_argument("--framework", default="nominal",
                   choices=[f.value.lower() for f in FRAMEWORKS] + ["all"])
    _add_control(a)
    a.add_argument("--assert-irreducible", action="store_true",
                   help="assert that the closed-loop state space is irreducible")
    a.add_argument("--out", help="write the certificate report (JSON) here")

    s = sub.add_parser("simulate", help="seeded SSA ensemble, open or closed loop")
    s.add_argument("network")
    _add_control(s)
    s.add_argument("--n-traj", type=int, default=1000)
    s.add_argument("--t-end", type=float, default=100.0)
    s.add_argument("--grid", type=int, default=101, help="number of equally spaced sample times")
    s.add_argument("--seed", type=int, help="base seed (required)")
    s.add_argument("--x0", help="initial counts, e.g. 'X1=5,X2=0' (default all zero)")
    s.add_argument("--z0", type=int, nargs=2, default=(0, 0), metavar=("Z1", "Z2"),
                   help="initial controller counts")
    s.add_argument("--moment-ode", action="store_true",
                   help="add the first-moment ODE solution (open loop, unimolecular)")
    s.add_argument("--out", default="ergocert_sim", help="output prefix for .csv and .json")

    v = sub.add_parser("verify", help="re-check certificate witnesses without any solver")
    v.add_argument("certificate", help="report or certificate JSON file")
    v.add_argument("network")

    r = sub.add_parser("report", help="render a certificate report as text")
    r.add_argument("report")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _species_index(net: ReactionNetwork, token: str | None, flag: str) -> int | None:
    if token is None:
        return None
    if token.isdigit():
        i = int(token) - 1
        if not 0 <= i < net.d:
            raise UsageError(f"{flag} {token}: index out of range 1..{net.d}")
        return i
    try:
        return net.index(token)
    except KeyError:
        raise UsageError(f"{flag}: unknown species {token!r}") from None


def _control_spec(net: ReactionNetwork, args) -> ControlSpec | None:
    act = _species_index(net, args.actuated, "--actuated")
    ctl = _species_index(net, args.controlled, "--controlled")
    if act is None and ctl is None:
        return None
    spec = ControlSpec(actuated=act if act is not None else 0,
                       controlled=ctl if ctl is not None else 0,
                       mu=args.mu, theta=args.theta, eta=args.eta, k=args.k)
    try:
        spec.validate(net.d)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return spec


def _load(path: str) -> tuple[ReactionNetwork, str]:
    raw = Path(path).read_bytes()
    return parse_network(raw.decode("utf-8")), hashlib.sha256(raw).hexdigest()


def _network_info(path: str, net: ReactionNetwork, digest: str) -> dict:
    return {"path": str(path), "sha256": digest, "species": list(net.species),
            "reactions": net.K}


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose",)}


def _write_json(path: str | Path, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# analyze


def _framework_block(certs: list[Certificate] | Exception) -> dict:
    if isinstance(certs, Exception):
        return {"error": f"{type(certs).__name__}: {certs}"}
    return {"verdict": _verdict(certs).value, "certificates": [c.to_dict() for c in certs]}


def _verdict(certs: list[Certificate]) -> Verdict:
    from .analysis import overall
    return overall(certs)


def _print_certs(certs: list[Certificate], spec: ControlSpec | None) -> None:
    for c in certs:
        print(c.summary())
        if c.counterexample:
            print(f"    counterexample: {json.dumps(c.to_dict()['counterexample'])}")
        for cav in c.caveats:
            print(f"    note: {cav}")
        if spec is not None and c.setpoint_bound is not None and c.holds:
            ok = spec.setpoint > c.setpoint_bound
            print(f"    mu/theta = {spec.setpoint:g} {'exceeds' if ok else 'does not exceed'} "
                  f"the bound {c.setpoint_bound:.6g}")


def cmd_analyze(args) -> int:
    net, digest = _load(args.network)
    spec = _control_spec(net, args)
    names = FRAMEWORKS if args.framework == "all" else (parse_framework(args.framework),)
    results: dict[Framework, list[Certificate] | Exception] = {}
    for f in names:
        try:
            results[f] = certify(net, f, spec, args.assert_irreducible)
        except (ArithmeticError, ValueError) as exc:
            if args.framework != "all":
                raise
            results[f] = exc
    report = {
        "tool": "ergocert",
        "version": __version__,
        "command": "analyze",
        "config": _config(args),
        "network": _network_info(args.network, net, digest),
        "control": spec.to_dict() if spec else None,
        "frameworks": {f.value: _framework_block(r) for f, r in results.items()},
    }
    if args.out:
        _write_json(args.out, report)
    codes = []
    for f, res in results.items():
        if isinstance(res, Exception):
            print(f"{f.value}: not applicable ({res})")
            codes.append(EXIT_ERROR)
            continue
        _print_certs(res, spec)
        codes.append(_verdict(res).exit_code)
    if args.framework == "all":
        print()
        print(verdict_table(results))
    return min(codes)


# ---------------------------------------------------------------------------
# simulate


def _initial_state(net: ReactionNetwork, text: str | None) -> list[int]:
    x0 = [0] * net.d
    if not text:
        return x0
    for item in text.split(","):
        if "=" not in item:
            raise UsageError(f"--x0 item {item!r} is not of the form NAME=COUNT")
        name, val = (p.strip() for p in item.split("=", 1))
        try:
            i = net.index(name)
            x0[i] = int(val)
        except (KeyError, ValueError):
            raise UsageError(f"--x0: bad entry {item!r}") from None
        if x0[i] < 0:
            raise UsageError("--x0: counts must be nonnegative")
    return x0


def cmd_simulate(args) -> int:
    from . import sim

    if args.seed is None:
        raise UsageError("simulate requires --seed")
    if args.n_traj < 2:
        raise UsageError("--n-traj must be at least 2")
    if args.grid < 2 or not args.t_end > 0:
        raise UsageError("--grid must be >= 2 and --t-end positive")
    net, digest = _load(args.network)
    spec = _control_spec(net, args)
    rates, caveats = nominal_values(net)
    x0 = _initial_state(net, args.x0)
    target = net
    if spec is not None:
        if args.moment_ode:
            raise UsageError("--moment-ode applies to open-loop simulations only")
        cl = sim.build_closed_loop(net, spec)
        target = cl.network
        rates.update(dict(zip(cl.rate_names, (spec.mu, spec.theta, spec.eta, spec.k))))
        x0 = x0 + list(args.z0)
    for c in caveats:
        log.warning(c)
    grid = np.linspace(0.0, args.t_end, args.grid)
    stats = sim.ensemble_means(target, x0, args.t_end, args.n_traj, grid, args.seed, rates)
    cols = sim.stats_columns(stats)
    if args.moment_ode:
        t, m = sim.moment_ode(net, x0, args.t_end, rates)
        ode = sim.interpolate_series(t, m, grid)
        for i, s in enumerate(net.species):
            cols[f"{s}_ode"] = ode[:, i]
    out = Path(args.out)
    csv_path = out.with_name(out.name + ".csv")
    json_path = out.with_name(out.name + ".json")
    sim.write_csv(csv_path, grid, cols)
    summary = {
        "tool": "ergocert",
        "version": __version__,
        "command": "simulate",
        "config": _config(args),
        "network": _network_info(args.network, net, digest),
        "rates": rates,
        "caveats": caveats,
        "x0": x0,
        "stats": stats.summary(),
    }
    if spec is not None:
        name = net.species[spec.controlled]
        mean, hw = stats.terminal_mean(name)
        summary["tracking"] = {"species": name, "setpoint": spec.setpoint,
                               "terminal_mean": mean, "half_width": hw,
                               "error": mean - spec.setpoint,
                               "relative_error": (mean - spec.setpoint) / spec.setpoint}
        print(f"{name}: terminal mean {mean:.4f} +/- {hw:.4f}, set point {spec.setpoint:g}")
    else:
        for s in net.species:
            mean, hw = stats.terminal_mean(s)
            print(f"{s}: terminal mean {mean:.4f} +/- {hw:.4f}")
    _write_json(json_path, summary)
    print(f"wrote {csv_path} and {json_path}")
    return 0


# ---------------------------------------------------------------------------
# verify / report


def _certificates(data: dict) -> list[Certificate]:
    if "framework" in data and "verdict" in data:
        return [Certificate.from_dict(data)]
    out = []
    for block in data.get("frameworks", {}).values():
        out += [Certificate.from_dict(c) for c in block.get("certificates", [])]
    return out


def cmd_verify(args) -> int:
    data = json.loads(Path(args.certificate).read_text(encoding="utf-8"))
    net, digest = _load(args.network)
    recorded = data.get("network", {}).get("sha256")
    if recorded is not None and recorded != digest:
        print(f"network hash mismatch: certificate was issued for {recorded[:12]}..., "
              f"file is {digest[:12]}...")
        return 1
    certs = _certificates(data)
    if not certs:
        print("no certificates found")
        return 1
    bad = 0
    checked = 0
    for c in certs:
        res = check_certificate(c, net)
        if c.holds:
            checked += 1
        status = "ok" if res.ok else "FAILED"
        print(f"{c.framework.value:<10} {c.property.value:<22} {c.verdict.value:<8} "
              f"{status}  residual {res.residual:.3e}")
        for msg in res.violations:
            print(f"    {msg}")
        bad += not res.ok
    print(f"{checked} Holds certificate(s) checked, {bad} failure(s)")
    return 1 if bad else 0


def cmd_report(args) -> int:
    data = json.loads(Path(args.report).read_text(encoding="utf-8"))
    net = data.get("network", {})
    print(f"ergocert {data.get('version', '?')} report for {net.get('path')} "
          f"(sha256 {str(net.get('sha256'))[:12]})")
    results: dict[Framework, list[Certificate] | Exception] = {}
    for name, block in data.get("frameworks", {}).items():
        f = Framework(name)
        if "error" in block:
            results[f] = RuntimeError(block["error"])
        else:
            results[f] = [Certificate.from_dict(c) for c in block["certificates"]]
    print(verdict_table(results))
    for f, res in results.items():
        if isinstance(res, Exception):
            continue
        print(f"\n[{f.value}]")
        spec = data.get("control")
        _print_certs(res, ControlSpec(**spec) if spec else None)
    return 0


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "verify": cmd_verify,
            "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ergocert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, ArithmeticError, KeyError, IndexError) as exc:
        print(f"ergocert: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
