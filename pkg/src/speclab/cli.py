"""Command-line entry point: ``speclab <command> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import ensembles as ens
from . import harness, nets, smallball, spectral, structure
from .params import derive_params, validate_regime


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _overrides(pairs):
    out = {}
    for item in pairs or []:
        key, _, value = item.partition("=")
        out[key] = float(value) if key not in ("M", "ell0") else int(value)
    return out


def cmd_params(a):
    prm = derive_params(a.n, a.p, _overrides(a.set))
    _emit({"params": prm.to_dict(), "warnings": validate_regime(prm)})


def cmd_sample(a):
    spec = ens.EnsembleSpec(a.n, a.p, ens.EntryDist.parse(a.dist),
                            "adjacency" if a.kind == "adjacency" else "centered-sparse")
    ens.write_matrix(a.out, ens.sample(spec, a.seed), a.format)


def cmd_spectrum(a):
    M = ens.read_matrix(getattr(a, "in"))
    s = spectral.eigen_sym(M, want_vectors=a.vectors)
    rep = spectral.gap_report(s, a.tol_abs, a.tol_scale)
    out = rep.to_dict()
    if a.vectors:
        out["backward_error"] = s.backward_error
        out["eigenvectors"] = s.eigenvectors.T.tolist()
    if a.json:
        _emit(out)
    else:
        print(f"n={M.shape[0]} simple={rep.simple} delta_min={rep.delta_min:.6g} "
              f"clusters>1={[c for c in rep.clusters if c[1] > c[0]]}")


def cmd_lcd(a):
    x = ens.read_vector(getattr(a, "in"))
    _emit(structure.lcd(x, a.delta0, a.p, a.theta_max, a.grid).to_dict())


def cmd_levy(a):
    z = smallball.sample_sparse_entries(ens.EntryDist.parse(a.dist), a.p, a.n_samples, a.seed)
    _emit(smallball.levy_scalar(z, a.eps).to_dict())


def cmd_nets(a):
    if a.nets_cmd == "exponent":
        prm = derive_params(a.n, a.p)
        D = a.d if a.d is not None else (prm.D_mid if a.regime == "mid" else prm.D_low)
        _emit(nets.union_bound_exponent(prm, D, a.regime).to_dict())
        return
    if a.m is None or a.d0 is None:
        raise SystemExit("nets: --m and --d0 are required for enumeration")
    _emit(nets.integer_net(a.m, a.d0, a.c_bar).to_dict())


def cmd_campaign(a):
    if a.campaign_cmd == "run":
        cfg = harness.CampaignConfig.from_file(a.config)
        if a.out:
            cfg = dataclasses.replace(cfg, output=a.out)
        print(harness.run_campaign(cfg, a.workers))
    else:
        rows = harness.report(harness.expand_inputs(getattr(a, "in")), a.out)
        sys.stdout.write(harness.render_markdown(rows))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="speclab", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("params", help="derived parameters for (n, p)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a knob")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("sample", help="sample a random matrix")
    p.add_argument("--kind", choices=("sparse", "adjacency"), default="sparse")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--dist", default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("mm", "bin"), default="mm")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("spectrum", help="eigenvalues and gap report of a matrix file")
    p.add_argument("--in", required=True)
    p.add_argument("--vectors", action="store_true")
    p.add_argument("--tol-scale", type=float, default=spectral.DEFAULT_TOL_SCALE)
    p.add_argument("--tol-abs", type=float, default=spectral.DEFAULT_TOL_ABS)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("lcd", help="least common denominator of a vector file")
    p.add_argument("--in", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--delta0", type=float, required=True)
    p.add_argument("--theta-max", type=float, required=True)
    p.add_argument("--grid", type=float, default=1e-3)
    p.set_defaults(func=cmd_lcd)

    p = sub.add_parser("levy", help="Lévy concentration of δξ")
    p.add_argument("--dist", default="gaussian")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--n-samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_levy)

    p = sub.add_parser("nets", help="integer direction nets and union-bound exponents")
    p.add_argument("--m", type=int)
    p.add_argument("--d0", type=float)
    p.add_argument("--c-bar", type=float, default=32.0)
    nsub = p.add_subparsers(dest="nets_cmd")
    e = nsub.add_parser("exponent", help="union-bound exponent per n")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--p", type=float, required=True)
    e.add_argument("--regime", choices=("mid", "small"), default="mid")
    e.add_argument("--d", type=float, help="LCD scale (default: lower end of the window)")
    p.set_defaults(func=cmd_nets)

    p = sub.add_parser("campaign", help="Monte Carlo campaigns")
    csub = p.add_subparsers(dest="campaign_cmd", required=True)
    r = csub.add_parser("run")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="override the output path from the config")
    r.add_argument("--workers", type=int)
    r = csub.add_parser("report")
    r.add_argument("--in", nargs="+", required=True, help="result files or globs")
    r.add_argument("--out", help="directory for summary.csv and summary.md")
    p.set_defaults(func=cmd_campaign)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, IndexError, OSError) as exc:
        print(f"speclab: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
