"""Command-line front end.

Every subcommand prints (or writes with --out) a JSON bundle with a parameter
echo, named scalars and named tables; --csv writes the main table with the same
echo as '#' comment lines.  Parameters can also come from a config file:

    [schmidt]
    tau = 0.25
    nmu1 = 5

Section names are subcommands, keys are the long option names (dashes or
underscores), and command-line flags override the file.  Unknown keys are
rejected.

Exit codes: 0 success, 1 usage error, 2 numerical failure (or a failed golden
entry).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import subprocess
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class Param:
    name: str  # long option without dashes, e.g. "eta-r"
    type: type = float
    default: object = None
    required: bool = False
    help: str = ""
    choices: tuple | None = None
    flag: bool = False  # store_true switch

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


@dataclass
class ResultBundle:
    subcommand: str
    params: dict
    scalars: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> {"columns": [...], "rows": [[...]]}
    main_table: str | None = None

    def metadata(self, stamp: bool = False) -> dict:
        meta = {"version": _version_string(), "subcommand": self.subcommand, "params": self.params}
        if "seed" in self.params:
            meta["seed"] = self.params["seed"]
        if stamp:
            meta["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        return meta

    def to_json(self, stamp: bool = False) -> str:
        doc = {"metadata": self.metadata(stamp), "scalars": self.scalars, "tables": self.tables}
        return json.dumps(_plain(doc), indent=2, sort_keys=True, allow_nan=True) + "\n"

    def to_csv(self, stamp: bool = False) -> str:
        buf = io.StringIO()
        meta = self.metadata(stamp)
        for k, v in sorted(_plain(meta).items()):
            buf.write(f"# {k} = {json.dumps(v, sort_keys=True)}\n")
        name = self.main_table or (sorted(self.tables)[0] if self.tables else None)
        w = csv.writer(buf, lineterminator="\n")
        if name is None:
            w.writerow(["name", "value"])
            for k, v in sorted(_plain(self.scalars).items()):
                w.writerow([k, json.dumps(v)])
        else:
            tab = _plain(self.tables[name])
            w.writerow(tab["columns"])
            for row in tab["rows"]:
                w.writerow([repr(x) if isinstance(x, float) else x for x in row])
        return buf.getvalue()


_VERSION_CACHE = {}


def _version_string() -> str:
    if "v" not in _VERSION_CACHE:
        v = __version__
        try:
            out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
                                 capture_output=True, text=True, timeout=5)
            if out.returncode == 0 and out.stdout.strip():
                v = f"{v}+{out.stdout.strip()}"
        except (OSError, subprocess.SubprocessError):
            pass
        _VERSION_CACHE["v"] = v
    return _VERSION_CACHE["v"]


def _plain(obj):
    """JSON-ready copy: numpy scalars to Python, complex to {re, im}, non-finite kept."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def atomic_write(path: str | os.PathLike, text: str):
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table(columns, *cols):
    rows = [list(r) for r in zip(*[np.asarray(c).tolist() for c in cols])]
    return {"columns": list(columns), "rows": rows}


def _floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


# ---------------------------------------------------------------- subcommand handlers

def _kubo(p):
    from .sde_core import EnsembleConfig, TimeGrid, kubo_ensemble_mean

    n = int(round(p["t_end"] / p["dt"]))
    grid = TimeGrid(0.0, p["dt"], n)
    mean, se = kubo_ensemble_mean(EnsembleConfig(p["n_realizations"], p["seed"]), grid)
    t = grid.nodes()
    exact = np.exp(-t / 2)
    # node 0 is deterministic (se = 0); judge the remaining nodes
    dev_re = np.abs(mean.real - exact)[1:] / se.real[1:]
    dev_im = np.abs(mean.imag)[1:] / se.imag[1:]
    scalars = {"max_re_dev_over_se": float(dev_re.max()), "max_im_over_se": float(dev_im.max()),
               "max_abs_re_dev": float(np.abs(mean.real - exact).max())}
    return scalars, {"mean": _table(["t", "re_mean", "im_mean", "se_re", "se_im", "exact"],
                                    t, mean.real, mean.imag, se.real, se.imag, exact)}, "mean"


def _fewatom(p):
    from .few_atom import AtomGeometry, evolve_lindblad, independent_p1, steady_state_exact

    geom = AtomGeometry.square(p["side_lambda"])
    args = (geom, p["omega_a"], p["delta1"], p["gamma"])
    if p["method"] == "exact":
        P1s, P1ns, P2s, P2ns, _ = steady_state_exact(*args)
        drift = 0.0
        tables = {}
    else:
        pops = evolve_lindblad(*args, t_end=p["t_end"], dt=p["dt"])
        P1s, P1ns, P2s, P2ns = pops.P1s[-1], pops.P1ns[-1], pops.P2s[-1], pops.P2ns[-1]
        drift = pops.trace_drift
        tables = {"populations": _table(["t", "P1s", "P1ns", "P2s", "P2ns"], pops.t, pops.P1s, pops.P1ns,
                                        pops.P2s, pops.P2ns)}
    p0 = independent_p1(p["omega_a"], p["delta1"], p["gamma"], geom.n_atoms)
    scalars = {"P1s": P1s, "P1ns": P1ns, "P2s": P2s, "P2ns": P2ns, "P1_independent": p0,
               "P1s_over_independent": P1s / p0, "trace_drift": drift}
    return scalars, tables, "populations" if tables else None


def _mu(p):
    from .analytic_cascade import EnsembleShape, mu_bar, mu_bar_riemann

    shape = EnsembleShape.from_cylinder(p["h_lambda"], p["a_lambda"], p["density_cm3"], p["wavelength_m"])
    mu = mu_bar(shape)
    factor = shape.N * mu + 1
    scalars = {"H": shape.H, "A": shape.A, "N": shape.N, "mu_bar": mu, "factor": factor,
               "T1_ns": p["decay_time_ns"] / factor}
    if p["riemann"]:
        r = mu_bar_riemann(shape)
        scalars["mu_bar_riemann"] = r
        scalars["relative_difference"] = abs(mu - r) / abs(r) if r else 0.0
    return scalars, {}, None


def _spectrum(p):
    from .analytic_cascade import CollectiveDecay, PumpPulse, g2, two_photon_spectrum
    from .schmidt import fwhm

    w = np.linspace(-p["w_max"], p["w_max"], p["n_points"])
    dw = w[1] - w[0]
    decay = CollectiveDecay.from_factor(p["nmu1"])
    f = two_photon_spectrum(w, w, PumpPulse(p["tau"]), decay)
    I = np.abs(f) ** 2
    sig, idl = I.sum(axis=1) * dw, I.sum(axis=0) * dw
    j0 = int(np.argmin(np.abs(w)))
    slice0 = I[j0, :]
    # 1/e time of the correlation from a fine sampling of g2
    t = np.linspace(0, 5 / decay.gamma3N, 20001)
    g = g2(t, decay)
    t_1e = float(np.interp(1.0, -np.log(g), t))
    scalars = {"gamma3N": decay.gamma3N, "idler_slice_fwhm": fwhm(w, slice0), "norm": float(I.sum() * dw * dw),
               "g2_1e_time": t_1e, "g2_at_minus_one": float(g2(-1.0, decay))}
    return scalars, {"marginals": _table(["omega", "signal", "idler", "idler_slice_at_ws0"], w, sig, idl,
                                         slice0)}, "marginals"


def _schmidt(p):
    from .schmidt import SpectralGrid, cascade_schmidt, entropy, mode_overlap

    grid = SpectralGrid(-p["w_max"], p["w_max"], p["n_points"])
    modes = cascade_schmidt(p["tau"], p["nmu1"], grid)
    lam = modes.lambdas
    k = min(p["n_modes"], len(lam))
    Phi = np.conj(modes.idler_modes[0])
    overlap = mode_overlap(modes.idler_modes[:k], np.conj(Phi), grid.dw, lam[:k])
    scalars = {"lambda1": lam[0], "sum_lambda": float(lam.sum()), "entropy_bits": entropy(lam, 2),
               "entropy_nats": entropy(lam), "matched_overlap": overlap,
               "matched_overlap_error": abs(overlap - lam[0])}
    n = np.arange(1, k + 1)
    return scalars, {"lambdas": _table(["n", "lambda"], n, lam[:k])}, "lambdas"


def _dlcz(p):
    from .dlcz import DetectorKind, DetectorModel, SwapInput, pme_success, swap_metrics, teleport_success

    lam = (1.0,) if p["pure"] else tuple(_floats(p["lambdas"]) if p["lambdas"] else ())
    if not lam:
        raise UsageError("give --pure or --lambdas")
    kind = DetectorKind(p["detector"])
    other = DetectorKind.PNRD if kind is DetectorKind.NRPD else DetectorKind.NRPD
    inp = SwapInput(lam, p["eta_r"], p["overlap"])
    F, PH, PS = swap_metrics(inp, DetectorModel(kind, p["eta_t"]))
    _, _, PS_other = swap_metrics(inp, DetectorModel(other, p["eta_t"]))
    scalars = {"F": F, "P_H": PH, "P_S": PS, "P_S_other_detector": PS_other,
               "P_S_detector_difference": abs(PS - PS_other),
               "P_PME": pme_success(lam, p["eta_r"], p["eta_t"]),
               "P_QT": teleport_success(p["d0"], lam, p["eta_r"], p["eta_t"], kind),
               "lambda1": inp.lambda1}
    return scalars, {}, None


def _diamond(p):
    from .conversion import DiamondParams

    keys = ("omega_a", "omega_b", "delta1", "delta_b", "delta_wi", "opd")
    return DiamondParams(**{k: p[k] for k in keys})


def _convert(p):
    from .conversion import (absorption_peaks, conservation_deviation, coupling_coefficients, kappa_crossings,
                             ode_solution, parametric_solution)

    params = _diamond(p)
    c = coupling_coefficients(params)
    eta_d, T_d = parametric_solution(c, 1.0, "down")
    eta_u, T_u = parametric_solution(c, 1.0, "up")
    ode_d, _ = ode_solution(c, 1.0, "down")
    scalars = {"eta_down": eta_d, "T_down": T_d, "eta_up": eta_u, "T_up": T_u,
               "eta_up_minus_down": abs(eta_u - eta_d), "closed_vs_ode": abs(eta_d - ode_d) / max(abs(ode_d), 1e-300),
               "beta_s": complex(c.beta_s), "alpha_i": complex(c.alpha_i), "kappa_s": complex(c.kappa_s),
               "kappa_i": complex(c.kappa_i)}
    tables = {}
    if p["scan_points"] > 1:
        dwi = np.linspace(p["scan_min"], p["scan_max"], p["scan_points"])
        cs = coupling_coefficients(params, dwi)
        e, T = parametric_solution(cs, 1.0, "down")
        mask, dev = conservation_deviation(params, dwi, p["window_threshold"])
        peaks = absorption_peaks(params, dwi)
        cross = kappa_crossings(params, dwi)
        left = peaks[:2] if len(peaks) >= 2 else peaks
        inside = [x for x in cross if len(left) == 2 and left[0] < x < left[1]]
        scalars.update({"absorption_peaks": sorted(peaks.tolist()), "kappa_crossings": cross.tolist(),
                        "crossing_in_left_window": bool(inside),
                        "window_points": int(mask.sum()),
                        "window_max_conservation_error": float(dev[mask].max()) if mask.any() else 0.0,
                        "window_fraction_above_1e-2": float(np.mean(dev[mask] > 1e-2)) if mask.any() else 0.0})
        tables["scan"] = _table(["delta_wi", "eta_down", "T_down", "re_alpha_i", "re_beta_s", "im_kappa_s"],
                                dwi, e, T, cs.alpha_i.real, cs.beta_s.real, cs.kappa_s.imag)
    return scalars, tables, "scan" if tables else None


def _convert_opt(p):
    from .conversion import DiamondParams, efficiency, efficiency_vs_opd

    opds = _floats(p["opds"])
    res = efficiency_vs_opd(opds, p["direction"], n_starts=p["n_starts"], seed=p["seed"])
    etas = np.array([r.eta_max for r in res])
    flips = []
    for r in res:
        x = np.array(r.best_params, dtype=float)
        y = x.copy()
        y[2:] *= -1
        base = DiamondParams(opd=r.opd)
        flips.append(abs(efficiency(y, base, p["direction"]) - efficiency(x, base, p["direction"])))
    best = np.array([r.best_params for r in res])
    scalars = {"eta_max": etas.tolist(), "non_decreasing": bool(np.all(np.diff(etas) >= -1e-12)),
               "eta_max_last": float(etas[-1]), "max_sign_flip_difference": float(max(flips))}
    for o, e in zip(opds, etas):
        scalars[f"eta_max_opd_{o:g}"] = float(e)
    tab = _table(["opd", "eta_max", "omega_a", "omega_b", "delta1", "delta_b", "delta_wi"], opds, etas,
                 *best.T)
    return scalars, {"optimum": tab}, "optimum"


def _convert_pulse(p):
    from .conversion import (PulseGrid, PulseShape, generalized_rabi, modulation_frequency, pulse_conversion,
                             reference_pulses)

    params = _diamond(p)
    pump_a, probe, t_end = reference_pulses(p["duration_ns"])
    pump_b = PulseShape("cw")
    grid = PulseGrid(p["dt"], p["dz"], t_end)
    res = pulse_conversion(params, pump_a, pump_b, probe, grid, probe_rabi=p["probe_rabi"])
    f_mod = modulation_frequency(res)
    rabi = generalized_rabi(params)
    scalars = {"eta_down": res.eta_d, "modulation_frequency": f_mod, "generalized_rabi": rabi,
               "modulation_over_rabi": f_mod / rabi, "n_z": res.n_z, "T_c_ns": res.T_c_ns}
    if p["refine"]:
        fine = pulse_conversion(params, pump_a, pump_b, probe, PulseGrid(p["dt"] / 2, p["dz"] / 2, t_end),
                                probe_rabi=p["probe_rabi"])
        scalars["eta_down_refined"] = fine.eta_d
        scalars["refinement_change"] = abs(fine.eta_d - res.eta_d) / res.eta_d
    tab = _table(["t_ns", "signal_out_sq", "idler_in_sq", "idler_out_sq"], res.t_ns,
                 np.abs(res.signal_out) ** 2, np.abs(res.idler_in) ** 2, np.abs(res.idler_out) ** 2)
    return scalars, {"fields": tab}, "fields"


def _cascade(p):
    from .cascade_sim import (CascadeGrid, CascadeScheme, SimulationOptions, correlation_section,
                              fit_superradiant_time, reference_time_ns, simulate_ensemble)
    from .sde_core import EnsembleConfig

    scheme = CascadeScheme(density_cm3=p["density_cm3"])
    if p["n_t"] and p["n_z"] and p["dt"]:
        grid = CascadeGrid(p["n_t"], p["n_z"], p["dt"])
    else:
        grid = CascadeGrid.for_density(p["density_cm3"])
    opts = SimulationOptions(batch_size=p["batch_size"])
    res = simulate_ensemble(scheme, grid, EnsembleConfig(p["n_realizations"], p["seed"]), opts,
                            checkpoint=p["checkpoint"] or None, resume=bool(p["checkpoint"]))
    t_m, tau, sec, se = correlation_section(res)
    fit = fit_superradiant_time(tau, sec.real)
    scalars = {"T_f_ns": fit.T_f, "T_f_ci_low": fit.ci[0], "T_f_ci_high": fit.ci[1], "t_m_ns": t_m,
               "fit_points": fit.n_points, "n_accepted": res.n_accepted, "n_rejected": res.n_rejected,
               "T_c_ns": res.units.T_c * 1e9, "L_c_m": res.units.L_c, "opd": res.units.opd}
    if p["reference_time"]:
        scalars["T1_ns"] = reference_time_ns(scheme)
    tables = {"section": _table(["tau_ns", "re_G", "im_G", "se_re", "se_im"], tau, sec.real, sec.imag, se.real,
                                se.imag),
              "intensities": _table(["t_ns", "I_s", "I_s_se", "I_i", "I_i_se"], res.t_ns, res.I_s.real,
                                    res.I_s_se.real, res.I_i.real, res.I_i_se.real)}
    return scalars, tables, "section"


def _einstein(p):
    from .cascade_sim import CascadeCoefficients, CascadeScheme, einstein_check, random_states

    scheme = CascadeScheme()
    rng = np.random.default_rng(p["seed"])
    oa = complex(*rng.normal(size=2))
    ob = complex(*rng.normal(size=2))
    c = CascadeCoefficients(scheme, scheme.units(), oa, ob)
    entries = None
    if p["entries"]:
        vals = [int(v) for v in _floats(p["entries"])]
        if len(vals) % 2:
            raise UsageError("--entries needs pairs i,j")
        entries = list(zip(vals[::2], vals[1::2]))
    rep = einstein_check(random_states(p["n_states"], rng, True), c, entries)
    rows = sorted(rep.per_entry.items())
    scalars = {"max_discrepancy": rep.max_discrepancy, "worst_entry": list(rep.worst_entry),
               "entries_checked": len(rows), "ok": rep.ok}
    tab = _table(["i", "j", "discrepancy"], [k[0] for k, _ in rows], [k[1] for k, _ in rows],
                 [v for _, v in rows])
    return scalars, {"entries": tab}, "entries"


# ---------------------------------------------------------------- schemas

_DIAMOND = [Param("omega-a", default=33.0), Param("omega-b", default=20.0), Param("delta1", default=39.0),
            Param("delta-b", default=2.0), Param("delta-wi", default=-21.0), Param("opd", default=150.0)]

COMMANDS = {
    "kubo": (_kubo, "Kubo oscillator ensemble; CSV: t, re_mean, im_mean, se_re, se_im, exact",
             [Param("n-realizations", int, 1024), Param("dt", default=0.01), Param("t-end", default=5.0),
              Param("seed", int, 0)]),
    "fewatom": (_fewatom, "Four atoms on a square; CSV (evolve): t, P1s, P1ns, P2s, P2ns",
                [Param("side-lambda", default=3.0, help="square side in wavelengths"),
                 Param("omega-a", default=0.2), Param("delta1", default=5.0), Param("gamma", default=1.0),
                 Param("method", str, "exact", choices=("exact", "evolve")),
                 Param("t-end", default=16.3), Param("dt", default=None)]),
    "mu": (_mu, "Geometric factor of a cylinder (JSON scalars only)",
           [Param("h-lambda", required=True, help="height in wavelengths"),
            Param("a-lambda", required=True, help="radius in wavelengths"),
            Param("density-cm3", default=8e10), Param("wavelength-m", default=795e-9),
            Param("decay-time-ns", default=26.0), Param("riemann", flag=True)]),
    "spectrum": (_spectrum, "Two-photon spectrum marginals; CSV: omega, signal, idler, idler_slice_at_ws0",
                 [Param("tau", required=True), Param("nmu1", required=True, help="N mu_bar + 1"),
                  Param("w-max", default=1200.0), Param("n-points", int, 801)]),
    "schmidt": (_schmidt, "Schmidt decomposition; CSV: n, lambda",
                [Param("tau", required=True), Param("nmu1", required=True, help="N mu_bar + 1"),
                 Param("w-max", default=1200.0), Param("n-points", int, 2000), Param("n-modes", int, 20)]),
    "dlcz": (_dlcz, "Swap fidelity and success probabilities (JSON scalars only)",
             [Param("pure", flag=True), Param("lambdas", str, None, help="comma-separated Schmidt numbers"),
              Param("eta-r", required=True), Param("eta-t", required=True),
              Param("detector", str, "nrpd", choices=("nrpd", "pnrd")), Param("overlap", default=None),
              Param("d0", default=math.sqrt(0.5))]),
    "convert": (_convert, "Closed-form conversion; CSV (with --scan-points): delta_wi, eta_down, T_down, "
                          "re_alpha_i, re_beta_s, im_kappa_s",
                _DIAMOND + [Param("scan-min", default=-2000.0), Param("scan-max", default=2000.0),
                            Param("scan-points", int, 0), Param("window-threshold", default=1e-2)]),
    "convert-opt": (_convert_opt, "Multi-start efficiency optimization; CSV: opd, eta_max, omega_a, omega_b, "
                                  "delta1, delta_b, delta_wi",
                    [Param("opds", str, "1,10,50,150,300,600"), Param("n-starts", int, 32), Param("seed", int, 0),
                     Param("direction", str, "down", choices=("down", "up"))]),
    "convert-pulse": (_convert_pulse, "Pulsed Maxwell-Bloch conversion; CSV: t_ns, signal_out_sq, idler_in_sq, "
                                      "idler_out_sq",
                      [Param("duration-ns", default=100.0), Param("dt", default=0.5), Param("dz", default=0.001),
                       Param("probe-rabi", default=0.1), Param("refine", flag=True)] + _DIAMOND),
    "cascade": (_cascade, "Stochastic cascade ensemble; CSV: tau_ns, re_G, im_G, se_re, se_im",
                [Param("density-cm3", default=5e8), Param("n-realizations", int, 10000), Param("seed", int, 0),
                 Param("n-t", int, 0), Param("n-z", int, 0), Param("dt", default=0.0),
                 Param("batch-size", int, 500), Param("checkpoint", str, ""),
                 Param("reference-time", flag=True)]),
    "einstein-check": (_einstein, "Diffusion matrix against normal-ordering identities; CSV: i, j, discrepancy",
                       [Param("n-states", int, 20), Param("seed", int, 0),
                        Param("entries", str, None, help="comma-separated pairs i,j,i,j,...")]),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _build_parser():
    ap = _Parser(prog="fourlevel", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", metavar="command")
    parsers = {}
    for name, (_, helptext, schema) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext, description=helptext)
        for prm in schema:
            if prm.flag:
                sp.add_argument(f"--{prm.name}", action="store_true", default=None, help=prm.help)
            else:
                sp.add_argument(f"--{prm.name}", type=prm.type, default=None, choices=prm.choices,
                                help=(prm.help + " " if prm.help else "")
                                + ("(required)" if prm.required else f"(default {prm.default})"))
        _common(sp)
        parsers[name] = sp
    gp = sub.add_parser("golden", help="run a golden-value suite", description="Run a golden-value suite")
    gp.add_argument("--suite", default=None, help="suite JSON (default: the shipped suite)")
    gp.add_argument("--all", action="store_true", help="include entries marked slow")
    gp.add_argument("--only", default=None, help="comma-separated entry names")
    _common(gp)
    parsers["golden"] = gp
    return ap, parsers


def _common(sp):
    sp.add_argument("--config", default=None, help="config file with [section] key = value lines")
    sp.add_argument("--out", default=None, help="JSON output path (default: stdout)")
    sp.add_argument("--csv", default=None, help="CSV output path for the main table")
    sp.add_argument("--stamp", action="store_true", help="add a timestamp to the metadata")


def _config_values(path, command, schema) -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as f:
            cp.read_file(f)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not cp.has_section(command):
        return {}
    known = {prm.dest: prm for prm in schema}
    out = {}
    for key, raw in cp.items(command):
        dest = key.replace("-", "_")
        if dest not in known:
            raise UsageError(f"unknown key {key!r} in section [{command}] of {path}")
        prm = known[dest]
        try:
            if prm.flag:
                out[dest] = cp.getboolean(command, key)
            else:
                out[dest] = prm.type(raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {key} in {path}: {raw!r}") from exc
        if prm.choices and out[dest] not in prm.choices:
            raise UsageError(f"{key} must be one of {prm.choices}")
    return out


def resolve_params(command: str, cli: dict, config: dict | None = None) -> dict:
    """Merge defaults, config values and command-line values; check required keys."""
    schema = COMMANDS[command][2]
    config = config or {}
    known = {prm.dest for prm in schema}
    unknown = (set(cli) | set(config)) - known
    if unknown:
        raise UsageError(f"unknown parameter(s) for {command}: {', '.join(sorted(unknown))}")
    out = {}
    for prm in schema:
        v = cli.get(prm.dest)
        if v is None:
            v = config.get(prm.dest)
        if v is None:
            if prm.required:
                raise UsageError(f"{command}: missing required --{prm.name}")
            v = False if prm.flag else prm.default
        out[prm.dest] = v
    return out


def execute(command: str, params: dict) -> ResultBundle:
    """Run one subcommand on resolved parameters and return its bundle."""
    handler = COMMANDS[command][0]
    scalars, tables, main = handler(params)
    return ResultBundle(command, dict(params), _plain(scalars), _plain(tables), main)


# ---------------------------------------------------------------- golden suite

def default_suite_path() -> Path:
    return Path(__file__).with_name("data") / "golden.json"


def _lookup(scalars: dict, key: str):
    v = scalars
    for part in key.split("."):
        if isinstance(v, list):
            v = v[int(part)]
        else:
            v = v[part]
    return v


def check_entry(entry: dict, value) -> tuple[bool, str]:
    """Compare a value with an entry's expectation; returns (passed, description)."""
    if "range" in entry:
        lo, hi = entry["range"]
        lo = -math.inf if lo is None else lo
        hi = math.inf if hi is None else hi
        vals = np.atleast_1d(np.asarray(value, dtype=float))
        ok = bool(np.all((vals >= lo) & (vals <= hi)))
        return ok, f"{value} in [{lo}, {hi}]"
    expected = entry["expected"]
    if isinstance(expected, bool) or isinstance(value, bool):
        return bool(value) == bool(expected), f"{value} == {expected}"
    e = np.asarray(expected, dtype=float)
    v = np.asarray(value, dtype=float)
    if e.shape != v.shape:
        return False, f"shape {v.shape} != expected {e.shape}"
    tol = entry.get("tol", 0.0) + entry.get("rel_tol", 0.0) * np.abs(e)
    ok = bool(np.all(np.abs(v - e) <= tol))
    return ok, f"{value} vs {expected} (diff {np.max(np.abs(v - e)):.3g}, tol {np.max(tol):.3g})"


def _validate_suite(doc) -> list:
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise UsageError("suite must be an object with an 'entries' list")
    for i, e in enumerate(doc["entries"]):
        need = {"name", "subcommand", "params", "key", "provenance"}
        if not isinstance(e, dict) or need - set(e):
            raise UsageError(f"suite entry {i} needs keys {sorted(need)}")
        if e["subcommand"] not in COMMANDS:
            raise UsageError(f"suite entry {e['name']}: unknown subcommand {e['subcommand']!r}")
        if "range" not in e and "expected" not in e:
            raise UsageError(f"suite entry {e['name']}: needs 'expected' or 'range'")
    return doc["entries"]


def run_golden(suite_path=None, include_slow: bool = False, only=None) -> tuple[dict, int]:
    """Run a suite; returns (report, exit code)."""
    path = Path(suite_path) if suite_path else default_suite_path()
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read suite {path}: {exc}") from exc
    entries = _validate_suite(doc)
    if only:
        names = set(only)
        entries = [e for e in entries if e["name"] in names]
    cache = {}
    results = []
    for e in entries:
        rec = {"name": e["name"], "subcommand": e["subcommand"], "key": e["key"], "provenance": e["provenance"]}
        if e.get("slow") and not include_slow:
            results.append({**rec, "status": "skipped"})
            continue
        t0 = time.perf_counter()
        try:
            params = resolve_params(e["subcommand"], {k.replace("-", "_"): v for k, v in e["params"].items()})
            ck = json.dumps([e["subcommand"], params], sort_keys=True)
            if ck not in cache:
                cache[ck] = execute(e["subcommand"], params).scalars
            value = _lookup(cache[ck], e["key"])
            ok, detail = check_entry(e, value)
        except UsageError:
            raise
        except Exception as exc:  # a numerical failure counts as a failed entry
            value, ok, detail = None, False, f"{type(exc).__name__}: {exc}"
        known = e.get("known_deviation")
        if known:
            status = "xpass" if ok else "xfail"
        else:
            status = "pass" if ok else "fail"
        results.append({**rec, "status": status, "value": value, "detail": detail,
                        "known_deviation": known, "seconds": round(time.perf_counter() - t0, 3)})
    counts = {s: sum(r["status"] == s for r in results) for s in ("pass", "fail", "xfail", "xpass", "skipped")}
    report = {"suite": str(path), "n_entries": len(results), "counts": counts, "results": results}
    return report, (EXIT_NUMERIC if counts["fail"] else EXIT_OK)


# ---------------------------------------------------------------- entry point

def _numeric_errors():
    from .analytic_cascade import AccuracyError
    from .cascade_sim import FitDomainError, InstabilityError, ShootingError, TranscriptionError
    from .conversion import GridError, SingularityError
    from .few_atom import IntegrationError
    from .sde_core import StepFailure

    return (AccuracyError, FitDomainError, InstabilityError, ShootingError, TranscriptionError, GridError,
            SingularityError, IntegrationError, StepFailure, ArithmeticError, np.linalg.LinAlgError)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap, parsers = _build_parser()
    try:
        ns = ap.parse_args(argv)
        if ns.command is None:
            raise UsageError(ap.format_usage() + "fourlevel: error: a command is required")
        if ns.command == "golden":
            only = [s.strip() for s in ns.only.split(",")] if ns.only else None
            report, code = run_golden(ns.suite, ns.all, only)
            text = json.dumps(_plain(report), indent=2, sort_keys=True) + "\n"
            if ns.out:
                atomic_write(ns.out, text)
            else:
                sys.stdout.write(text)
            for r in report["results"]:
                if r["status"] == "fail":
                    print(f"FAIL {r['name']}: {r['detail']}", file=sys.stderr)
            return code
        schema = COMMANDS[ns.command][2]
        cli_vals = {prm.dest: getattr(ns, prm.dest) for prm in schema}
        cli_vals = {k: v for k, v in cli_vals.items() if v is not None}
        cfg = _config_values(ns.config, ns.command, schema) if ns.config else {}
        try:
            params = resolve_params(ns.command, cli_vals, cfg)
        except UsageError as exc:
            raise UsageError(f"{parsers[ns.command].format_usage()}{exc}") from exc
        bundle = execute(ns.command, params)
        text = bundle.to_json(ns.stamp)
        if ns.out:
            atomic_write(ns.out, text)
        else:
            sys.stdout.write(text)
        if ns.csv:
            atomic_write(ns.csv, bundle.to_csv(ns.stamp))
        return EXIT_OK
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except _numeric_errors() as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
