"""JSON design reports. Floats are written with ``repr`` precision, so a
report reloads to bit-identical parameters."""

from __future__ import annotations

import json
import math

import numpy as np

from .baseline import BaselineDesign
from .errors import ValidationError
from .trigger_design import Alphas, EpsilonRow, TriggerParameters

FORMAT_VERSION = 1


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _row_to_dict(row: EpsilonRow) -> dict:
    a = row.alphas
    return {
        "epsilon": row.epsilon,
        "kappa": _num(row.kappa),
        "alpha_S": None if a is None else a.S,
        "alpha_Su": None if a is None else a.S_u,
        "alpha_GammaU": None if a is None else a.Gamma_U,
        "sigma": _num(row.sigma),
        "rho_lower": _num(row.rho_lower),
        "note": row.note,
    }


def _row_from_dict(d: dict) -> EpsilonRow:
    alphas = None
    if d.get("alpha_S") is not None:
        alphas = Alphas(d["alpha_S"], d["alpha_Su"], d["alpha_GammaU"])
    return EpsilonRow(d["epsilon"], d.get("kappa"), alphas, d.get("sigma"), d.get("rho_lower"),
                      d.get("note", ""))


def baseline_to_dict(design: BaselineDesign) -> dict:
    lo, hi = design.c_interval
    return {
        "theta": design.theta,
        "c": design.c,
        "c_interval": [lo, _num(hi)],
        "F": design.F.tolist(),
        "P": design.P.tolist(),
        "lambdas": [md.lam for md in design.modal],
    }


def trigger_to_dict(tp: TriggerParameters) -> dict:
    return {
        "omegas": [np.asarray(o).tolist() for o in tp.omegas],
        "sigma": tp.sigma,
        "epsilon": tp.epsilon,
        "eta": tp.eta,
        "delta": tp.delta,
        "alpha_S": tp.alpha_S,
        "alpha_Su": tp.alpha_Su,
        "alpha_GammaU": tp.alpha_GammaU,
        "beta": tp.beta,
        "gamma": tp.gamma,
        "rho_lower": tp.rho_lower,
        "rho_target": tp.rho_target,
        "kappa": _num(tp.kappa),
    }


def trigger_from_dict(d: dict, table=()) -> TriggerParameters:
    try:
        return TriggerParameters(
            omegas=tuple(np.array(o, dtype=float) for o in d["omegas"]),
            sigma=d["sigma"], epsilon=d["epsilon"], eta=d["eta"], delta=d["delta"],
            alpha_S=d["alpha_S"], alpha_Su=d["alpha_Su"], alpha_GammaU=d["alpha_GammaU"],
            beta=d["beta"], gamma=d["gamma"], rho_lower=d["rho_lower"],
            rho_target=d["rho_target"],
            kappa=math.nan if d.get("kappa") is None else d["kappa"],
            table=tuple(table),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed trigger parameters: {exc}") from exc


def design_report(design: BaselineDesign, tp: TriggerParameters | None, error: str | None = None) -> dict:
    cert = tp.certificate() if tp is not None else {}
    report = {
        "format_version": FORMAT_VERSION,
        "baseline": baseline_to_dict(design),
        "trigger": trigger_to_dict(tp) if tp is not None else None,
        "epsilon_table": [_row_to_dict(r) for r in tp.table] if tp is not None else [],
        "certificate": {**{k: bool(v) for k, v in cert.items()}, "certified": bool(tp is not None and all(cert.values()))},
    }
    if error:
        report["error"] = error
    return report


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, default=_plain) + "\n"


def load_design(path) -> tuple[dict, TriggerParameters | None]:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read design file {path}: {exc}") from exc
    if data.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported design format {data.get('format_version')!r}")
    tp = None
    if data.get("trigger") is not None:
        table = [_row_from_dict(r) for r in data.get("epsilon_table", [])]
        tp = trigger_from_dict(data["trigger"], table)
    return data, tp
