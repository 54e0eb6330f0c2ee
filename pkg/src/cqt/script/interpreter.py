from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .. import qops
from ..errors import CQTError, TruncationError
from ..hilbert import (
    AtomSite,
    CompositeState,
    FockCutoff,
    coherent_state,
    compose,
    reduced_density,
    replace_cavity,
    summary,
)
from ..protocols import ClassicalMessage, Injection, bob_correction
from . import ast
from .lexer import ScriptError


class ScriptRuntimeError(ScriptError):
    def __init__(self, line: int, col: int, message: str, cause: Exception | None = None):
        super().__init__(line, col, message)
        self.cause = cause


_BELL_VECTORS = {
    "phi_plus": (1, 0, 0, 1),
    "phi_minus": (1, 0, 0, -1),
    "psi_plus": (0, 1, 1, 0),
    "psi_minus": (0, 1, -1, 0),
}


@dataclass
class RunReport:
    ok: bool = True
    measured: dict[str, str] = field(default_factory=dict)
    probabilities: list[dict] = field(default_factory=list)
    postselect_probability: float = 1.0
    fidelities: list[dict] = field(default_factory=list)
    reported: dict[str, Any] = field(default_factory=dict)
    final_state: dict = field(default_factory=dict)
    state: CompositeState | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "measured": dict(self.measured),
            "probabilities": list(self.probabilities),
            "postselect_probability": self.postselect_probability,
            "fidelities": list(self.fidelities),
            "reported": dict(self.reported),
            "final_state": self.final_state,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


class _Run:
    def __init__(self, script: ast.ProtocolScript, params: Mapping[str, float], seed: int, n_max: int, tail_tol: float):
        self.script = script
        self.params = dict(params)
        self.rng = np.random.default_rng(seed)
        self.cutoff = FockCutoff(n_max)
        self.tail_tol = tail_tol
        self.report = RunReport()
        self.state: CompositeState | None = None
        self.loc = (0, 0)

    def value(self, expr: ast.Expr) -> float:
        try:
            return ast.evaluate(expr, self.params)
        except ast.UnboundParameter as exc:
            raise ScriptRuntimeError(*self.loc, f"unbound parameter ${{{exc.args[0]}}}") from None
        except (ZeroDivisionError, ValueError) as exc:
            raise ScriptRuntimeError(*self.loc, f"cannot evaluate expression: {exc}") from None

    def coherent(self, alpha: float) -> np.ndarray:
        vec, tail = coherent_state(alpha, self.cutoff)
        if tail >= self.tail_tol:
            raise TruncationError(f"coherent({alpha}) does not fit in n_max={self.cutoff.n_max}", tail)
        return vec

    def build_initial(self):
        sites, amps, cav = [], [], None
        for i, stmt in enumerate(self.script.statements):
            self.loc = self.script.location(i)
            if isinstance(stmt, ast.AtomDecl):
                site = AtomSite(stmt.label, stmt.levels)
                sites.append(site)
                amps.append(np.eye(2)[site.index(stmt.init)])
            elif isinstance(stmt, ast.CavityDecl):
                cav = self.coherent(self.value(stmt.alpha))
        self.state = compose(amps, cav, sites=sites, cutoff=self.cutoff)

    def run(self) -> RunReport:
        for i, stmt in enumerate(self.script.statements):
            self.loc = self.script.location(i)
            if i == 0:
                self._guard(self.build_initial)
            self._guard(lambda: self.execute(stmt))
        self.report.final_state = summary(self.state)
        self.report.state = self.state
        return self.report

    def _guard(self, fn):
        try:
            fn()
        except ScriptError:
            raise
        except CQTError as exc:
            raise ScriptRuntimeError(*self.loc, str(exc), exc) from exc

    def execute(self, stmt: ast.Statement):
        s, r = self.state, self.report
        line = self.loc[0]
        if isinstance(stmt, ast.DECLARATIONS):
            return
        if isinstance(stmt, ast.Rotate):
            if isinstance(stmt.gate, str):
                gate = qops.PRESETS[stmt.gate]
            else:
                gate = qops.Gate2(np.array([[self.value(x) for x in row] for row in stmt.gate]))
            self.state = qops.apply_gate(s, stmt.label, gate)
        elif isinstance(stmt, ast.Dispersive):
            self.state = qops.dispersive_gate(s, stmt.label, self.value(stmt.phi))
        elif isinstance(stmt, ast.Inject):
            self.state = qops.displace(s, self.value(stmt.beta), self.tail_tol)
        elif isinstance(stmt, ast.Jc):
            self.state = qops.jc_evolve(s, stmt.label, self.value(stmt.gt))
        elif isinstance(stmt, ast.ResetCavity):
            self.state = replace_cavity(s, self.coherent(self.value(stmt.alpha)))
        elif isinstance(stmt, ast.Postselect):
            p, self.state = qops.postselect(s, stmt.label, stmt.level)
            r.postselect_probability *= p
            r.probabilities.append(
                {"line": line, "op": "postselect", "atom": stmt.label, "level": stmt.level, "p": p}
            )
        elif isinstance(stmt, ast.Measure):
            m = qops.measure_atom(s, stmt.label, self.rng)
            self.state = m.post_state
            r.measured[stmt.var] = m.level
            r.probabilities.append(
                {"line": line, "op": "measure", "atom": stmt.label, "level": m.level, "p": m.probability}
            )
        elif isinstance(stmt, ast.Correct):
            injected = self.value(stmt.injected)
            if injected == 0:
                raise ScriptRuntimeError(*self.loc, "correction needs a nonzero injected amplitude")
            message = ClassicalMessage(
                Injection.PLUS if injected > 0 else Injection.MINUS,
                r.measured[stmt.var1],
                r.measured[stmt.var2],
            )
            gate = bob_correction(message)
            self.state = qops.apply_gate(s, stmt.label, gate)
            r.measured[f"{stmt.label}.correction"] = gate.name
        elif isinstance(stmt, ast.ExpectFidelity):
            value, desc = self.target_fidelity(stmt.target)
            threshold = self.value(stmt.threshold)
            passed = value >= threshold
            r.fidelities.append(
                {"line": line, "target": desc, "value": value, "threshold": threshold, "passed": passed}
            )
            r.ok = r.ok and passed
        elif isinstance(stmt, ast.Report):
            for name in stmt.names:
                if name == "probability":
                    r.reported[name] = r.postselect_probability
                elif name == "fidelity":
                    r.reported[name] = r.fidelities[-1]["value"] if r.fidelities else None
                elif name == "state":
                    r.reported[name] = summary(s)
                else:
                    r.reported[name] = r.measured[name]

    def target_fidelity(self, target) -> tuple[float, str]:
        if isinstance(target, ast.BellTarget):
            t = np.array(_BELL_VECTORS[target.kind], dtype=complex) / math.sqrt(2)
            rho = reduced_density(self.state, list(target.atoms))
            desc = f"bell({target.atoms[0]}, {target.atoms[1]}, {target.kind})"
        else:
            t = np.array([self.value(target.zeta), self.value(target.xi)], dtype=complex)
            nrm = np.linalg.norm(t)
            if nrm == 0:
                raise ScriptRuntimeError(*self.loc, "qubit target has zero norm")
            t = t / nrm
            rho = reduced_density(self.state, [target.atom])
            desc = f"qubit({target.atom})"
        return float(np.real(np.vdot(t, rho @ t))), desc


def execute_script(
    script: ast.ProtocolScript,
    params: Mapping[str, float] | None = None,
    seed: int = 0,
    n_max: int = 64,
    tail_tol: float = 1e-12,
) -> RunReport:
    """Run ``script`` and return its report.

    Deterministic for a given ``seed``. A failed ``expect fidelity`` marks the
    report ``ok=False``; runtime failures raise :class:`ScriptRuntimeError`
    located at the offending statement.
    """
    if not script.statements:
        raise ScriptRuntimeError(1, 1, "empty script")
    return _Run(script, params or {}, seed, n_max, tail_tol).run()
