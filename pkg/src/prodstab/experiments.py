"""Built-in scenarios and batch studies.

Scenario parameters follow the production-line experiments: a three-stage
line with capacities (10, 9, 8) whose queues defeat the linear law, the
two-stage line with capacities (6, 4) under linear and mixed feedback,
the decay-rate refinement study, the gain sweep and the capacity-gap
comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .discretization import HARD, CouplingMode, SimState, step
from .errors import OracleMismatch, UnknownScenario
from .feedback import Linear, Mixed, OpenLoop, control, kappa_bound
from .lyapunov import LyapunovWeights, decay_rate, discrete_V, stability_residual
from .network import GridSpec, NetworkSpec, validate_network
from .simulation import simulate


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one run.

    ``initial_flux`` is either one constant per processor or an ``m x N``
    table (tuple of tuples).
    """

    name: str
    network: NetworkSpec
    grid: GridSpec
    weights: LyapunovWeights
    law: object
    initial_flux: tuple
    initial_queues: tuple
    coords: str = "interface"
    coupling: CouplingMode = HARD
    stride: int = 1

    def config(self):
        return validate_network(self.network, self.grid, coords=self.coords)

    def run(self, backend=None):
        cfg = self.config()
        f0 = np.array(self.initial_flux, dtype=float)
        return simulate(cfg, self.weights, self.law, f0, self.initial_queues, self.coupling, backend)


def _two_stage(name, law, mu=(6.0, 4.0), f0=(4.0, 4.0), q0=(0.0, 1.0), eta=0.5, eta_tilde=None,
               h=0.01, T=30.0, v=1.0):
    net = NetworkSpec((v, v), mu, 0.5)
    return Scenario(
        name=name,
        network=net,
        grid=GridSpec.from_cfl(h, 1.0, v, T),
        weights=LyapunovWeights.uniform(2, eta, eta_tilde),
        law=law,
        initial_flux=tuple(float(x) for x in f0),
        initial_queues=tuple(float(x) for x in q0),
    )


def _three_stage(name, law):
    return Scenario(
        name=name,
        network=NetworkSpec((1.0, 1.0, 1.0), (10.0, 9.0, 8.0), 1.0),
        grid=GridSpec(0.01, 0.01, 50.0),
        weights=LyapunovWeights.uniform(3, 0.1),
        law=law,
        initial_flux=(10.0, 9.0, 8.0),
        initial_queues=(0.0, 0.0, 0.0),
    )


CAPACITY_GAP_MU1 = (5.0, 6.0, 8.0, 10.0)


def _capacity_gap(mu1, law_name, mu2=4.0):
    kappa = kappa_bound(0.2, 0.5)
    law = Linear(kappa) if law_name == "lf" else Mixed(kappa)
    return _two_stage(
        f"fig7-capacity-gap/{law_name}-mu{mu1:g}", law,
        mu=(mu1, mu2), f0=(mu1, mu2), q0=(0.0, 0.0), eta=0.2,
    )


def builtin_scenarios():
    """Mapping ``name -> {variant: Scenario}``."""
    k_quarter = kappa_bound(0.5, 0.5)
    k_tenth = kappa_bound(0.2, 0.5)
    gap = {}
    for mu1 in CAPACITY_GAP_MU1:
        for law_name in ("lf", "mf"):
            gap[f"{law_name}-mu{mu1:g}"] = _capacity_gap(mu1, law_name)
    return {
        "fig3-kink": {
            "lf": _three_stage("fig3-kink/lf", Linear(0.1)),
            "mf": _three_stage("fig3-kink/mf", Mixed(0.1)),
        },
        "fig4-lf-vs-mf": {
            "lf": _two_stage("fig4-lf-vs-mf/lf", Linear(0.5)),
            "mf": _two_stage("fig4-lf-vs-mf/mf", Mixed(k_quarter)),
        },
        "fig5-increasing-queue": {
            "mf": _two_stage("fig5-increasing-queue/mf", Mixed(k_tenth), f0=(6.0, 4.0), q0=(0.0, 0.0), eta=0.2),
        },
        "fig7-capacity-gap": gap,
    }


BUILTIN_NAMES = ("fig3-kink", "fig4-lf-vs-mf", "fig5-increasing-queue", "fig7-capacity-gap")


def get_scenarios(name):
    scenarios = builtin_scenarios()
    if name not in scenarios:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    return scenarios[name]


def run_builtin(name, backend=None):
    """Run every variant of a built-in scenario; returns ``{variant: Trajectory}``."""
    return {variant: sc.run(backend) for variant, sc in get_scenarios(name).items()}


# -- studies ---------------------------------------------------------------

@dataclass
class StudyResult:
    columns: tuple
    rows: list
    trajectories: dict = field(default_factory=dict, repr=False)

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def observed_rates(errors, Ns):
    """Convergence orders ``log(e_i/e_{i+1}) / log(N_{i+1}/N_i)``; first entry ``None``."""
    rates = [None]
    for i in range(1, len(errors)):
        rates.append(math.log(errors[i - 1] / errors[i]) / math.log(Ns[i] / Ns[i - 1]))
    return rates


TABLE1_N = (10, 50, 100, 200, 400, 800)


def convergence_study(v=1.0, eta=0.575, Ns=TABLE1_N, T=30.0, l=0.5, backend=None) -> StudyResult:
    """Decay rate and distance of V to its exponential envelope under refinement.

    Two-stage line with capacities (6, 4), initial flux 4, second queue 1,
    mixed feedback at the certified gain, CFL number one and ``N = l/h``.
    Norms of ``V_up - V`` are ``max_k |.|`` and ``sqrt(sum_k tau |.|^2)``.
    """
    nus, e_inf, e_l2 = [], [], []
    trajs = {}
    for N in Ns:
        h = l / N
        sc = _two_stage(f"converge/v{v:g}/N{N}", Mixed(kappa_bound(eta, l)), eta=eta, h=h, T=T, v=v)
        tr = sc.run(backend)
        d = tr.V_up - tr.V
        nus.append(tr.nu)
        e_inf.append(float(np.max(np.abs(d))))
        e_l2.append(float(np.sqrt(tr.config.tau * np.sum(d * d))))
        trajs[N] = tr
    r_inf = observed_rates(e_inf, Ns)
    r_l2 = observed_rates(e_l2, Ns)
    rows = [
        (N, l / N, e_inf[i], r_inf[i], e_l2[i], r_l2[i], nus[i])
        for i, N in enumerate(Ns)
    ]
    return StudyResult(("N", "h", "err_inf", "rate_inf", "err_l2", "rate_l2", "nu"), rows, trajs)


TABLE2_KAPPAS = (0.1, 0.25, 0.5, 0.75)


def kappa_sweep(kappas=TABLE2_KAPPAS, h=0.00125, T=30.0, eta_tilde=0.5752, l=0.5, backend=None) -> StudyResult:
    """Ratio ``V^T / V^0`` under mixed feedback with ``eta = -ln(kappa)/l``."""
    rows = []
    for kappa in kappas:
        eta = -math.log(kappa) / l
        sc = _two_stage(f"sweep/kappa{kappa:g}", Mixed(kappa), eta=eta, eta_tilde=eta_tilde, h=h, T=T)
        tr = sc.run(backend)
        rows.append((kappa, float(tr.V[-1] / tr.V[0]), eta, eta_tilde, tr.nu))
    return StudyResult(("kappa", "VT_over_V0", "eta", "eta_tilde", "nu"), rows)


def capacity_gap_study(mu1s=CAPACITY_GAP_MU1, mu2=4.0, backend=None) -> StudyResult:
    """Linear vs mixed feedback for growing capacity gaps ``mu1 - mu2``.

    ``excess`` is ``max_k log(V^k / V_up^k)``, the height of the kink
    above the exponential envelope, reached at ``excess_k`` (blank when V
    stays inside the envelope). ``max_increment`` is the largest one-step
    increase of V.
    """
    rows = []
    trajs = {}
    for mu1 in mu1s:
        for law_name in ("lf", "mf"):
            tr = _capacity_gap(mu1, law_name, mu2).run(backend)
            _, inc = tr.kink()
            excess = tr.excess_over_bound()
            k_ex = int(np.argmax(tr.V / tr.V_up)) if excess > 0 else None
            n_fail = int(np.count_nonzero(~tr.passed))
            rows.append((mu1, law_name, k_ex, excess, inc, n_fail, float(tr.u.max())))
            trajs[(mu1, law_name)] = tr
    cols = ("mu1", "law", "excess_k", "excess", "max_increment", "failed_steps", "max_u")
    return StudyResult(cols, rows, trajs)


# -- independent oracle ----------------------------------------------------

ORACLE_RTOL = 1e-12


def _oracle_case():
    net = NetworkSpec((0.8, 0.5), (3.0, 2.0), 1.0)
    grid = GridSpec(0.5, 0.5, 1.5)
    weights = LyapunovWeights((1.0, 2.0), (0.3, 0.7), (1.5, 1.0), (0.4, 0.2))
    f0 = ((2.5, 1.0), (1.5, 1.8))
    q0 = (0.0, 0.2)
    return net, grid, weights, f0, q0


def _oracle_run(net, grid, weights, f0, q0, law, zero=False, reverse_sum=False):
    """Straight-line transcription of the scheme for m = 2, N = 2, K = 4."""
    h, tau = grid.h, grid.tau
    v1, v2 = net.velocities
    mu1, mu2 = net.capacities
    p1, p2 = weights.p
    a1, a2 = weights.eta
    c1, c2 = weights.c
    b1, b2 = weights.eta_tilde
    L = net.length
    r1, r2 = v1 * tau / h, v2 * tau / h
    # cell centers and interface coordinates
    x10, x11 = 0.5 * h, 1.5 * h
    x20, x21 = L + 0.5 * h, L + 1.5 * h
    in1, out1, in2, out2 = 0.0, L, L, 2 * L

    f10, f11 = (0.0, 0.0) if zero else f0[0]
    f20, f21 = (0.0, 0.0) if zero else f0[1]
    q1, q2 = (0.0, 0.0) if zero else q0
    rec = {k: [] for k in ("V", "V1", "V2", "u", "S2", "Z2", "q2", "f11", "f21", "flux")}
    for k in range(4):
        t = k * tau
        terms = [
            f10 * f10 * p1 * math.exp(-a1 * x10) * h,
            f11 * f11 * p1 * math.exp(-a1 * x11) * h,
            f20 * f20 * p2 * math.exp(-a2 * x20) * h,
            f21 * f21 * p2 * math.exp(-a2 * x21) * h,
        ]
        if reverse_sum:
            terms = terms[::-1]
        V1 = 0.0
        for term in terms:
            V1 += term
        V2 = q1 * q1 * c1 * math.exp(-b1 * v1 * t) + q2 * q2 * c2 * math.exp(-b2 * v2 * t)
        rec["V"].append(V1 + V2)
        rec["V1"].append(V1)
        rec["V2"].append(V2)
        rec["q2"].append(q2)
        rec["f11"].append(f11)
        rec["f21"].append(f21)
        rec["flux"].append((f10, f11, f20, f21))
        if k == 3:
            break
        gout2 = mu2 if q2 > 0 else min(f11, mu2)
        gin2 = f11
        qz2 = c2 * math.exp(-b2 * v2 * t) * math.exp(-b2 * v2 * tau)
        if isinstance(law, OpenLoop):
            u = float(law.values([t])[0])
        elif isinstance(law, Linear) or q2 == 0.0:
            u = law.kappa * f21
        else:
            d = gin2 - gout2
            Y = (v1 * f11 * f11 * p1 * math.exp(-a1 * out1)
                 + v2 * f21 * f21 * p2 * math.exp(-a2 * out2)
                 - v2 * gout2 * gout2 * p2 * math.exp(-a2 * in2)
                 - (2 * q2 * d + tau * d * d) * qz2) / (v1 * p1 * math.exp(-a1 * in1))
            u = math.sqrt(Y) if Y > 0 else 0.0
        u = min(max(u, 0.0), mu1)
        rec["u"].append(u)
        S2 = (v1 * (u * u * p1 * math.exp(-a1 * in1) - f11 * f11 * p1 * math.exp(-a1 * out1))
              + v2 * (gout2 * gout2 * p2 * math.exp(-a2 * in2) - f21 * f21 * p2 * math.exp(-a2 * out2)))
        d = gin2 - gout2
        Z2 = (2 * q2 * d + tau * d * d) * qz2
        rec["S2"].append(S2)
        rec["Z2"].append(Z2)
        f10, f11 = f10 - r1 * (f10 - u), f11 - r1 * (f11 - f10)
        f20, f21 = f20 - r2 * (f20 - gout2), f21 - r2 * (f21 - f20)
        q2 = max(0.0, q2 + tau * (gin2 - gout2))
    return rec


def _close(a, b, rtol):
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1.0)


def oracle_smallcase(backend=None, reverse_sum=False, zero=False, rtol=ORACLE_RTOL):
    """Compare the engine with a hand-transcribed two-cell, four-level run.

    Runs an open-loop, a linear and a mixed law. Both the kernel series
    and the step-by-step public API are checked; the first divergent
    quantity raises :class:`OracleMismatch`. Returns ``True`` on success.
    """
    net, grid, weights, f0, q0 = _oracle_case()
    cfg = validate_network(net, grid)
    laws = (OpenLoop(((0.0, 1.0), (0.5, 2.5), (1.0, 0.5))), Linear(0.5), Mixed(0.5))
    for law in laws:
        name = type(law).__name__
        rec = _oracle_run(net, grid, weights, f0, q0, law, zero=zero, reverse_sum=reverse_sum)
        flux0 = np.zeros((2, 2)) if zero else np.array(f0)
        qinit = (0.0, 0.0) if zero else q0
        tr = simulate(cfg, weights, law, flux0, qinit, backend=backend)
        series = {
            "V": tr.V, "V1": tr.V1, "V2": tr.V2, "u": tr.u, "S2": tr.S2, "Z2": tr.Z2,
            "q2": tr.queues[:, 1], "f11": tr.outflow[:, 0], "f21": tr.outflow[:, 1],
        }
        for key, values in series.items():
            for k, (want, got) in enumerate(zip(rec[key], values)):
                if not _close(want, float(got), rtol):
                    raise OracleMismatch(f"{name}: {key}[k={k}]", want, float(got))
        final = tr.final.flux.ravel()
        for i, (want, got) in enumerate(zip(rec["flux"][-1], final)):
            if not _close(want, float(got), rtol):
                raise OracleMismatch(f"{name}: final flux[{i}]", want, float(got))

        # public step-by-step API
        state = SimState(flux0.copy(), np.array(qinit, dtype=float), 0)
        for k in range(cfg.K):
            V = discrete_V(state, weights, cfg)
            if not _close(rec["V"][k], V.V, rtol):
                raise OracleMismatch(f"{name}: step API V[k={k}]", rec["V"][k], V.V)
            for i, (want, got) in enumerate(zip(rec["flux"][k], state.flux.ravel())):
                if not _close(want, float(got), rtol):
                    raise OracleMismatch(f"{name}: step API flux[{i}] at k={k}", want, float(got))
            if k == cfg.K - 1:
                break
            u = control(law, state, weights, cfg)
            resid = stability_residual(state, u, weights, cfg)
            if not _close(rec["S2"][k] + rec["Z2"][k], resid.residual, rtol):
                raise OracleMismatch(f"{name}: step API residual[k={k}]", rec["S2"][k] + rec["Z2"][k], resid.residual)
            state, _ = step(state, u, cfg)
    return True


def guaranteed_rate(scenario: Scenario) -> float:
    return decay_rate(scenario.config(), scenario.weights).nu


def with_law(scenario: Scenario, law) -> Scenario:
    return replace(scenario, law=law)
