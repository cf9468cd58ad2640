"""Catalog of worked nonconservative systems.

Each constructor returns a validated :class:`NonconsSystem`. The registry at
the bottom maps string identifiers to constructors, parameter schemas and a
hand-written right-hand side of the displayed equations of motion, which the
test suite compares against the generic derivation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .autodiff import ops
from .errors import InvalidParams
from .mechanics.system import MemoryKernel, NonconsSystem
from .noether import ClosureHook, rotation, time_translation, translation

# -- drives -----------------------------------------------------------------------

DRIVE_KINDS = ("zero", "constant", "sin", "cos", "step", "circular")


@dataclass(frozen=True)
class Drive:
    """Named time-dependent forcing usable on dual, jet and traced times.

    ``sin``/``cos`` give A sin(w (t - t0)) and A cos(w (t - t0)), ``step``
    gives A H(t - t0), ``circular`` gives the planar rotating force
    A (-cos w t, -sin w t, 0).
    """

    kind: str = "zero"
    amplitude: float = 0.0
    frequency: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in DRIVE_KINDS:
            raise InvalidParams(f"unknown drive kind {self.kind!r}; choose from {', '.join(DRIVE_KINDS)}", "kind")

    @property
    def dim(self) -> int:
        return 3 if self.kind == "circular" else 1

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0

    def __call__(self, t):
        A, w, t0 = self.amplitude, self.frequency, self.offset
        k = self.kind
        if k == "zero":
            return 0.0
        if k == "constant":
            return A
        if k == "sin":
            return A * ops.sin(w * (t - t0))
        if k == "cos":
            return A * ops.cos(w * (t - t0))
        if k == "step":
            return A * ops.heaviside(t - t0)
        phase = w * (t - t0)
        return (-A * ops.cos(phase), -A * ops.sin(phase), 0.0 * A)


def as_drive(F, dim: int = 1) -> Callable:
    """Accept None, a number, a :class:`Drive`, a preset mapping or a callable."""
    if F is None:
        return Drive()
    if isinstance(F, (int, float)):
        return Drive("constant", float(F))
    if isinstance(F, dict):
        return Drive(**F)
    if callable(F):
        return F
    raise InvalidParams(f"cannot interpret {F!r} as a drive", "F")


def _vector_drive(F) -> Callable:
    f = as_drive(F)
    if isinstance(f, Drive) and f.dim == 1:
        scalar = f
        return lambda t: (scalar(t), 0.0, 0.0)
    return f


def _positive(name: str, value) -> float:
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise InvalidParams(f"{name} must be positive, got {value!r}", name)
    return value


def _nonnegative(name: str, value) -> float:
    value = float(value)
    if not (value >= 0.0 and math.isfinite(value)):
        raise InvalidParams(f"{name} must be nonnegative, got {value!r}", name)
    return value


def _real(name: str, value) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidParams(f"{name} must be finite, got {value!r}", name)
    return value


# -- constructors -----------------------------------------------------------------


def damped_oscillator(m: float = 1.0, k: float = 1.0, lam: float = 0.0, F=None) -> NonconsSystem:
    """m x'' + lam x' + k x = F(t) from K = -lam x- v+ + x- F(t)."""
    m, k, lam = _positive("m", m), _positive("k", k), _nonnegative("lam", lam)
    F = as_drive(F)

    def L(t, q, v):
        return 0.5 * m * v[0] * v[0] - 0.5 * k * q[0] * q[0]

    def K(p):
        return -lam * p.q_minus[0] * p.v_plus[0] + p.q_minus[0] * F(p.t)

    return NonconsSystem(
        1, L, K, time_dependent=not (isinstance(F, Drive) and F.is_zero), name="damped_oscillator",
        coordinate_names=("x",), generators=(time_translation(),),
    )


def maxwell_element(m: float = 1.0, k: float = 1.0, lam: float = 1.0, F=None) -> NonconsSystem:
    """Spring k in series with a dashpot lam; coordinates (x, d).

    m x'' + k (x - d) = F(t) and lam d' = k (x - d); the junction d carries no
    inertia and obeys a first-order equation.
    """
    m, k, lam = _positive("m", m), _positive("k", k), _positive("lam", lam)
    F = as_drive(F)

    def L(t, q, v):
        u = q[0] - q[1]
        return 0.5 * m * v[0] * v[0] - 0.5 * k * u * u

    def K(p):
        return p.q_minus[0] * F(p.t) - lam * p.q_minus[1] * p.v_plus[1]

    return NonconsSystem(
        2, L, K, time_dependent=True, name="maxwell_element", coordinate_names=("x", "d"),
        generators=(time_translation(),),
    )


def _as_map(name: str, f) -> Callable:
    if callable(f):
        return f
    value = float(f)
    return lambda S: value + 0.0 * S


def maxwell_element_closed(
    m: float = 1.0,
    k: float = 1.0,
    lam_tilde=1.0,
    U=None,
    F=None,
    S0: float = 0.0,
) -> NonconsSystem:
    """Maxwell element whose dashpot heats an internal reservoir of entropy S.

    ``lam_tilde(S)`` is the entropy-dependent damping and ``U(S)`` the
    internal energy (default U = S, i.e. unit temperature). The entropy is
    advanced with the mechanical state so that calE - int x' F dt stays fixed.
    """
    m, k = _positive("m", m), _positive("k", k)
    lam_s = _as_map("lam_tilde", lam_tilde)
    U = U if U is not None else (lambda S: S)
    F = as_drive(F)
    S0 = _real("S0", S0)

    def L(t, q, v, s):
        u = q[0] - q[1]
        return 0.5 * m * v[0] * v[0] - 0.5 * k * u * u - U(s[0])

    def K(p):
        return p.q_minus[0] * F(p.t) - lam_s(p.aux[0]) * p.q_minus[1] * p.v_plus[1]

    closure = ClosureHook(
        internal_energy=U,
        entropy0=S0,
        coefficient_maps={"lam_tilde": lam_s},
        external_power=lambda t, q, v: v[0] * F(t),
        dissipation=lambda t, q, v, S: lam_s(S) * v[1] * v[1],
    )
    return NonconsSystem(
        2, L, K, time_dependent=True, closure=closure, name="maxwell_element_closed",
        coordinate_names=("x", "d"), generators=(time_translation(),),
    )


def ald_charge(m: float = 1.0, tau: float = 0.01, F=None) -> NonconsSystem:
    """Point charge with radiation reaction, tau = e^2/(6 pi) in natural units.

    K = x-.F(t) - tau v-.a+ depends on the acceleration, so the raw system
    (m a = F + tau a') cannot be integrated; apply ``order_reduce`` first.
    """
    m, tau = _positive("m", m), _nonnegative("tau", tau)
    F = _vector_drive(F)

    def L(t, q, v):
        return 0.5 * m * ops.dot(v, v)

    def K(p):
        return ops.dot(p.q_minus, F(p.t)) - tau * ops.dot(p.v_minus, p.a_plus)

    gens = (time_translation(),) + tuple(translation(i, 3, "P" + "xyz"[i]) for i in range(3))
    gens += tuple(rotation(i) for i in range(3))
    return NonconsSystem(
        3, L, K, k_order=2, time_dependent=True, name="ald_charge", coordinate_names=("x", "y", "z"),
        generators=gens,
    )


def rlc_circuit(R: float = 1.0, L: float = 1.0, C: float = 1.0, V=None, Q_C0: float = 0.0) -> NonconsSystem:
    """Series RLC loop pair in loop charges (q1, q2).

    Element charges are Q_R = q1, Q_C = -q1 + q2 + Q_C0 and Q_L = q2. The
    resistor enters through K = q2- V(t) - R q1- q1'+, giving
    R q1' = Q_C / C and L q2'' + Q_C / C = V(t).
    """
    R, Lc, C = _positive("R", R), _positive("L", L), _positive("C", C)
    V = as_drive(V)
    Q_C0 = _real("Q_C0", Q_C0)

    def Lag(t, q, v):
        qc = -q[0] + q[1] + Q_C0
        return 0.5 * Lc * v[1] * v[1] - qc * qc / (2.0 * C)

    def K(p):
        return p.q_minus[1] * V(p.t) - R * p.q_minus[0] * p.v_plus[0]

    return NonconsSystem(
        2, Lag, K, time_dependent=True, name="rlc", coordinate_names=("q1", "q2"),
        generators=(time_translation(),),
    )


def rlc_charges(q, Q_C0: float = 0.0) -> dict[str, np.ndarray]:
    """Element charges from loop charges (works on arrays of samples)."""
    q = np.asarray(q, dtype=float)
    q1, q2 = q[..., 0], q[..., 1]
    return {"Q_R": q1, "Q_C": -q1 + q2 + Q_C0, "Q_L": q2}


def homogeneous_solution(Omega: float, Q0: float, V0: float, t0: float = 0.0) -> Callable:
    """Free motion Q0 cos W(t - t0) + (V0/W) sin W(t - t0) of the hidden oscillator."""

    def Qh(t):
        return Q0 * ops.cos(Omega * (t - t0)) + (V0 / Omega) * ops.sin(Omega * (t - t0))

    return Qh


def coupled_oscillators(
    m: float = 1.0,
    omega: float = 1.0,
    M: float = 1.0,
    Omega: float = 1.0,
    lam: float = 0.1,
    Q0: float = 0.0,
    V0: float = 0.0,
    t0: float = 0.0,
) -> tuple[NonconsSystem, NonconsSystem]:
    """Two bilinearly coupled oscillators and the open system for q alone.

    The closed system is conservative over (q, Q). In the open system Q has
    been integrated out: its free motion from (Q0, V0) drives q through
    K = lam q- Q_h(t), and the back-reaction is the retarded history force
    (lam^2/M) int G(t - t') q(t') dt' with G(s) = sin(Omega s)/Omega.
    """
    m, omega = _positive("m", m), _positive("omega", omega)
    M, Omega = _positive("M", M), _positive("Omega", Omega)
    lam, Q0, V0, t0 = _real("lam", lam), _real("Q0", Q0), _real("V0", V0), _real("t0", t0)

    def L_closed(t, q, v):
        x, X = q
        return (
            0.5 * m * (v[0] * v[0] - omega * omega * x * x)
            + lam * x * X
            + 0.5 * M * (v[1] * v[1] - Omega * Omega * X * X)
        )

    closed = NonconsSystem(
        2, L_closed, None, name="coupled_oscillators_closed", coordinate_names=("q", "Q"),
        generators=(time_translation(),),
    )

    Qh = homogeneous_solution(Omega, Q0, V0, t0)

    def L_open(t, q, v):
        return 0.5 * m * (v[0] * v[0] - omega * omega * q[0] * q[0])

    def K_open(p):
        return lam * p.q_minus[0] * Qh(p.t)

    def kernel(t, s):
        return ops.heaviside(t - s) * ops.sin(Omega * (t - s)) / Omega

    memory = MemoryKernel(
        kernel=kernel,
        coupling=lam * lam / M,
        lag=lambda u: math.sin(Omega * u) / Omega,
        coordinate=0,
    )
    has_drive = lam != 0.0 and (Q0 != 0.0 or V0 != 0.0)
    opened = NonconsSystem(
        1, L_open, K_open if has_drive else None, memory=memory, time_dependent=has_drive,
        name="coupled_oscillators_open", coordinate_names=("q",), generators=(time_translation(),),
    )
    return closed, opened


# -- registry ---------------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    """One entry of a system's parameter schema."""

    kind: str  # positive | nonnegative | real | drive | function
    default: object = None
    required: bool = False
    doc: str = ""


@dataclass(frozen=True)
class CatalogEntry:
    ident: str
    build: Callable
    params: dict[str, Param]
    tags: tuple[str, ...]
    summary: str
    coordinates: tuple[str, ...]
    reference_rhs: Callable | None = None
    init: tuple = ()
    kind: str = "mechanics"
    extra: dict = field(default_factory=dict)

    def schema(self) -> dict:
        return {
            name: {"kind": p.kind, "default": p.default, "required": p.required, "doc": p.doc}
            for name, p in self.params.items()
        }


def _ref_damped(m=1.0, k=1.0, lam=0.0, F=None):
    F = as_drive(F)
    return lambda t, q, v, s=(): np.array([(F(t) - lam * v[0] - k * q[0]) / m])


def _ref_maxwell(m=1.0, k=1.0, lam=1.0, F=None):
    F = as_drive(F)

    def rhs(t, q, v, s=()):
        # returns (x'', d') from the displayed pair of equations
        u = q[0] - q[1]
        return np.array([(F(t) - k * u) / m, k * u / lam])

    return rhs


def _ref_maxwell_closed(m=1.0, k=1.0, lam_tilde=1.0, U=None, F=None, S0=0.0):
    F = as_drive(F)
    lam_s = _as_map("lam_tilde", lam_tilde)
    U = U if U is not None else (lambda S: S)

    def rhs(t, q, v, s):
        from .autodiff import Dual

        S = s[0]
        u = q[0] - q[1]
        d_dot = k * u / lam_s(S)
        T = U(Dual(S, {0: 1.0})).grad[0]
        return np.array([(F(t) - k * u) / m, d_dot, lam_s(S) * d_dot * d_dot / T])

    return rhs


def _ref_rlc(R=1.0, L=1.0, C=1.0, V=None, Q_C0=0.0):
    V = as_drive(V)

    def rhs(t, q, v, s=()):
        # returns (q1', q2'') from the loop equations R I_R = Q_C/C, L I_L' + Q_C/C = V
        qc = -q[0] + q[1] + Q_C0
        return np.array([qc / (R * C), (V(t) - qc / C) / L])

    return rhs


def _ref_ald_reduced(m=1.0, tau=0.01, F=None):
    """First-order reduced ALD: m a = F + tau F'/m."""
    F = _vector_drive(F)

    def rhs(t, q, v, s=()):
        from .autodiff import Dual

        Fd = F(Dual(t, {0: 1.0}))
        Fv = np.array([float(ops.primal(f)) for f in Fd])
        dF = np.array([f.grad.get(0, 0.0) if hasattr(f, "grad") else 0.0 for f in Fd])
        return (Fv + tau * dF / m) / m

    return rhs


def _ref_coupled_closed(m=1.0, omega=1.0, M=1.0, Omega=1.0, lam=0.1, **_):
    def rhs(t, q, v, s=()):
        return np.array([(-m * omega**2 * q[0] + lam * q[1]) / m, (-M * Omega**2 * q[1] + lam * q[0]) / M])

    return rhs


_POS, _NONNEG, _REAL = "positive", "nonnegative", "real"

CATALOG: dict[str, CatalogEntry] = {}


def register(entry: CatalogEntry) -> CatalogEntry:
    CATALOG[entry.ident] = entry
    return entry


register(CatalogEntry(
    "damped_oscillator",
    damped_oscillator,
    {"m": Param(_POS, 1.0), "k": Param(_POS, 1.0), "lam": Param(_NONNEG, 0.0), "F": Param("drive", None)},
    ("forced damped oscillator", "linear damping"),
    "m x'' + lam x' + k x = F(t)",
    ("x",),
    _ref_damped,
    init=((1.0,), (0.0,)),
))
register(CatalogEntry(
    "maxwell_element",
    maxwell_element,
    {"m": Param(_POS, 1.0), "k": Param(_POS, 1.0), "lam": Param(_POS, 1.0), "F": Param("drive", None)},
    ("Maxwell element", "viscoelastic creep", "massless coordinate"),
    "spring and dashpot in series, coordinates (x, d)",
    ("x", "d"),
    _ref_maxwell,
    init=((1.0, 0.0), (0.0, 0.0)),
))
register(CatalogEntry(
    "maxwell_element_closed",
    maxwell_element_closed,
    {
        "m": Param(_POS, 1.0),
        "k": Param(_POS, 1.0),
        "lam_tilde": Param("function", 1.0, doc="number, or {lam0, alpha} for lam0 (1 + alpha S)"),
        "U": Param("function", None, doc="internal energy; default U(S) = S"),
        "F": Param("drive", None),
        "S0": Param(_REAL, 0.0),
    },
    ("Maxwell element", "closure condition", "entropy production"),
    "Maxwell element heating an internal entropy reservoir",
    ("x", "d"),
    _ref_maxwell_closed,
    init=((1.0, 0.0), (0.0, 0.0)),
))
register(CatalogEntry(
    "ald_charge",
    ald_charge,
    {"m": Param(_POS, 1.0), "tau": Param(_NONNEG, 0.01), "F": Param("drive", None, doc="3-vector or circular preset")},
    ("radiation reaction", "Abraham-Lorentz-Dirac", "order reduction", "Schott term"),
    "charged particle with radiation reaction (integrate via order reduction)",
    ("x", "y", "z"),
    _ref_ald_reduced,
    init=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
    extra={"needs_reduction": True},
))
register(CatalogEntry(
    "rlc",
    rlc_circuit,
    {
        "R": Param(_POS, 1.0), "L": Param(_POS, 1.0), "C": Param(_POS, 1.0),
        "V": Param("drive", None), "Q_C0": Param(_REAL, 0.0),
    },
    ("RLC circuit", "Kirchhoff voltage law", "loop charges"),
    "series RLC circuit in loop-charge coordinates (q1, q2)",
    ("q1", "q2"),
    _ref_rlc,
    init=((0.0, 0.0), (0.0, 0.0)),
))
register(CatalogEntry(
    "coupled_oscillators",
    coupled_oscillators,
    {
        "m": Param(_POS, 1.0), "omega": Param(_POS, 1.0), "M": Param(_POS, 1.0), "Omega": Param(_POS, 1.0),
        "lam": Param(_REAL, 0.1), "Q0": Param(_REAL, 0.0), "V0": Param(_REAL, 0.0),
    },
    ("coupled oscillators", "integrating out", "memory kernel", "open system"),
    "two coupled oscillators; the open variant keeps q with a retarded history force",
    ("q", "Q"),
    _ref_coupled_closed,
    init=((1.0, 0.0), (0.0, 0.0)),
    extra={"modes": ("closed", "open", "compare")},
))


def _build_coupled_scalars(**kw):
    from .fields import coupled_scalars

    return coupled_scalars(**kw)


register(CatalogEntry(
    "coupled_scalars_1d",
    _build_coupled_scalars,
    {
        "g": Param(_REAL, 0.1),
        "n": Param(_POS, 128, doc="grid cells"),
        "length": Param(_POS, 1.0),
        "background": Param(_REAL, None, doc="linearize the cubic vertex around this constant phi"),
    },
    ("two scalar fields", "field theory", "cubic coupling"),
    "two scalar fields phi, chi on a periodic 1+1D grid with a (g/2) phi^2 chi vertex",
    ("phi", "chi"),
    None,
    kind="field",
))


def list_systems() -> list[CatalogEntry]:
    """Catalog entries in a stable (alphabetical) order."""
    return [CATALOG[k] for k in sorted(CATALOG)]


def get_entry(ident: str) -> CatalogEntry:
    try:
        return CATALOG[ident]
    except KeyError:
        import difflib

        near = difflib.get_close_matches(ident, list(CATALOG), n=3, cutoff=0.4)
        hint = f"; did you mean {', '.join(near)}?" if near else ""
        raise InvalidParams(f"unknown system {ident!r}{hint}", "system") from None
