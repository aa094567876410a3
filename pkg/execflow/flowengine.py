# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Execution flow spectrum of a moment snapshot.

The flow I = dV/dt is analyzed through the pair of quadratic forms
<Q_j|I|Q_k> (volume moments) and <Q_j|Q_k> (time moments). Their
generalized eigenvectors are the states of extremal flow; observables such
as price and time are then averaged in those states with I as weight.
"""

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .momentstream import Integrand, MeasureKind
from .spectral import (build_matrix, analytic_gram, solve_gev, localized_state, rayleigh,
                       projections, StateVector)
from .conventions import (NS_PER_SECOND, WARMUP_TAUS, WARMUP_TICKS_PER_BASIS,
                          DEFAULT_ENTER_THRESHOLD, DEFAULT_EXIT_THRESHOLD, DEFAULT_NO_INFO_TOLERANCE)
from .exceptions import ExecflowException, ConfigError

_logger = logging.getLogger(__name__)

# Eigenvalues this close (relative) to the extreme one count as ties.
TIE_TOLERANCE = 1e-12

class GramSource(enum.Enum):
    SAMPLED = 'sampled'
    ANALYTIC = 'analytic'

class TriggerState(enum.Enum):
    ENTER_OK = 'ENTER_OK'
    EXIT_OK = 'EXIT_OK'
    NONE = 'NONE'

@dataclass
class FlowSolution:
    """The flow spectrum of one snapshot and the observables derived
    from it. Flows are in shares per second, T values in units of tau."""
    gev: object
    lambda_min: float
    lambda_max: float
    psi_min: StateVector
    psi_max: StateVector
    psi0: StateVector
    I0: float
    proj_min: float
    proj_max: float
    P_maxI: float
    T_maxI: float
    P_minI: float
    T_minI: float
    t_ns: int = 0
    last_price: float = float('nan')
    diagnostics: dict = field(default_factory=dict)

@dataclass
class FutureImpact:
    I_future: float
    dI_future: float
    no_info: bool

def time_scale_range(tau, n):
    """Return the shortest and longest time scales (seconds) resolved by
    an n function basis with time scale tau."""
    return tau / (2 * n - 1), tau

def check_warmup(ms, n):
    """Raise WarmupError unless the snapshot covers 3 tau and 4n ticks."""
    needed_ns = WARMUP_TAUS * ms.tau * NS_PER_SECOND
    needed_ticks = WARMUP_TICKS_PER_BASIS * n
    if ms.elapsed_ns < needed_ns or ms.tick_count < needed_ticks:
        raise WarmupError(f"Warmup needs {needed_ticks} ticks over {WARMUP_TAUS:g} tau; have "
                          f"{ms.tick_count} ticks over {ms.elapsed_ns / NS_PER_SECOND:.3f} s")

def flow_matrices(ms, n, gram_source=GramSource.SAMPLED):
    """Return (<Q|I|Q>, <Q|Q>) for a snapshot."""
    basis = ms.basis
    A = build_matrix(basis, ms[Integrand.ONE, MeasureKind.DV], n, provenance='<Q|I|Q>')
    if GramSource(gram_source) is GramSource.SAMPLED:
        B = build_matrix(basis, ms[Integrand.ONE, MeasureKind.DT], n, provenance='<Q|Q> sampled')
    else:
        B = analytic_gram(basis, n)
    return A, B

def _pick_extreme(eigenvalues, proj, largest):
    """Index of the extreme eigenvalue; ties go to the larger projection
    on the localized state."""
    target = eigenvalues[-1] if largest else eigenvalues[0]
    scale = max(np.abs(eigenvalues).max(), np.finfo(float).tiny)
    ties = np.flatnonzero(np.abs(eigenvalues - target) <= TIE_TOLERANCE * scale)
    return int(ties[np.argmax(proj[ties])])

def analyze(ms, n, x0=1.0, gram_source=GramSource.SAMPLED, warmup=True):
    """Compute the flow spectrum and its observables for a snapshot.

    Parameters
    ----------
    ms: ``MomentSet``
        Snapshot; its reference time is t_now.
    n: int
        Number of basis functions in the states.
    x0: float
        Where the "now" state is localized; 1 is t = t_now.
    gram_source: GramSource
        Whether <Q_j|Q_k> comes from the dt moments of the stream or from
        the analytic moments of the weight.
    warmup: bool
        Enforce the warmup guard.
    """

    if n < 1:
        raise ConfigError(f"n must be positive, found {n}")
    if warmup:
        check_warmup(ms, n)

    basis = ms.basis
    A, B = flow_matrices(ms, n, gram_source)
    gev = solve_gev(A, B)

    psi0 = localized_state(basis, B, x0)
    I0 = rayleigh(A, B, psi0)
    proj = projections(gev, B, psi0)
    i_min = _pick_extreme(gev.eigenvalues, proj, largest=False)
    i_max = _pick_extreme(gev.eigenvalues, proj, largest=True)
    psi_min, psi_max = gev.state(i_min), gev.state(i_max)

    price = build_matrix(basis, ms[Integrand.PRICE, MeasureKind.DV], n, provenance='<Q|PI|Q>')
    time = build_matrix(basis, ms[Integrand.TIME, MeasureKind.DV], n, provenance='<Q|TI|Q>')

    last = ms.last_tick
    solution = FlowSolution(
        gev=gev,
        lambda_min=float(gev.eigenvalues[i_min]),
        lambda_max=float(gev.eigenvalues[i_max]),
        psi_min=psi_min,
        psi_max=psi_max,
        psi0=psi0,
        I0=I0,
        proj_min=float(min(proj[i_min], 1.0)),
        proj_max=float(min(proj[i_max], 1.0)),
        P_maxI=rayleigh(price, A, psi_max),
        # ln x <= 0 on every tick; clip the roundoff.
        T_maxI=min(0.0, rayleigh(time, A, psi_max)),
        P_minI=rayleigh(price, A, psi_min),
        T_minI=min(0.0, rayleigh(time, A, psi_min)),
        t_ns=ms.reference_time,
        last_price=float(last.price) if last is not None else float('nan'),
        diagnostics=dict(gev.diagnostics),
    )
    solution.diagnostics['gram_discrepancy'] = gram_discrepancy(ms, n)
    return solution

def gram_discrepancy(ms, n):
    """Return max |sampled - analytic| / max |analytic| over Gram entries."""
    sampled = build_matrix(ms.basis, ms[Integrand.ONE, MeasureKind.DT], n).values
    exact = analytic_gram(ms.basis, n).values
    return float(np.abs(sampled - exact).max() / np.abs(exact).max())

def impact_from_future(fs, rel_tol=DEFAULT_NO_INFO_TOLERANCE):
    """Return the estimate that future flow reaches the past maximum."""
    I_future = fs.lambda_max
    dI_future = I_future - fs.I0
    no_info = bool(dI_future <= rel_tol * fs.lambda_max)
    return FutureImpact(I_future, dI_future, no_info)

def trigger_state(fs, enter_thr=DEFAULT_ENTER_THRESHOLD, exit_thr=DEFAULT_EXIT_THRESHOLD):
    """ENTER_OK when now is close to the minimal flow state, EXIT_OK when
    it is close to the maximal one. EXIT_OK wins if both hold."""
    if fs.proj_max > exit_thr:
        return TriggerState.EXIT_OK
    if fs.proj_min > enter_thr:
        return TriggerState.ENTER_OK
    return TriggerState.NONE

def radon_nikodym_spectrum(ms, numerator, denominator, n):
    """Solve the eigenproblem for any two moment families, for example
    (PRICE, DV) against (ONE, DV)."""
    A = build_matrix(ms.basis, ms[numerator], n, provenance=f"{numerator[0].name},{numerator[1].name}")
    B = build_matrix(ms.basis, ms[denominator], n, provenance=f"{denominator[0].name},{denominator[1].name}")
    gev = solve_gev(A, B)
    if gev.diagnostics['regularized']:
        _logger.warning(f"Regularized right hand side {B.provenance} in spectrum of {A.provenance}")
    return gev

def price_spectrum(ms, n, weighting='volume'):
    """Return the price levels (eigenvalues) of the price operator under
    volume (<Q|PI|Q> vs <Q|I|Q>) or time (<Q|P|Q> vs <Q|Q>) weighting."""
    measure = {'volume': MeasureKind.DV, 'time': MeasureKind.DT}.get(weighting)
    if measure is None:
        raise ConfigError(f"Unknown weighting {weighting!r}")
    return radon_nikodym_spectrum(ms, (Integrand.PRICE, measure), (Integrand.ONE, measure), n)

##
# Exceptions
#

class WarmupError(ExecflowException):
    """The snapshot has not seen enough time or ticks to be analyzed."""
    pass
