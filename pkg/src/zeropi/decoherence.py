"""Dephasing and depolarization rates of the 0-pi qubit.

Unit bookkeeping: coupling operators ``G`` are in GHz per unit of the noise
variable ``lambda`` (energy over h), spectral densities in ``lambda^2 s``
and angular frequencies in rad/s. A golden-rule rate is therefore
``(2 pi 1e9)^2 |<f|G|i>|^2 S(omega)`` in 1/s.

Spectral-density sign convention: ``S(omega > 0)`` describes the bath
absorbing energy, so a transition with ``omega_fi = omega_f - omega_i``
samples ``S(-omega_fi)``: downward transitions see ``S(+|omega|)``,
upward ones ``S(-|omega|)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .constants import GHZ_TO_RAD_S, KB_OVER_H_GHZ, hbar, k_B
from .errors import DispersiveWarning, DomainError, HybridizationWarning, UsageError, ZeroPiError
from .params import BasisSpec, CircuitParams

log = logging.getLogger(__name__)

INF = math.inf
WEIGHT_FLOOR = 1e-6


# -- thermal ζ-mode -------------------------------------------------------------


def thermal_occupation(Omega_zeta: float, T: float) -> float:
    """Bose occupation of a mode at ``Omega_zeta`` GHz and ``T`` kelvin."""
    if T < 0 or not math.isfinite(T):
        raise DomainError("temperature must be >= 0")
    if Omega_zeta <= 0:
        raise DomainError("mode frequency must be positive")
    if T == 0:
        return 0.0
    return 1.0 / math.expm1(Omega_zeta / (KB_OVER_H_GHZ * T))


def thermal_weights(n_th: float, floor: float = WEIGHT_FLOOR) -> np.ndarray:
    """Normalized thermal Fock populations P(n) truncated where P(n) < floor."""
    if n_th <= 0:
        return np.ones(1)
    ratio = n_th / (1 + n_th)
    n_max = max(0, int(math.floor(math.log(floor / (1 - ratio)) / math.log(ratio))))
    p = (1 - ratio) * ratio ** np.arange(n_max + 1)
    return p / p.sum()


@dataclass(frozen=True)
class ThermalEnv:
    temperature: float
    Omega_zeta: float
    kappa_zeta: float
    n_th: float
    weights: np.ndarray

    @classmethod
    def from_params(cls, params: CircuitParams, floor: float = WEIGHT_FLOOR) -> "ThermalEnv":
        n = thermal_occupation(params.Omega_zeta, params.temperature)
        return cls(params.temperature, params.Omega_zeta, params.kappa_zeta, n, thermal_weights(n, floor))

    def occupation(self, frequency_ghz: float) -> float:
        """Bose occupation at another frequency (GHz)."""
        return thermal_occupation(abs(frequency_ghz), self.temperature) if frequency_ghz else INF


# -- noise spectra ------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpectrum:
    """Spectral density of a classical noise variable, in lambda^2 s.

    ``one_over_f``: ``2 pi A^2 / |omega|^exponent`` with ``|omega|`` clamped
    below at ``omega_ir``. ``ohmic_fluxline``: current noise of a resistor
    ``R`` at ``temperature`` coupled through mutual inductance ``M``.
    ``smooth_gaussian``: Gaussian correlation ``sigma2 exp(-t^2 / 2 t_c^2)``.
    """

    kind: str
    amplitude: float = 0.0
    exponent: float = 1.0
    omega_ir: float = 2 * math.pi
    omega_uv: float = 2 * math.pi * 3e9
    R: float = 50.0
    M: float = 1000.0
    temperature: float = 0.015
    t_c: float = 0.0
    sigma2: float = 0.0

    KINDS = ("one_over_f", "ohmic_fluxline", "smooth_gaussian")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise UsageError(f"unknown spectrum kind {self.kind!r}")

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.kind == "one_over_f":
            w = np.maximum(np.abs(omega), self.omega_ir)
            out = 2 * math.pi * self.amplitude**2 / w**self.exponent
        elif self.kind == "ohmic_fluxline":
            out = self.M**2 * _ohmic_current(omega, self.R, self.temperature)
        else:
            out = self.sigma2 * self.t_c * math.sqrt(2 * math.pi) * np.exp(-0.5 * (omega * self.t_c) ** 2)
        return out if out.ndim else float(out)


def _ohmic_current(omega, R, T):
    """(2 hbar omega / R) [1 + coth(hbar omega / 2 k T)] written without overflow."""
    omega = np.asarray(omega, dtype=float)
    if T == 0:
        return np.where(omega > 0, 4 * hbar * omega / R, 0.0)
    x = hbar * omega / (k_B * T)
    with np.errstate(divide="ignore", invalid="ignore"):
        # 4 hbar omega / (R (1 - exp(-x))) with the omega -> 0 limit 4 k T / R
        val = np.where(np.abs(x) > 1e-12, 4 * hbar * omega / (R * -np.expm1(-x)), 4 * k_B * T / R)
    return val


def one_over_f(amplitude: float, params: Optional[CircuitParams] = None) -> NoiseSpectrum:
    c = params.cutoffs if params is not None else None
    if c is None:
        return NoiseSpectrum("one_over_f", amplitude)
    return NoiseSpectrum("one_over_f", amplitude, omega_ir=c.omega_ir, omega_uv=c.omega_uv)


def fluxline_spectrum(params: CircuitParams) -> NoiseSpectrum:
    return NoiseSpectrum("ohmic_fluxline", R=params.fluxline.R, M=params.fluxline.M,
                         temperature=params.temperature)


# -- pure dephasing ---------------------------------------------------------


def tphi_1f(d1: float, d2: float, A: float, omega_ir: float = 2 * math.pi,
            omega_uv: float = 2 * math.pi * 3e9, t_meas: float = 1e-5) -> float:
    """Ramsey dephasing time (s) for 1/f noise to second order in the coupling."""
    if not A > 0:
        raise DomainError("noise amplitude must be positive")
    if not omega_ir * t_meas < 1:
        raise DomainError("need omega_ir * t_meas < 1")
    log_t = abs(math.log(omega_ir * t_meas))
    log_uv = math.log(omega_uv / omega_ir)
    rate2 = 2 * A**2 * d1**2 * log_t + 2 * A**4 * d2**2 * (log_uv**2 + 2 * log_t**2)
    return INF if rate2 == 0 else rate2 ** -0.5


def tphi_smooth(S0: float, sigma2: float, d1: float, d2: float) -> float:
    """Dephasing time (s) for noise with a smooth spectrum near zero frequency."""
    if S0 < 0:
        raise DomainError("S0 must be >= 0")
    denom = S0 * (d1**2 + d2**2 * sigma2 / math.sqrt(2))
    return INF if denom == 0 else 4.0 / denom


@dataclass(frozen=True)
class ShotNoise:
    rate: float
    regime: str
    small_chi: float
    large_chi: float


def shot_noise_asymptotes(chi01: float, kappa: float, n_th: float) -> dict:
    chi = GHZ_TO_RAD_S * chi01
    numerator = 4 * chi**2 * n_th * (n_th + 1)
    small = numerator / kappa if kappa else (INF if numerator else 0.0)
    return {"small_chi": small, "large_chi": kappa * n_th}


def shot_noise_rate(chi01: float, kappa: float, n_th: float, max_g_over_Delta: Optional[float] = None) -> ShotNoise:
    """Dephasing rate (1/s) from thermal photon-number fluctuations of the zeta mode."""
    if not kappa >= 0:
        raise DomainError("kappa must be >= 0")
    if n_th < 0:
        raise DomainError("n_th must be >= 0")
    if kappa == 0:
        # a lossless mode has no photon-number fluctuations to dephase the qubit
        asym = shot_noise_asymptotes(chi01, kappa, n_th)
        return ShotNoise(0.0, "large_chi", asym["small_chi"], asym["large_chi"])
    if max_g_over_Delta is not None and max_g_over_Delta > 0.2:
        warnings.warn(f"shot-noise rate evaluated at |g/Delta| = {max_g_over_Delta:.3g}",
                      DispersiveWarning, stacklevel=2)
    r = GHZ_TO_RAD_S * chi01 / kappa
    # with w = 1 + 2ir, Re[sqrt(w^2 + c) - 1] = Re[c / (sqrt(w^2 + c) + w)] since Re w - 1 = 0;
    # this form is exactly zero at n_th = 0 and free of cancellation for small chi
    w = 1 + 2j * r
    c = 8j * r * n_th
    rate = 0.5 * kappa * (c / (np.sqrt(w * w + c) + w)).real
    rate = max(float(rate), 0.0)
    asym = shot_noise_asymptotes(chi01, kappa, n_th)
    if rate == 0:
        regime = "small_chi" if abs(r) <= 1 else "large_chi"
    else:
        regime = min(asym, key=lambda key: abs(math.log(asym[key] / rate)) if asym[key] > 0 else INF)
    return ShotNoise(rate, regime, asym["small_chi"], asym["large_chi"])


# -- golden-rule depolarization ----------------------------------------------


def _as_matrix(G):
    return getattr(G, "matrix", G)


def golden_rule_rate(G, psi_i, psi_f, omega_fi: float, S: NoiseSpectrum) -> float:
    """Transition rate (1/s) from ``psi_i`` to ``psi_f`` induced by ``V = G lambda``."""
    m = _as_matrix(G)
    psi_i = np.asarray(psi_i)
    psi_f = np.asarray(psi_f)
    if psi_i.shape[0] != m.shape[1] or psi_f.shape[0] != m.shape[0]:
        raise UsageError("operator and state dimensions do not match")
    element = np.vdot(psi_f, m @ psi_i)
    return float(GHZ_TO_RAD_S**2 * abs(element) ** 2 * S(-omega_fi))


@dataclass
class TransitionRates:
    """Composite rates between 0-pi levels, summed over zeta states."""

    rates: dict
    Gamma_1to0: float
    Gamma_0up: float
    Gamma_1up: float
    warnings: list = field(default_factory=list)

    @property
    def Gamma1(self) -> float:
        return self.Gamma_1to0 + self.Gamma_0up + self.Gamma_1up

    def as_dict(self) -> dict:
        return {"Gamma_1to0": self.Gamma_1to0, "Gamma_0up": self.Gamma_0up,
                "Gamma_1up": self.Gamma_1up, "Gamma1": self.Gamma1}


def _combine(pair_rates: dict, levels: int, notes) -> TransitionRates:
    up0 = sum(pair_rates.get((0, lp), 0.0) for lp in range(2, levels))
    up1 = sum(pair_rates.get((1, lp), 0.0) for lp in range(2, levels))
    return TransitionRates(pair_rates, pair_rates.get((1, 0), 0.0), up0, up1, notes)


def _pair_sums(labels, env: ThermalEnv, element2, factor, sources=(0, 1), l_max=None, targets=None):
    """Gamma_{l->l'} = sum_{n,n'} P(n) factor(l, l', i, j) |element_{j i}|^2."""
    levels = labels.shape[0] if labels.shape else 1 + max(l for l, _ in labels.labels)
    l_max = levels if l_max is None else min(levels, l_max)
    index = {lab: i for i, lab in enumerate(labels.labels)}
    weights = env.weights
    missing = [(l, n) for l in sources for n in range(weights.size) if (l, n) not in index]
    if missing:
        from .errors import LabelingError

        raise LabelingError(f"dressed states missing for thermally populated labels {missing[:5]}", missing)
    by_level = {}
    for lab, i in index.items():
        by_level.setdefault(lab[0], []).append(i)
    notes = []
    rates = {}
    hybrid_used = set()
    for l in sources:
        init = np.array([index[(l, n)] for n in range(weights.size)])
        for lp in range(l_max):
            if lp == l or lp not in by_level or (targets is not None and lp not in targets):
                continue
            final = np.array(by_level[lp])
            block = element2[np.ix_(final, init)] * factor(l, lp, init, final)
            rates[(l, lp)] = float(block.sum(axis=0) @ weights)
            if labels.hybridized is not None:
                for i in np.concatenate([init, final]):
                    if labels.hybridized[i]:
                        hybrid_used.add(labels.labels[i])
    if hybrid_used:
        msg = f"hybridized dressed states enter composite rates: {sorted(hybrid_used)[:6]}"
        notes.append(msg)
        warnings.warn(msg, HybridizationWarning, stacklevel=3)
    return rates, l_max, notes


def lift_to_product(G_levels: np.ndarray, n_zeta_max: int) -> np.ndarray:
    """Operator acting on the 0-pi level index only, in the (l, n) product basis."""
    return sp.kron(sp.csr_matrix(G_levels), sp.identity(n_zeta_max + 1), format="csr")


def composite_depolarization(labels, G3d, S: NoiseSpectrum, env: ThermalEnv, *, l_max=None) -> TransitionRates:
    """Thermally averaged golden-rule rates between 0-pi levels.

    ``G3d`` acts on the space of the dressed eigenvectors stored in
    ``labels``. Transitions that keep the level index ``l`` are excluded.
    """
    psi = labels.vectors
    m = _as_matrix(G3d)
    if m.shape[0] != psi.shape[0]:
        raise UsageError("operator dimension does not match the dressed states")
    element2 = np.abs(psi.conj().T @ (m @ psi)) ** 2
    E = labels.energies

    def factor(l, lp, init, final):
        omega = GHZ_TO_RAD_S * (E[final][:, None] - E[init][None, :])
        return GHZ_TO_RAD_S**2 * S(-omega)

    rates, l_max, notes = _pair_sums(labels, env, element2, factor, l_max=l_max)
    return _combine(rates, l_max, notes)


def purcell_exact(labels, env: ThermalEnv, *, l_max=None) -> TransitionRates:
    """Purcell rates from ladder-operator elements between dressed states.

    Downward pairs use ``kappa (1 + n_th) |<f|a|i>|^2`` and upward pairs
    ``kappa n_th |<f|a^dag|i>|^2``, with the thermal factor evaluated at the
    0-pi transition frequency.
    """
    levels, nz = labels.shape
    a = sp.kron(sp.identity(levels), sp.diags([np.sqrt(np.arange(1, nz))], [1]), format="csr")
    psi = labels.vectors
    lower = psi.conj().T @ (a @ psi)  # <f|a|i>
    raise_ = psi.conj().T @ (a.conj().T @ psi)  # <f|a^dag|i>
    E = labels.energies
    bare = {l: E[i] for i, (l, n) in enumerate(labels.labels) if n == 0}
    l_max = levels if l_max is None else min(levels, l_max)
    up2 = np.abs(raise_) ** 2
    down2 = np.abs(lower) ** 2
    rates = {}
    notes = []
    for l in (0, 1):
        for lp in range(l_max):
            if lp == l:
                continue
            up = bare.get(lp, 0.0) > bare.get(l, 0.0)
            n_q = env.occupation(abs(bare[lp] - bare[l])) if l in bare and lp in bare else env.n_th
            thermal = n_q if up else 1.0 + n_q

            def factor(a_, b_, init, final, scale=env.kappa_zeta * thermal):
                return scale

            r, _, nt = _pair_sums(labels, env, up2 if up else down2, factor, sources=(l,), targets=(lp,))
            rates[(l, lp)] = r.get((l, lp), 0.0)
            notes.extend(x for x in nt if x not in notes)
    return _combine(rates, l_max, notes)


def purcell_perturbative(g, energies2d, Omega_zeta: float, env: ThermalEnv, *, sources=(0, 1),
                         warn_ratio: float = 0.2) -> TransitionRates:
    """Leading-order Purcell rates from the coupling matrix (1/s).

    Downward ``l -> l'``: ``kappa (1 + n_th) |g_ll'|^2 / (E_l - E_l' - Omega)^2``;
    upward: ``kappa n_th |g_l'l|^2 / (E_l - E_l' + Omega)^2``.
    """
    from .errors import ResonanceError

    g = np.asarray(g, dtype=complex)
    E = np.asarray(energies2d, dtype=float)
    L = g.shape[0]
    rates = {}
    worst = 0.0
    for l in sources:
        for lp in range(L):
            if lp == l:
                continue
            up = E[lp] > E[l]
            coupling = g[lp, l] if up else g[l, lp]
            if coupling == 0:
                rates[(l, lp)] = 0.0
                continue
            delta = E[l] - E[lp] + Omega_zeta if up else E[l] - E[lp] - Omega_zeta
            if abs(delta) < 1e-9:
                raise ResonanceError(f"Purcell denominator vanishes for levels {l} -> {lp}", (l, lp))
            worst = max(worst, abs(coupling / delta))
            n_q = env.occupation(abs(E[lp] - E[l]))
            thermal = n_q if up else 1 + n_q
            rates[(l, lp)] = float(env.kappa_zeta * thermal * abs(coupling) ** 2 / delta**2)
    notes = []
    if worst > warn_ratio:
        notes.append(f"perturbative Purcell rates with |g/Delta| up to {worst:.3g}")
        warnings.warn(notes[-1], DispersiveWarning, stacklevel=2)
    return _combine(rates, L, notes)


# -- working-point budget -----------------------------------------------------


DEPHASING_CHANNELS = ("Tphi_flux_1f", "Tphi_Ic_1f", "Tphi_charge_1f", "Tphi_shot")
RELAXATION_CHANNELS = ("T1_Ic", "T1_flux_1f", "T1_fluxline", "T1_purcell")


def _time(rate: float) -> float:
    return INF if rate == 0 else 1.0 / rate


@dataclass
class RateBreakdown:
    """Per-channel coherence times (s) and their combination."""

    times: dict
    sub_rates: dict
    include_charge: bool
    failed: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __getattr__(self, name):
        times = self.__dict__.get("times", {})
        if name in times:
            return times[name]
        raise AttributeError(name)

    def _rate(self, channel):
        t = self.times.get(channel, INF)
        return 0.0 if (t == INF or not math.isfinite(t)) else 1.0 / t

    @property
    def Tphi(self) -> float:
        channels = [c for c in DEPHASING_CHANNELS if c != "Tphi_charge_1f" or self.include_charge]
        return _time(sum(self._rate(c) for c in channels))

    @property
    def T1(self) -> float:
        return _time(sum(self._rate(c) for c in RELAXATION_CHANNELS))

    @property
    def T2(self) -> float:
        rate = 0.0 if self.T1 == INF else 0.5 / self.T1
        rate += 0.0 if self.Tphi == INF else 1.0 / self.Tphi
        return _time(rate)

    def rows(self):
        """(channel, Tphi_s, T1_s, Gamma_1to0, Gamma_0up, Gamma_1up) table rows."""
        out = []
        for c in DEPHASING_CHANNELS:
            out.append((c, self.times.get(c, math.nan), math.nan, math.nan, math.nan, math.nan))
        for c in RELAXATION_CHANNELS:
            s = self.sub_rates.get(c, {})
            out.append((c, math.nan, self.times.get(c, math.nan), s.get("Gamma_1to0", math.nan),
                        s.get("Gamma_0up", math.nan), s.get("Gamma_1up", math.nan)))
        out.append(("combined", self.Tphi, self.T1, math.nan, math.nan, math.nan))
        out.append(("T2", math.nan, self.T2, math.nan, math.nan, math.nan))
        return out


def coherence_budget(params: CircuitParams, basis: Optional[BasisSpec] = None, working_point: Optional[dict] = None,
                     *, levels: int = 15, include_charge: bool = False, n_zeta_max: Optional[int] = None,
                     channels: Optional[tuple] = None) -> RateBreakdown:
    """Evaluate every dephasing and depolarization channel at one working point."""
    from . import dispersive, spectrum
    from .operators import build_noise_operator

    if working_point:
        params = replace(params, **working_point)
    if basis is None:
        basis = BasisSpec.default_for(params, n_theta_max=20)
    wanted = set(channels or DEPHASING_CHANNELS + RELAXATION_CHANNELS)
    env = ThermalEnv.from_params(params)
    times = {}
    sub = {}
    failed = {}
    meta = {"n_th": env.n_th, "Omega_zeta_GHz": params.Omega_zeta, "levels": levels,
            "thermal_weight_floor": WEIGHT_FLOOR,
            "omitted_channels": "offset charges of the phi and zeta modes (suppressed by the unitary "
                                "transformation argument); not computed"}
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        # a few extra 2D states feed the level-truncation check on chi01
        solver = spectrum.SpectrumSolver(basis, levels + dispersive.TRUNCATION_EXTRA)
        try:
            sol2d = solver.solve(params)
        except ZeroPiError as exc:
            failed["spectrum"] = str(exc)
            sol2d = None

        amps = params.noise_amplitudes
        c = params.cutoffs

        def dephasing(name, parameter, amplitude):
            if name not in wanted:
                return
            try:
                if amplitude == 0:
                    times[name] = INF
                    return
                small = spectrum.SpectrumSolver(basis, 2)
                der = spectrum.energy_derivatives(params, basis, parameter, solver=small)
                times[name] = tphi_1f(der.d1, der.d2, amplitude, c.omega_ir, c.omega_uv, c.t_meas)
                meta[f"d_{parameter}"] = {"d1": der.d1, "d2": der.d2, "d1_error": der.d1_error,
                                          "d2_error": der.d2_error, "step": der.step}
            except ZeroPiError as exc:
                failed[name] = str(exc)
                times[name] = math.nan

        dephasing("Tphi_flux_1f", "flux", amps.A_flux)
        dephasing("Tphi_Ic_1f", "EJ", amps.A_Ic * params.EJ)
        dephasing("Tphi_charge_1f", "ng_theta", amps.A_charge)

        dressed = None
        if sol2d is not None:
            try:
                dressed = spectrum.solve_dressed(params, basis, levels=levels, n_zeta_max=n_zeta_max,
                                                 sol2d=sol2d, strict=False)
                report = dispersive.stark_lamb(dressed.g, sol2d.eigenvalues[:levels], params.Omega_zeta)
                meta["chi01_GHz"] = report.chi01
                meta["max_g_over_Delta"] = report.max_g_over_Delta
                meta["n_zeta_max"] = dressed.n_zeta_max
                wide = levels + dispersive.TRUNCATION_EXTRA
                meta["chi01_truncation_change"] = dispersive.truncation_change(
                    dispersive.coupling_matrix(sol2d, params, basis, wide), sol2d.eigenvalues[:wide],
                    params.Omega_zeta, levels)
                if "Tphi_shot" in wanted:
                    shot = shot_noise_rate(report.chi01, params.kappa_zeta, env.n_th)
                    times["Tphi_shot"] = _time(shot.rate)
                    meta["shot_regime"] = shot.regime
            except ZeroPiError as exc:
                failed["Tphi_shot"] = str(exc)
                times["Tphi_shot"] = math.nan

        def relaxation(name, compute):
            if name not in wanted:
                return
            if dressed is None:
                failed[name] = "no dressed spectrum"
                times[name] = math.nan
                return
            try:
                tr = compute()
                times[name] = _time(tr.Gamma1)
                sub[name] = tr.as_dict()
            except ZeroPiError as exc:
                failed[name] = str(exc)
                times[name] = math.nan

        if dressed is not None:
            U = sol2d.eigenvectors[:, :levels]

            def lifted(channel):
                G = build_noise_operator(params, basis, channel).matrix
                return lift_to_product(U.conj().T @ (G @ U), dressed.n_zeta_max)

            relaxation("T1_Ic", lambda: composite_depolarization(
                dressed.labels, lifted("critical_current"), one_over_f(amps.A_Ic, params), env))
            G_flux = lifted("flux") if {"T1_flux_1f", "T1_fluxline"} & wanted else None
            relaxation("T1_flux_1f", lambda: composite_depolarization(
                dressed.labels, G_flux, one_over_f(amps.A_flux, params), env))
            relaxation("T1_fluxline", lambda: composite_depolarization(
                dressed.labels, G_flux, fluxline_spectrum(params), env))
            relaxation("T1_purcell", lambda: purcell_exact(dressed.labels, env))
        else:
            for name in RELAXATION_CHANNELS:
                relaxation(name, None)
    notes = sorted({str(w.message) for w in caught})
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return RateBreakdown(times, sub, include_charge, failed, meta, notes)
