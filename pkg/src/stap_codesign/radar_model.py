# coding=utf-8
"""
Airborne STAP scenario model.

Every M·N·L dimensional object uses the Kronecker order Doppler (outer), fast time
(middle), space (inner), i.e. the order of v(f_d) ⊗ s ⊗ a(θ, φ).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.linalg

from .exceptions import ScenarioValidationException
from .matrix_ops import ComplexMatrix, ComplexVector, as_complex

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TargetConfig:
    azimuth: float = 0.0
    elevation: float = math.pi / 3
    doppler: float = -0.1443


@dataclass(frozen=True)
class InterfererConfig:
    azimuth: float = 0.3941
    elevation: float = math.pi / 3
    phase_rate: float = 0.02
    power: float = 1.0


@dataclass(frozen=True)
class ClutterConfig:
    patches: int = 25
    elevation: float = 0.3
    azimuth_span: Tuple[float, float] = (-math.pi / 2, math.pi / 2)
    patch_power: float = 1.0
    doppler_slope: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Full description of a simulated STAP scenario. Defaults reproduce the
    reference airborne scenario (5 element ULA, 8 pulses of 8 samples).
    """
    M: int = 5
    N: int = 8
    L: int = 8
    target: TargetConfig = field(default_factory=TargetConfig)
    kappa: float = 1.0
    power: float = 1.0
    noise_decay: float = 0.005
    interferers: Tuple[InterfererConfig, ...] = (InterfererConfig(),)
    clutter: ClutterConfig = field(default_factory=ClutterConfig)
    seed: int = 0

    @property
    def dim(self) -> int:
        """
        Space-time dimension M·N·L.
        """
        return self.M * self.N * self.L

    def validate(self) -> "ScenarioConfig":
        """
        Check the scenario invariants.
        :return: self, so that calls can be chained.
        """
        for name, value in (("M", self.M), ("N", self.N), ("L", self.L), ("patches", self.clutter.patches)):
            if int(value) != value or value < 1:
                raise ScenarioValidationException(name, "must be an integer >= 1, got {}".format(value))
        if not self.power > 0:
            raise ScenarioValidationException("power", "must be > 0, got {}".format(self.power))
        if self.kappa == 0 or not math.isfinite(self.kappa):
            raise ScenarioValidationException("kappa", "must be finite and non zero, got {}".format(self.kappa))
        if not self.noise_decay > 0:
            raise ScenarioValidationException("decay", "must be > 0, got {}".format(self.noise_decay))
        lo, hi = self.clutter.azimuth_span
        if lo > hi or (lo == hi and self.clutter.patches > 1):
            raise ScenarioValidationException("azimuth_span", "lower end must be below upper end")
        if self.clutter.patch_power < 0:
            raise ScenarioValidationException("patch_power", "must be >= 0")
        angles = [self.target.azimuth, self.target.elevation, self.target.doppler, self.clutter.elevation,
                  lo, hi, self.clutter.doppler_slope]
        for interferer in self.interferers:
            if interferer.power < 0:
                raise ScenarioValidationException("interferers.power", "must be >= 0")
            angles.extend([interferer.azimuth, interferer.elevation, interferer.phase_rate])
        if not all(math.isfinite(a) for a in angles):
            raise ScenarioValidationException("angles", "all angles and rates must be finite")
        return self


def spatial_steering(azimuth: float, elevation: float, M: int) -> ComplexVector:
    """
    Half-wavelength ULA steering vector, entry m = exp(-i π m sin(azimuth) cos(elevation)).
    """
    m = np.arange(M)
    return np.exp(-1j * np.pi * m * np.sin(azimuth) * np.cos(elevation))


def doppler_steering(f_d: float, L: int) -> ComplexVector:
    """
    Slow-time steering vector, entry l = exp(i 2π f_d l).
    """
    return np.exp(2j * np.pi * f_d * np.arange(L))


def space_time_map(v: ComplexVector, a: ComplexVector, N: int) -> ComplexMatrix:
    """
    Matrix v ⊗ I_N ⊗ a, mapping a waveform s to v ⊗ s ⊗ a.
    """
    return np.kron(v[:, np.newaxis], np.kron(np.eye(N), a[:, np.newaxis]))


def build_target_map(cfg: ScenarioConfig) -> ComplexMatrix:
    """
    Target map G (MNL x N) with G s = v(f_d) ⊗ s ⊗ a(θ_t, φ_t).
    """
    v = doppler_steering(cfg.target.doppler, cfg.L)
    a = spatial_steering(cfg.target.azimuth, cfg.target.elevation, cfg.M)
    return space_time_map(v, a, cfg.N)


def build_noise_cov(cfg: ScenarioConfig) -> ComplexMatrix:
    """
    Toeplitz noise covariance with entry (i, j) = exp(-decay |i - j|).
    """
    column = np.exp(-cfg.noise_decay * np.arange(cfg.dim))
    return scipy.linalg.toeplitz(column).astype(complex)


def build_interference_cov(cfg: ScenarioConfig) -> ComplexMatrix:
    """
    Sum over interferers of power · u u^H, with u = t ⊗ a_i and t the unit modulus
    phase ramp exp(i · phase_rate · n) over the L·N slow/fast time lags.
    """
    res = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    n = np.arange(cfg.L * cfg.N)
    for interferer in cfg.interferers:
        t = np.exp(1j * interferer.phase_rate * n)
        a = spatial_steering(interferer.azimuth, interferer.elevation, cfg.M)
        u = np.kron(t, a)
        res += interferer.power * np.outer(u, u.conj())
    return res


def clutter_patch_azimuths(cfg: ScenarioConfig) -> np.ndarray:
    lo, hi = cfg.clutter.azimuth_span
    return np.linspace(lo, hi, cfg.clutter.patches)


def build_clutter_operators(cfg: ScenarioConfig) -> np.ndarray:
    """
    Clutter patch operators A_q = sqrt(patch_power) · (v(f_q) ⊗ I_N ⊗ a(θ_q, φ_c)),
    with f_q = β sin(θ_q) cos(φ_c) / 2 on the clutter ridge.

    :return: Array of shape (Q, MNL, N).
    """
    c = cfg.clutter
    amplitude = math.sqrt(c.patch_power)
    ops = []
    for theta in clutter_patch_azimuths(cfg):
        f_q = c.doppler_slope * math.sin(theta) * math.cos(c.elevation) / 2.0
        v = doppler_steering(f_q, cfg.L)
        a = spatial_steering(theta, c.elevation, cfg.M)
        ops.append(amplitude * space_time_map(v, a, cfg.N))
    return np.stack(ops)


def clutter_cov(ops: np.ndarray, s: ComplexVector) -> ComplexMatrix:
    """
    R_c(s) = Σ_q A_q s s^H A_q^H.
    """
    x = np.einsum("qmn,n->mq", ops, s)
    return x @ x.conj().T


def waveform_hessian(ops: np.ndarray, w: ComplexVector) -> ComplexMatrix:
    """
    F0(w) = Σ_q A_q^H w w^H A_q, so that s^H F0(w) s = w^H R_c(s) w.
    """
    y = np.einsum("qmn,m->nq", ops.conj(), w)
    return y @ y.conj().T


def clutter_form(ops: np.ndarray, w: ComplexVector, s: ComplexVector) -> float:
    """
    w^H R_c(s) w = Σ_q |w^H A_q s|^2, without forming R_c.
    """
    responses = np.einsum("m,qmn,n->q", w.conj(), ops, s)
    return float(np.sum(np.abs(responses) ** 2))


@dataclass(frozen=True)
class CovarianceBundle:
    """
    Waveform independent covariances, clutter operators and target map of a scenario.
    Read only once built.
    """
    R_n: ComplexMatrix
    R_i: ComplexMatrix
    clutter_ops: np.ndarray
    G: ComplexMatrix

    @property
    def R_ni(self) -> ComplexMatrix:
        return self.R_n + self.R_i

    def clutter_cov(self, s: ComplexVector) -> ComplexMatrix:
        return clutter_cov(self.clutter_ops, s)

    def waveform_hessian(self, w: ComplexVector) -> ComplexMatrix:
        return waveform_hessian(self.clutter_ops, w)

    def total_cov(self, s: ComplexVector) -> ComplexMatrix:
        return total_cov(self, s)


def total_cov(bundle: CovarianceBundle, s: ComplexVector) -> ComplexMatrix:
    """
    R_u(s) = R_c(s) + R_n + R_i.
    """
    return bundle.clutter_cov(s) + bundle.R_n + bundle.R_i


def build_covariance_bundle(cfg: ScenarioConfig) -> CovarianceBundle:
    """
    Build every waveform independent quantity of a scenario.
    """
    cfg.validate()
    _logger.info("Building covariance bundle (M=%d, N=%d, L=%d, Q=%d)...",
                 cfg.M, cfg.N, cfg.L, cfg.clutter.patches)
    bundle = CovarianceBundle(R_n=build_noise_cov(cfg),
                              R_i=build_interference_cov(cfg),
                              clutter_ops=build_clutter_operators(cfg),
                              G=build_target_map(cfg))
    for name in ("R_n", "R_i", "G"):
        as_complex(getattr(bundle, name), name)
    return bundle
