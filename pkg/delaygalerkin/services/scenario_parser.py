import configparser
import logging
import re
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from delaygalerkin.config import Config
from delaygalerkin.models.scenario import AnalysisOptions, InitialData, OutputOptions, Scenario
from delaygalerkin.services.delay_model import DelayLaw, EpsilonSequence, TabulatedKernel
from delaygalerkin.services.rhs_nonlocal import Nonlinearity, SpatialKernel
from delaygalerkin.services.spectral_core import ALIASING_FACTOR, Domain
from delaygalerkin.utils.errors import BasisError, KernelError, ScenarioError

logger = logging.getLogger(__name__)

SECTIONS: Dict[str, Tuple[str, ...]] = {
    'domain': ('length', 'grid_size'),
    'operator': ('modes', 'damping'),
    'nonlinearity': ('kind', 'p', 'nodes', 'values'),
    'spatial_kernel': ('kind', 'f0', 'alpha'),
    'delay': ('span', 'law', 'eta0', 'eta_max', 'c0', 'c1', 'c2', 'mode', 'n', 'eps0', 'eps_ratio',
              'eps_values', 'kernel', 'kernel_nodes', 'kernel_values'),
    'integration': ('dt', 'horizon', 'workers'),
    'initial': ('u0', 'u0_mode', 'u0_amplitude', 'history', 'seed'),
    'output': ('directory', 'coefficients', 'plot_data'),
    'analysis': ('slack', 'abs_floor', 'long_horizon', 'perturbations', 'n_max', 'ensemble_norms',
                 'ensemble_modes', 'transient', 'tolerance', 'window', 'study_horizon'),
}

# Scenario invariant -> the key whose line is reported.
INVARIANT_KEYS = {
    'damping': ('operator', 'damping'),
    'modes': ('operator', 'modes'),
    'anti-aliasing': ('domain', 'grid_size'),
    'span': ('delay', 'span'),
    'time-step': ('integration', 'dt'),
    'history-grid': ('integration', 'dt'),
    'horizon': ('integration', 'horizon'),
    'rhs-mode': ('delay', 'mode'),
    'kernel-index': ('delay', 'n'),
    'delay-range': ('delay', 'eta_max'),
    'kernel-support': ('delay', 'eps0'),
    'initial-data': ('initial', 'u0'),
    'workers': ('integration', 'workers'),
}

_PI_MULTIPLE = re.compile(r'^([+-]?[0-9.eE+-]+)\s*\*?\s*pi$')
_PI_FRACTION = re.compile(r'^pi\s*/\s*([0-9.eE+-]+)$')
_FRACTION = re.compile(r'^([+-]?[0-9.eE+-]+)\s*/\s*([0-9.eE+-]+)$')


def parse_number(text: str) -> float:
    """Float, fraction `1/64`, or a multiple/fraction of pi (`pi`, `2*pi`, `pi/2`)."""
    value = text.strip().lower()
    if value == 'pi':
        return float(np.pi)
    match = _PI_MULTIPLE.match(value)
    if match:
        return float(match.group(1)) * float(np.pi)
    match = _PI_FRACTION.match(value)
    if match:
        return float(np.pi) / float(match.group(1))
    match = _FRACTION.match(value)
    if match:
        return float(match.group(1)) / float(match.group(2))
    return float(value)


class _Document:
    """configparser view that remembers the line of every section and key."""

    def __init__(self, text: str):
        self.parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
        try:
            self.parser.read_string(text)
        except configparser.MissingSectionHeaderError as e:
            raise ScenarioError(f"key outside any section: {e.line.strip()!r}", line=e.lineno) from e
        except configparser.DuplicateOptionError as e:
            raise ScenarioError(f"duplicate key '{e.option}' in [{e.section}]", line=e.lineno) from e
        except configparser.DuplicateSectionError as e:
            raise ScenarioError(f"duplicate section [{e.section}]", line=e.lineno) from e
        except configparser.ParsingError as e:
            line = e.errors[0][0] if e.errors else None
            raise ScenarioError(f"malformed line: {e.errors[0][1].strip() if e.errors else ''}", line=line) from e
        self.lines: Dict[Tuple[str, Optional[str]], int] = {}
        section = None
        for number, raw in enumerate(text.splitlines(), start=1):
            stripped = raw.strip()
            if not stripped or stripped[0] in '#;':
                continue
            if stripped.startswith('[') and stripped.endswith(']'):
                section = stripped[1:-1].strip().lower()
                self.lines.setdefault((section, None), number)
            elif section is not None and raw[:1] not in ' \t':
                key = re.split(r'[=:]', stripped, maxsplit=1)[0].strip().lower()
                self.lines.setdefault((section, key), number)
        self._check_known()

    def _check_known(self) -> None:
        for section in self.parser.sections():
            if section.lower() not in SECTIONS:
                raise ScenarioError(f"unknown section [{section}]", line=self.line(section.lower()))
            for key in self.parser[section]:
                if key not in SECTIONS[section.lower()]:
                    raise ScenarioError(f"unknown key '{key}' in [{section}]", line=self.line(section.lower(), key))

    def line(self, section: str, key: Optional[str] = None) -> Optional[int]:
        return self.lines.get((section, key), self.lines.get((section, None)))

    def _raw(self, section: str, key: str) -> Optional[str]:
        if not self.parser.has_option(section, key):
            return None
        return self.parser.get(section, key)

    def _convert(self, section: str, key: str, default, convert, kind: str):
        raw = self._raw(section, key)
        if raw is None:
            return default
        try:
            return convert(raw)
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"[{section}] {key} = {raw.strip()!r} is not a valid {kind}",
                                line=self.line(section, key)) from e

    def number(self, section: str, key: str, default: Optional[float]) -> Optional[float]:
        return self._convert(section, key, default, parse_number, 'number')

    def integer(self, section: str, key: str, default: int) -> int:
        return self._convert(section, key, default, lambda raw: int(raw.strip()), 'integer')

    def value(self, section: str, key: str, default: str) -> str:
        return self._convert(section, key, default, lambda raw: raw.strip(), 'string')

    def text(self, section: str, key: str, default: str) -> str:
        return self._convert(section, key, default, lambda raw: raw.strip().lower(), 'string')

    def flag(self, section: str, key: str, default: bool) -> bool:
        def _flag(raw):
            value = raw.strip().lower()
            if value not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(value)
            return configparser.ConfigParser.BOOLEAN_STATES[value]
        return self._convert(section, key, default, _flag, 'boolean')

    def numbers(self, section: str, key: str, default: Tuple[float, ...]) -> Tuple[float, ...]:
        return self._convert(section, key, default,
                             lambda raw: tuple(parse_number(v) for v in raw.split(',') if v.strip()), 'number list')

    def integers(self, section: str, key: str, default: Tuple[int, ...]) -> Tuple[int, ...]:
        return self._convert(section, key, default,
                             lambda raw: tuple(int(v) for v in raw.split(',') if v.strip()), 'integer list')


class ScenarioParser:
    """Builds a validated Scenario from the sectioned scenario document."""

    @staticmethod
    def parse(text: str, overrides: Optional[Dict[str, Any]] = None, name: str = 'scenario') -> Scenario:
        doc = _Document(text)
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

        modes = overrides.get('modes', doc.integer('operator', 'modes', 16))
        default_grid = max(64, ALIASING_FACTOR * modes)
        span = doc.number('delay', 'span', 1.0)

        def _build(section, factory):
            try:
                return factory()
            except (ValueError, KernelError, BasisError) as e:
                if isinstance(e, ScenarioError) and e.line is not None:
                    raise
                message = e.message if isinstance(e, ScenarioError) else str(e)
                invariant = getattr(e, 'invariant', None) or section
                raise ScenarioError(message, line=doc.line(section), invariant=invariant) from e

        domain = _build('domain', lambda: Domain(doc.number('domain', 'length', float(np.pi)),
                                                 doc.integer('domain', 'grid_size', default_grid)))
        nonlinearity = _build('nonlinearity', lambda: Nonlinearity(
            kind=doc.text('nonlinearity', 'kind', 'nicholson'),
            p=doc.number('nonlinearity', 'p', 2.0),
            nodes=doc.numbers('nonlinearity', 'nodes', ()),
            values=doc.numbers('nonlinearity', 'values', ())))
        spatial_kernel = _build('spatial_kernel', lambda: SpatialKernel(
            kind=doc.text('spatial_kernel', 'kind', 'constant'),
            f0=doc.number('spatial_kernel', 'f0', 1.0),
            alpha=doc.number('spatial_kernel', 'alpha', 0.05)))
        law = _build('delay', lambda: ScenarioParser._delay_law(doc, span))
        eps_sequence = _build('delay', lambda: EpsilonSequence(
            eps0=doc.number('delay', 'eps0', span / 8.0),
            ratio=doc.number('delay', 'eps_ratio', 0.5),
            values=doc.numbers('delay', 'eps_values', ()) or None))
        kernel_shape = _build('delay', lambda: ScenarioParser._kernel_shape(doc))

        initial = InitialData(
            u0=doc.text('initial', 'u0', 'mode'),
            u0_mode=doc.integer('initial', 'u0_mode', 1),
            u0_amplitude=doc.number('initial', 'u0_amplitude', 1.0),
            history=doc.text('initial', 'history', 'constant'),
            seed=overrides.get('seed', doc.integer('initial', 'seed', 0)))
        output = OutputOptions(
            directory=str(overrides.get('out', doc.value('output', 'directory', Config.OUTPUT_DIR))),
            coefficients=doc.flag('output', 'coefficients', True),
            plot_data=overrides.get('plot_data') or doc.flag('output', 'plot_data', False))
        defaults = AnalysisOptions()
        analysis = AnalysisOptions(
            slack=doc.number('analysis', 'slack', defaults.slack),
            abs_floor=doc.number('analysis', 'abs_floor', defaults.abs_floor),
            long_horizon=doc.number('analysis', 'long_horizon', defaults.long_horizon),
            perturbations=doc.numbers('analysis', 'perturbations', defaults.perturbations),
            n_max=doc.integer('analysis', 'n_max', defaults.n_max),
            ensemble_norms=doc.numbers('analysis', 'ensemble_norms', defaults.ensemble_norms),
            ensemble_modes=doc.integers('analysis', 'ensemble_modes', defaults.ensemble_modes),
            transient=doc.number('analysis', 'transient', defaults.transient),
            tolerance=doc.number('analysis', 'tolerance', defaults.tolerance),
            window=doc.number('analysis', 'window', defaults.window),
            study_horizon=doc.number('analysis', 'study_horizon', defaults.study_horizon))

        scenario = Scenario(
            domain=domain,
            modes=modes,
            damping=doc.number('operator', 'damping', 1.0),
            span=span,
            dt=overrides.get('dt', doc.number('integration', 'dt', 1.0 / 64)),
            horizon=doc.number('integration', 'horizon', 20.0),
            nonlinearity=nonlinearity,
            spatial_kernel=spatial_kernel,
            law=law,
            mode=doc.text('delay', 'mode', 'distributed'),
            n=doc.integer('delay', 'n', 1),
            eps_sequence=eps_sequence,
            kernel_shape=kernel_shape,
            initial=initial,
            output=output,
            analysis=analysis,
            workers=doc.integer('integration', 'workers', 1),
            name=name,
        )
        try:
            scenario.validate()
        except ScenarioError as e:
            section_key = INVARIANT_KEYS.get(e.invariant)
            line = doc.line(*section_key) if section_key else None
            raise ScenarioError(e.message, line=line, invariant=e.invariant) from e
        logger.debug("Parsed scenario %s: m=%d dt=%g T=%g mode=%s", name, scenario.modes, scenario.dt,
                     scenario.horizon, scenario.mode)
        return scenario

    @staticmethod
    def _delay_law(doc: _Document, span: float) -> DelayLaw:
        rule = doc.text('delay', 'law', 'constant')
        if rule == 'sigmoid':
            return DelayLaw.sigmoid(eta_max=doc.number('delay', 'eta_max', 0.75 * span),
                                    c0=doc.number('delay', 'c0', 0.0),
                                    c1=doc.number('delay', 'c1', 1.0),
                                    c2=doc.number('delay', 'c2', 0.0))
        if rule != 'constant':
            raise KernelError(f"unknown delay law '{rule}' (expected constant or sigmoid)")
        eta0 = doc.number('delay', 'eta0', 0.5 * span)
        return DelayLaw.constant(eta0)

    @staticmethod
    def _kernel_shape(doc: _Document) -> Optional[TabulatedKernel]:
        kind = doc.text('delay', 'kernel', 'step')
        if kind == 'step':
            return None
        if kind != 'tabulated':
            raise KernelError(f"unknown delay kernel '{kind}' (expected step or tabulated)")
        return TabulatedKernel.profile(doc.numbers('delay', 'kernel_nodes', ()),
                                       doc.numbers('delay', 'kernel_values', ()))


def parse_scenario(text: str, overrides: Optional[Dict[str, Any]] = None, name: str = 'scenario') -> Scenario:
    return ScenarioParser.parse(text, overrides, name)


def load_scenario(path, overrides: Optional[Dict[str, Any]] = None) -> Tuple[Scenario, str]:
    """Read and parse a scenario file; returns the scenario and the raw text."""
    path = Path(path)
    text = path.read_text(encoding='utf-8')
    return parse_scenario(text, overrides, name=path.stem), text