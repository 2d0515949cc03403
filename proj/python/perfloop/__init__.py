"""Python interface to the perfloop core.

Models, run configs and results are plain dicts and lists. Actions are
either dicts ({"kind": "CLONE", "target": "api"}) or the shorthands
"clone:<component>" and "move:<component>/<operation>".
"""

import json

from . import _core
from ._core import Error, NotFoundError, ParseError, RangeError, ValidationError

__all__ = [
    "Error", "NotFoundError", "ParseError", "RangeError", "ValidationError",
    "Session", "annotate", "detect", "fixture_names", "fuzzy_prob", "ingest",
    "link", "load_fixture", "mva", "predict", "preview", "refactor", "replay",
    "simulate", "validate_model",
]


def _doc(value):
    return value if isinstance(value, str) else json.dumps(value)


def _actions(actions):
    if isinstance(actions, (str, dict)):
        actions = [actions]
    return [_doc(a) for a in actions]


def fixture_names():
    return _core.fixture_names()


def load_fixture(name):
    return json.loads(_core.load_fixture(name))


def validate_model(model):
    """Returns the normalised model; raises ValidationError when it is broken."""
    return json.loads(_core.validate_model(_doc(model)))


def ingest(spans, util=""):
    return json.loads(_core.ingest(spans, util))


def link(model, spans):
    return json.loads(_core.link(_doc(model), spans))


def annotate(model, spans, util="", window=0.0):
    return json.loads(_core.annotate(_doc(model), spans, util, window))


def mva(demands, population, think_time=0.0):
    return json.loads(_core.mva(list(demands), population, think_time))


def predict(model):
    return json.loads(_core.predict(_doc(model)))


def fuzzy_prob(value, lb, ub):
    return _core.fuzzy_prob(value, lb, ub)


def detect(model, bands=None, floor=0.01):
    return json.loads(_core.detect(_doc(model), "" if bands is None else _doc(bands), floor))


def refactor(model, actions):
    return json.loads(_core.refactor(_doc(model), _actions(actions)))


def preview(model, actions):
    return json.loads(_core.preview(_doc(model), _actions(actions)))


def simulate(model, run):
    """Runs the simulated system; spans and utilization come back as NDJSON text."""
    return json.loads(_core.simulate(_doc(model), _doc(run)))


def replay(record_text):
    return json.loads(_core.replay(record_text))


class Session:
    """A refactoring session over a simulated system."""

    def __init__(self, model=None, config=None, *, _native=None):
        self._s = _native if _native is not None else _core.Session(_doc(model), _doc(config or {}))

    @classmethod
    def from_fixture(cls, name, seed=None):
        return cls(_native=_core.Session.from_fixture(name, seed))

    @property
    def iteration(self):
        return self._s.iteration

    @property
    def generation(self):
        return self._s.generation

    @property
    def warnings(self):
        return self._s.warnings

    def model(self):
        return json.loads(self._s.model())

    def history(self):
        return json.loads(self._s.history())

    def detect(self):
        return json.loads(self._s.detect())

    def candidates(self):
        return json.loads(self._s.candidates())

    def preview(self, actions):
        return json.loads(self._s.preview(_actions(actions)))

    def apply(self, actions, scope="MODEL_AND_SYSTEM"):
        self._s.apply(_actions(actions), scope)

    def measure(self):
        self._s.measure()

    def batch(self, floor=0.1, max_iterations=5):
        return json.loads(self._s.batch(floor, max_iterations))

    def comparison(self):
        return json.loads(self._s.comparison())

    def record_file(self):
        return self._s.record_file()
