"""Named backend configurations shared by the command line and the demos."""

from dataclasses import dataclass

import sympy as sp

from .errors import ConfigurationError
from .fields import FieldPolynomial
from .functions import bump
from .tproduct import Interaction, MockKernelRule, TProduct


def mock_kernel_rule() -> MockKernelRule:
    """The singular double-line class used to exercise scheme ambiguity."""
    y0 = sp.Symbol("y0", real=True)
    return MockKernelRule(((0,), (0,)), 1 / sp.Abs(y0), sd=1.0, name="mock-d4")


@dataclass(frozen=True)
class Model:
    """One registered backend: a product constructor plus a stock interaction."""

    name: str
    d: int
    m: float
    power: int
    center: tuple
    radius: float
    mock: bool = False
    aliases: tuple = ()
    note: str = ""

    def product(self, policy=None, counterterms=None) -> TProduct:
        mock = mock_kernel_rule() if self.mock else None
        return TProduct(self.d, self.m, mock=mock, policy=policy,
                        counterterms=counterterms)

    def interaction(self) -> Interaction:
        poly = FieldPolynomial.phi_power(self.d, self.power)
        return Interaction.single(poly, bump(self.center, self.radius))

    def capabilities(self) -> dict:
        if self.mock:
            suite = interacting = "with-policy"
        elif self.d == 1:
            suite = interacting = "full"
        else:
            suite, interacting = "scaling", "commutator"
        return {
            "kernels": True,
            "axiom-suite": suite,
            "interacting": interacting,
            "map-solver": self.mock,
        }


MODELS = (
    Model("d1-massive", 1, 1.0, 4, (0.1,), 0.7, aliases=("d1-phi4",),
          note="massive line, quartic interaction"),
    Model("d2-massless", 2, 0.0, 2, (0.0, 0.0), 0.4,
          note="massless plane, quadratic interaction"),
    Model("mock-d4-kernel", 1, 1.0, 4, (0.1,), 0.7, mock=True,
          note="requires counterterm policy"),
)


def get_model(name: str) -> Model:
    for model in MODELS:
        if model.name == name or name in model.aliases:
            return model
    known = ", ".join(m.name for m in MODELS)
    raise ConfigurationError(f"unknown model {name!r}; known models: {known}")


def model_catalog() -> list:
    out = []
    for m in MODELS:
        out.append({
            "name": m.name,
            "aliases": list(m.aliases),
            "dimension": m.d,
            "mass": m.m,
            "interaction": f"phi^{m.power}",
            "note": m.note,
            "capabilities": m.capabilities(),
        })
    return out
