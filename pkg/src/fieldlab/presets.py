"""Named theories usable anywhere a Lagrangian text is accepted."""

from __future__ import annotations

from .dsl import LagrangianSpec, parse_lagrangian

PRESETS: dict[str, str] = {
    "free-massless": """\
dim 2
L = 0.5*d(phi,mu)*d(phi,^mu)
""",
    "klein-gordon": """\
dim 2
param m = 1.0
L = 0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2
""",
    "phi4": """\
dim 2
param m = 1.0
param g4 = 1.0
L = 0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2 - g4/24*phi^4
""",
    "phi4-massless-4d": """\
dim 4
param g4 = 1.0
L = 0.5*d(phi,mu)*d(phi,^mu) - g4/24*phi^4
""",
    "complex-kg": """\
dim 2
field phi complex
param m = 1.0
L = d(phi,mu)*d(phistar,^mu) - m^2*phi*phistar
""",
    "complex-phi4-massless": """\
dim 4
field phi complex
param v4 = 1.0
L = d(phi,mu)*d(phistar,^mu) - v4/2*(phi*phistar)^2
""",
    "dissipative-kg": """\
dim 2
param m = 1.0
param h0 = 0.1
param h1 = 0.05
L = exp(h0*x0 + h1*x1)*(0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2)
""",
    "spacetime-dependent": """\
dim 2
param sigma = 2.0
param c = 0.0
def a = 0.3*x0 + 0.1*x0^2
L = 0.5*d(phi,mu)*d(phi,^mu) + d(a,mu)*d(phi,^mu) - 0.5*sigma*phi^2 - sigma*a*phi + c
""",
}


def preset_text(name: str) -> str:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None


def load_theory(source: str, params=None, dim: int | None = None) -> LagrangianSpec:
    """Parse a preset id or a literal Lagrangian text."""
    text = PRESETS.get(source.strip(), source)
    return parse_lagrangian(text, params=params, dim=dim)
