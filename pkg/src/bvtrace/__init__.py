"""Numerical toolkit for the BV(Ω) → L¹(∂Ω) trace constant λ₁(Ω).

Closed forms, curvature asymptotics, p-Laplacian continuation, eigenset
search and shape derivatives, all for the quotient

    (∫|∇u| + ∫|u|) / ∫_∂Ω |u|.
"""

__version__ = "0.1.0"
