"""Moments, root structure, identifiability certificates, and recovery for
binary-latent product models.

Modules by task:

* ``model``   -- parameters, moments (with a brute-force oracle), symmetries,
  gauge fixing, canonical forms, lumped Hankel matrices.
* ``polyseq`` -- the three-term-recurrence polynomial families on exact and
  float backends, and their structural identities.
* ``rootlab`` -- certified root isolation with interlacing witnesses, exact
  gcds, atomic factors, figure data.
* ``ident``   -- local-identifiability certification: multiplicity-matrix
  rank over Q, the diagonal-Jacobian uniform route, and the perturbed
  common-root general route.
* ``recover`` -- moment-based parameter recovery and the lumped
  exponential-moment baseline.
* ``cli``     -- batch experiment driver.
"""

__version__ = "0.1.0"
