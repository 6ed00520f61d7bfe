# A tour of the periodized Daubechies basis used by the estimators.
#
# Run: python3 demos/01_wavelet_basis.py

import numpy as np

from lmwave import build_basis, eval_phi, eval_psi, gram_matrix, quadrature_coefficient

# The filters come from spectral factorization, the scaling function and
# wavelet from the cascade algorithm on a dyadic grid of depth 14.
db3 = build_basis(3, 14)
print("db3 low-pass filter:", np.round(db3.filter, 6))
print("support of phi: [0, %d]" % (db3.filter.size - 1))

# Any point of [0, 1) can be evaluated, which is what a random design needs.
t = np.array([0.0, 0.1, 0.3, 0.5, 0.9])
print("psi_{3,2}(t) =", np.round(eval_psi(db3, 3, 2, t), 5))
print("phi_{2,1}(t) =", np.round(eval_phi(db3, 2, 1, t), 5))

# Periodized translates at a fixed level are orthonormal.
G = gram_matrix(db3, 4)
print("max |G - I| at level 4: %.2e" % np.abs(G - np.eye(16)).max())

# Three vanishing moments: polynomials up to degree 2 have zero detail
# coefficients away from the wrap-around, a smooth bump does not.
quad = lambda t: 8 * (t - 0.5) ** 2 - 2 / 3
bump = lambda t: np.exp(-100 * (t - 0.5) ** 2)
for name, fn in (("quadratic", quad), ("bump", bump)):
    row = [quadrature_coefficient(db3, fn, 3, k) for k in range(8)]
    print(f"{name:9s} level-3 coefficients:", " ".join(f"{c:+.1e}" for c in row))

# Haar is the degenerate case with closed forms.
haar = build_basis(1, 14)
print("Haar psi(0.25), psi(0.75):", eval_psi(haar, 0, 0, 0.25), eval_psi(haar, 0, 0, 0.75))
